# Copyright 2024 medtest development team
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
from dataclasses import dataclass
from typing import Dict, Final, Tuple

# ---- Testing ----

DEFAULT_DELTA: Final[float] = 0.05

# ---- Random streams ----

DEFAULT_SEED: Final[int] = 20240611
SEED_ENV_VAR: Final[str] = "MEDTEST_SEED"
MAX_UINT64: Final[int] = 2**64 - 1
# Reserved stream for the censoring calibration pilot, never a replication index.
CALIBRATION_STREAM_ID: Final[int] = MAX_UINT64

# ---- Data generation ----

DEFAULT_GAMMA: Final[float] = 0.5
DEFAULT_INTERCEPT: Final[float] = 0.5
DEFAULT_RHO: Final[float] = 0.25
DEFAULT_CENSOR_TARGET: Final[float] = 0.30
DEFAULT_REPS: Final[int] = 1000
CENSOR_BRACKET: Final[Tuple[float, float]] = (1e-3, 1e3)
CENSOR_TOLERANCE: Final[float] = 0.005
DEFAULT_PILOT_N: Final[int] = 100_000

# ---- Monte Carlo ----

FAILURE_FLAG_RATE: Final[float] = 0.01
DEFAULT_POWER_DRAWS: Final[int] = 1_000_000
MIN_POWER_DRAWS: Final[int] = 10_000

# ---- Fitters ----

SCORE_TOLERANCE: Final[float] = 1e-8
LOGISTIC_MAX_ITER: Final[int] = 100
COX_MAX_ITER: Final[int] = 50
MAX_ABS_COEFFICIENT: Final[float] = 50.0
# Residual sums of squares at or below (rtol * ||y||)^2 are a perfect fit.
PERFECT_FIT_RTOL: Final[float] = 1e-12
# Reciprocal condition number below which an information matrix is singular.
SINGULAR_RCOND: Final[float] = 1e-12
# A Newton step still larger than this, relative to max(|b|, 1), after
# convergence marks an infinite coefficient.
INFINITE_STEP_RTOL: Final[float] = 1e-5


@dataclass(frozen=True)
class FitterSettings:
    score_tolerance: float = SCORE_TOLERANCE
    logistic_max_iter: int = LOGISTIC_MAX_ITER
    cox_max_iter: int = COX_MAX_ITER
    max_abs_coefficient: float = MAX_ABS_COEFFICIENT
    max_step_halvings: int = 30


# ---- Pre-filled fitter settings ----

FITTER_PRESETS: Dict[str, FitterSettings] = {
    "default": FitterSettings(),
    "strict": FitterSettings(
        score_tolerance=1e-10, logistic_max_iter=200, cox_max_iter=100
    ),
}
