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
from medtest.analysis import AnalysisReport, MediationAnalysis, MediatorReport
from medtest.configuration import (
    AnalysisSpec,
    InvalidConfiguration,
    ScenarioConfig,
    SimulationPlan,
)
from medtest.defaults import FITTER_PRESETS, FitterSettings
from medtest.dist import CovMatrix, RngStream
from medtest.intervals import Interval, IntervalPair, ci_asobel, ci_sobel
from medtest.models import Dataset, MediationFit, fit_mediation
from medtest.multitest import MultiTestResult, fwer_and_power
from medtest.simulate import (
    SimulationSummary,
    generate,
    run_coverage,
    run_fwer,
    run_plan,
    run_size_power,
)
from medtest.tests import TestReport, evaluate
from medtest.utils.constants import (
    IntervalMethod,
    Metric,
    NaPolicy,
    OutcomeFamily,
    StudyKind,
    TestMethod,
)

from ._version import __version__

__all__ = [
    "FITTER_PRESETS",
    "AnalysisReport",
    "AnalysisSpec",
    "CovMatrix",
    "Dataset",
    "FitterSettings",
    "Interval",
    "IntervalMethod",
    "IntervalPair",
    "InvalidConfiguration",
    "MediationAnalysis",
    "MediationFit",
    "MediatorReport",
    "Metric",
    "MultiTestResult",
    "NaPolicy",
    "OutcomeFamily",
    "RngStream",
    "ScenarioConfig",
    "SimulationPlan",
    "SimulationSummary",
    "StudyKind",
    "TestMethod",
    "TestReport",
    "__version__",
    "ci_asobel",
    "ci_sobel",
    "evaluate",
    "fit_mediation",
    "fwer_and_power",
    "generate",
    "run_coverage",
    "run_fwer",
    "run_plan",
    "run_size_power",
]
