from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Any, FrozenSet, List, Optional, Union

import numpy as np

from medtest.configuration.base_config import BaseConfig, InvalidConfiguration
from medtest.defaults import (
    DEFAULT_CENSOR_TARGET,
    DEFAULT_DELTA,
    DEFAULT_GAMMA,
    DEFAULT_INTERCEPT,
    DEFAULT_REPS,
    DEFAULT_RHO,
    DEFAULT_SEED,
    MAX_UINT64,
)
from medtest.dist import CovMatrix
from medtest.utils.constants import OutcomeFamily

FAMILY_NOT_VALID = "family: {} is not valid. Must be one of {}."
N_NOT_VALID = "n: sample size must be an integer of at least {}. Not {}."
VECTOR_NOT_VALID = "{}: must be a non-empty list of finite numbers. Not {}."
LENGTH_MISMATCH = "beta: expected {} entries to match alpha, got {}."
REAL_NOT_VALID = "{}: must be a finite number. Not {}."
RHO_NOT_VALID = "rho: must lie in (-1, 1). Not {}."
CENSOR_TARGET_NOT_VALID = "censor_target: must lie in (0, 1). Not {}."
CENSOR_C0_NOT_VALID = "censor_c0: must be a positive number or null. Not {}."
REPS_NOT_VALID = "reps: must be an integer of at least 1. Not {}."
SEED_NOT_VALID = "base_seed: must be an integer in [0, 2**64). Not {}."
DELTA_NOT_VALID = "delta: must lie in (0, 1). Not {}."
TRUTH_NOT_VALID = "truth: indices must be distinct integers in 1..{}. Not {}."
UNCALIBRATED = "censor_c0: the cox scenario {} has not been calibrated."


def _is_int(value: Any) -> bool:
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)


def _is_real(value: Any) -> bool:
    return (
        isinstance(value, (int, float, np.floating, np.integer))
        and not isinstance(value, bool)
        and math.isfinite(value)
    )


@dataclass
class ScenarioConfig(BaseConfig):
    """Declarative description of one simulation scenario.

    Mediators follow M_k = c_k + α_k X + e_k with e ~ N(0, Σ), Σ_ij = ρ^|i-j|.
    The outcome is linear (Y = c + γX + βᵀM + ε), logistic without intercept
    (P(Y = 1) = expit(γX + βᵀM)) or Cox with unit baseline hazard and
    hazard exp(γX + βᵀM), censored by C ~ U(0, c₀).

    Args:
        family (OutcomeFamily): Outcome family.
        n (int): Sample size.
        alpha (list[float]): Exposure effects on the mediators.
        beta (list[float]): Mediator effects on the outcome.
        gamma (float): Direct exposure effect. Defaults to 0.5.
        outcome_intercept (float): Intercept c of the linear outcome. Defaults to 0.5.
        mediator_intercept (float): Intercept c_k shared by the mediators.
            Defaults to 0.5.
        rho (float): AR(1) correlation of the mediator errors. Defaults to 0.25.
        censor_target (float): Target censoring rate (cox only). Defaults to 0.30.
        censor_c0 (float, optional): Calibrated upper bound of the censoring
            distribution. Filled by `calibrate_censoring` when missing.
        reps (int): Number of replications.
        base_seed (int): Seed of the replication streams.
        delta (float): Test level. Defaults to 0.05.
        truth (list[int], optional): 1-based indices of the true mediators.
            Defaults to {k : α_k β_k ≠ 0}.
        label (str, optional): Row label in result tables.
    """

    family: Union[OutcomeFamily, str]
    n: int
    alpha: List[float]
    beta: List[float]
    gamma: float = DEFAULT_GAMMA
    outcome_intercept: float = DEFAULT_INTERCEPT
    mediator_intercept: float = DEFAULT_INTERCEPT
    rho: float = DEFAULT_RHO
    censor_target: float = DEFAULT_CENSOR_TARGET
    censor_c0: Optional[float] = None
    reps: int = DEFAULT_REPS
    base_seed: int = DEFAULT_SEED
    delta: float = DEFAULT_DELTA
    truth: Optional[List[int]] = None
    label: Optional[str] = None

    def __post_init__(self) -> None:
        try:
            self.family = OutcomeFamily.parse(str(self.family))
        except ValueError:
            raise InvalidConfiguration(
                FAMILY_NOT_VALID.format(self.family, OutcomeFamily.list())
            ) from None
        for name in ("alpha", "beta"):
            values = getattr(self, name)
            if (
                not isinstance(values, (list, tuple))
                or not values
                or not all(_is_real(v) for v in values)
            ):
                raise InvalidConfiguration(VECTOR_NOT_VALID.format(name, values))
            setattr(self, name, [float(v) for v in values])

    @property
    def d(self) -> int:
        return len(self.alpha)

    @property
    def effects(self) -> List[float]:
        """Mediation effects α_k β_k."""
        return [a * b for a, b in zip(self.alpha, self.beta)]

    @property
    def truth_set(self) -> FrozenSet[int]:
        if self.truth is not None:
            return frozenset(self.truth)
        return frozenset(
            k + 1 for k, effect in enumerate(self.effects) if effect != 0.0
        )

    @property
    def is_null(self) -> bool:
        return not any(self.effects)

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        pairs = ", ".join(f"({a:g}, {b:g})" for a, b in zip(self.alpha, self.beta))
        return f"{self.family} n={self.n} {pairs}" if self.d == 1 else (
            f"{self.family} n={self.n} d={self.d}"
        )

    def covariance(self) -> CovMatrix:
        return CovMatrix.ar1(self.d, self.rho)

    def with_overrides(self, **changes: Any) -> ScenarioConfig:
        """Copy of the scenario with some fields replaced, validated."""
        scenario = dataclasses.replace(self, **changes)
        scenario._validate()
        return scenario

    def require_calibrated(self) -> float:
        if self.censor_c0 is None:
            raise InvalidConfiguration(UNCALIBRATED.format(self.name))
        return self.censor_c0

    def _validate(self) -> None:
        minimum_n = self.d + 3
        if not _is_int(self.n) or self.n < minimum_n:
            raise InvalidConfiguration(N_NOT_VALID.format(minimum_n, self.n))
        if len(self.beta) != self.d:
            raise InvalidConfiguration(LENGTH_MISMATCH.format(self.d, len(self.beta)))
        for name in ("gamma", "outcome_intercept", "mediator_intercept"):
            if not _is_real(getattr(self, name)):
                raise InvalidConfiguration(
                    REAL_NOT_VALID.format(name, getattr(self, name))
                )
        if not _is_real(self.rho) or not -1.0 < self.rho < 1.0:
            raise InvalidConfiguration(RHO_NOT_VALID.format(self.rho))
        if not _is_real(self.censor_target) or not 0.0 < self.censor_target < 1.0:
            raise InvalidConfiguration(
                CENSOR_TARGET_NOT_VALID.format(self.censor_target)
            )
        if self.censor_c0 is not None and (
            not _is_real(self.censor_c0) or self.censor_c0 <= 0.0
        ):
            raise InvalidConfiguration(CENSOR_C0_NOT_VALID.format(self.censor_c0))
        if not _is_int(self.reps) or self.reps < 1:
            raise InvalidConfiguration(REPS_NOT_VALID.format(self.reps))
        if not _is_int(self.base_seed) or not 0 <= self.base_seed <= MAX_UINT64:
            raise InvalidConfiguration(SEED_NOT_VALID.format(self.base_seed))
        if not _is_real(self.delta) or not 0.0 < self.delta < 1.0:
            raise InvalidConfiguration(DELTA_NOT_VALID.format(self.delta))
        if self.truth is not None and (
            not all(_is_int(k) and 1 <= k <= self.d for k in self.truth)
            or len(set(self.truth)) != len(self.truth)
        ):
            raise InvalidConfiguration(TRUTH_NOT_VALID.format(self.d, self.truth))
        super()._validate()
