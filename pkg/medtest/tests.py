"""Tests of the composite null H0: αβ = 0 and their theoretical size and power.

Four procedures are provided for each mediator:

* Sobel: Wald test of α̂β̂ with the delta-method standard error.
* JS: joint significance, P_JS = max(P_α, P_β).
* ASobel: the Sobel statistic against the N(0, 1/4) reference when
  T_max = max(|T_α|, |T_β|) < λ_n, the standard normal otherwise.
* AJS: P_JS² when T_max < λ_n, P_JS otherwise.

λ_n = √n / ln n separates the double null (both t-ratios of order one) from
the single nulls (one t-ratio of order √n).
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, model_validator

from medtest.defaults import (
    DEFAULT_DELTA,
    DEFAULT_POWER_DRAWS,
    DEFAULT_SEED,
    MIN_POWER_DRAWS,
)
from medtest.dist import (
    RngStream,
    critical_value,
    std_normal_cdf,
    std_normal_sf,
    two_sided_pvalue,
)
from medtest.errors import DegenerateFitError, DomainError
from medtest.models import MediationFit
from medtest.utils.constants import TestMethod

_POWER_CHUNK = 1_000_000


class TestReport(BaseModel):
    """
    P-values of the four tests for one mediator.

    Attributes:
        p_sobel: Sobel p-value 2(1 - Φ(|T_Sobel|)).
        p_js: Joint significance p-value max(P_α, P_β).
        p_asobel: Adaptive Sobel p-value.
        p_ajs: Adaptive joint significance p-value.
        t_alpha: α̂ / σ̂_α.
        t_beta: β̂ / σ̂_β.
        t_sobel: Sobel statistic.
        t_max: max(|t_alpha|, |t_beta|).
        lambda_n: Threshold √n / ln n.
        adaptive_branch: True when t_max < lambda_n.
        mediator_index: 1-based mediator position.
    """

    __test__ = False

    p_sobel: float
    p_js: float
    p_asobel: float
    p_ajs: float
    t_alpha: float
    t_beta: float
    t_sobel: float
    t_max: float
    lambda_n: float
    adaptive_branch: bool
    mediator_index: int = 1

    @model_validator(mode="after")
    def _check_invariants(self) -> TestReport:
        for method in TestMethod:
            if not 0.0 <= self.p_value(method) <= 1.0:
                raise ValueError(f"{method} p-value outside [0, 1]")
        if self.p_ajs > self.p_js or self.p_asobel > self.p_sobel:
            raise ValueError("adaptive p-values must not exceed their base p-values")
        if self.adaptive_branch != (self.t_max < self.lambda_n):
            raise ValueError("adaptive_branch must equal t_max < lambda_n")
        return self

    def p_value(self, method: TestMethod) -> float:
        return {
            TestMethod.SOBEL: self.p_sobel,
            TestMethod.JS: self.p_js,
            TestMethod.ASOBEL: self.p_asobel,
            TestMethod.AJS: self.p_ajs,
        }[TestMethod(method)]

    def rejects(self, method: TestMethod, threshold: float) -> bool:
        return self.p_value(method) < threshold


class AdaptivePValue(NamedTuple):
    p_value: float
    adaptive_branch: bool


class PowerEstimate(NamedTuple):
    power: float
    standard_error: float


def lambda_threshold(n: float) -> float:
    """λ_n = √n / ln n, with the natural logarithm."""
    if not n >= 2:
        raise DomainError(f"lambda_threshold needs n >= 2, got {n}")
    return math.sqrt(n) / math.log(n)


def adaptive_branch(fit: MediationFit, lambda_n: Optional[float] = None) -> bool:
    """True when T_max < λ_n, the branch that uses the double-null reference."""
    threshold = lambda_threshold(fit.n) if lambda_n is None else lambda_n
    # A tie t_max == lambda_n stays on the standard branch.
    return fit.t_max < threshold


def p_js(fit: MediationFit) -> float:
    return max(
        float(two_sided_pvalue(fit.t_alpha)), float(two_sided_pvalue(fit.t_beta))
    )


def p_ajs(fit: MediationFit) -> AdaptivePValue:
    branch = adaptive_branch(fit)
    p = p_js(fit)
    return AdaptivePValue(p * p if branch else p, branch)


def sobel_se(fit: MediationFit) -> float:
    """Delta-method standard error √(α̂²σ̂_β² + β̂²σ̂_α²) of α̂β̂."""
    return math.hypot(fit.alpha_hat * fit.se_beta, fit.beta_hat * fit.se_alpha)


def sobel_stat(fit: MediationFit) -> float:
    """T_Sobel = α̂β̂ / σ̂_αβ, defined as 0 when α̂ = β̂ = 0."""
    if fit.se_alpha <= 0.0 and fit.se_beta <= 0.0:
        raise DegenerateFitError("both standard errors are zero")
    se = sobel_se(fit)
    point = fit.alpha_hat * fit.beta_hat
    if se == 0.0:
        return 0.0
    return point / se


def p_sobel(fit: MediationFit) -> float:
    return float(two_sided_pvalue(sobel_stat(fit)))


def _asobel_pvalue(t_sobel: float, branch: bool) -> float:
    if branch:
        # Φ_{N(0,1/4)}(t) = Φ(2t)
        return float(two_sided_pvalue(2.0 * t_sobel))
    return float(two_sided_pvalue(t_sobel))


def p_asobel(fit: MediationFit) -> float:
    return _asobel_pvalue(sobel_stat(fit), adaptive_branch(fit))


def evaluate(fit: MediationFit, lambda_n: Optional[float] = None) -> TestReport:
    """All four tests for one mediator, sharing one threshold evaluation."""
    threshold = lambda_threshold(fit.n) if lambda_n is None else lambda_n
    branch = adaptive_branch(fit, threshold)
    t_sobel = sobel_stat(fit)
    joint = p_js(fit)
    return TestReport(
        p_sobel=float(two_sided_pvalue(t_sobel)),
        p_js=joint,
        p_asobel=_asobel_pvalue(t_sobel, branch),
        p_ajs=joint * joint if branch else joint,
        t_alpha=fit.t_alpha,
        t_beta=fit.t_beta,
        t_sobel=t_sobel,
        t_max=fit.t_max,
        lambda_n=threshold,
        adaptive_branch=branch,
        mediator_index=fit.mediator_index,
    )


def theoretical_size_sobel_h00(delta: float = DEFAULT_DELTA) -> float:
    """Size 2{1 - Φ(2·z_{1-δ/2})} of the Sobel test under α = β = 0."""
    return 2.0 * float(std_normal_sf(2.0 * critical_value(delta)))


def _check_level(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise DomainError(f"Level must lie in (0, 1), got {delta}")


def theoretical_size_js_h00(delta: float = DEFAULT_DELTA) -> float:
    _check_level(delta)
    return delta * delta


def theoretical_size_ajs_h00(delta: float = DEFAULT_DELTA) -> float:
    _check_level(delta)
    return delta


def _component_power(mu: float, z: float) -> float:
    return float(std_normal_cdf(mu - z)) + float(std_normal_cdf(-mu - z))


def _check_probability(prob: float) -> None:
    if not 0.0 <= prob <= 1.0:
        raise DomainError(f"prob_tmax_ge must lie in [0, 1], got {prob}")


def theoretical_power_js(
    mu_alpha: float, mu_beta: float, delta: float = DEFAULT_DELTA
) -> float:
    """Power of the JS test when T_α ~ N(μ_α, 1) and T_β ~ N(μ_β, 1)."""
    z = critical_value(delta)
    return _component_power(mu_alpha, z) * _component_power(mu_beta, z)


def theoretical_power_ajs(
    mu_alpha: float,
    mu_beta: float,
    delta: float = DEFAULT_DELTA,
    prob_tmax_ge: float = 1.0,
) -> float:
    """Power of the AJS test as a mixture over the threshold event.

    With probability `prob_tmax_ge` the test is the JS test at level δ; with the
    complementary probability it compares each t-ratio with z_{1-√δ/2}.
    """
    _check_probability(prob_tmax_ge)
    standard = theoretical_power_js(mu_alpha, mu_beta, delta)
    z_adaptive = critical_value(math.sqrt(delta))
    adaptive = _component_power(mu_alpha, z_adaptive) * _component_power(
        mu_beta, z_adaptive
    )
    return prob_tmax_ge * standard + (1.0 - prob_tmax_ge) * adaptive


def theoretical_power_asobel(
    mu_alpha: float,
    mu_beta: float,
    delta: float = DEFAULT_DELTA,
    prob_tmax_ge: float = 1.0,
    draws: int = DEFAULT_POWER_DRAWS,
    rng: Optional[RngStream] = None,
) -> PowerEstimate:
    """Monte Carlo power of the ASobel test.

    Draws (x, y) ~ N(μ_α, 1) x N(μ_β, 1) and counts |xy| / √(x² + y²) above
    z_{1-δ/2} (standard branch) and above z_{1-δ/2} / 2 (adaptive branch).
    Both branches share the same draws.
    """
    _check_probability(prob_tmax_ge)
    if draws < MIN_POWER_DRAWS:
        raise DomainError(f"draws must be at least {MIN_POWER_DRAWS}, got {draws}")
    z = critical_value(delta)
    rng = rng or RngStream(DEFAULT_SEED)
    standard_hits = 0
    adaptive_hits = 0
    remaining = draws
    while remaining > 0:
        m = min(_POWER_CHUNK, remaining)
        x = mu_alpha + np.asarray(rng.standard_normal(m))
        y = mu_beta + np.asarray(rng.standard_normal(m))
        norm = np.hypot(x, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            stat = np.where(norm > 0.0, np.abs(x * y) / norm, 0.0)
        standard_hits += int(np.count_nonzero(stat > z))
        adaptive_hits += int(np.count_nonzero(stat > 0.5 * z))
        remaining -= m
    hits = prob_tmax_ge * standard_hits + (1.0 - prob_tmax_ge) * adaptive_hits
    power = hits / draws
    return PowerEstimate(power, math.sqrt(power * (1.0 - power) / draws))
