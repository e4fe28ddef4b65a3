"""Sobel-type and adaptive Sobel-type confidence intervals for αβ."""

from __future__ import annotations

from typing import NamedTuple

from pydantic import BaseModel, model_validator

from medtest.defaults import DEFAULT_DELTA
from medtest.dist import critical_value, std_normal_sf
from medtest.models import MediationFit
from medtest.tests import adaptive_branch, sobel_se
from medtest.utils.constants import IntervalMethod


class Interval(NamedTuple):
    lo: float
    hi: float

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def half_width(self) -> float:
        return 0.5 * (self.hi - self.lo)

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi


class AdaptiveInterval(NamedTuple):
    interval: Interval
    adaptive_branch: bool


class IntervalPair(BaseModel):
    """
    Sobel and adaptive Sobel intervals for one mediator.

    Attributes:
        point: Point estimate α̂β̂.
        sobel_lo: Lower end of the Sobel interval.
        sobel_hi: Upper end of the Sobel interval.
        asobel_lo: Lower end of the adaptive Sobel interval.
        asobel_hi: Upper end of the adaptive Sobel interval.
        se_product: Delta-method standard error σ̂_αβ.
        adaptive_branch: True when the N(0, 1/4) reference was used.
        level: Nominal coverage 1 - δ.
        degenerate: True when α̂ = β̂ = 0, giving zero-width intervals at 0.
        mediator_index: 1-based mediator position.
    """

    point: float
    sobel_lo: float
    sobel_hi: float
    asobel_lo: float
    asobel_hi: float
    se_product: float
    adaptive_branch: bool
    level: float
    degenerate: bool = False
    mediator_index: int = 1

    @model_validator(mode="after")
    def _check_nesting(self) -> IntervalPair:
        if not self.sobel_lo <= self.point <= self.sobel_hi:
            raise ValueError("point estimate must lie inside the Sobel interval")
        if not self.sobel_lo <= self.asobel_lo <= self.asobel_hi <= self.sobel_hi:
            raise ValueError("adaptive interval must be nested in the Sobel interval")
        return self

    @property
    def sobel(self) -> Interval:
        return Interval(self.sobel_lo, self.sobel_hi)

    @property
    def asobel(self) -> Interval:
        return Interval(self.asobel_lo, self.asobel_hi)

    def interval(self, method: IntervalMethod) -> Interval:
        if IntervalMethod(method) == IntervalMethod.SOBEL:
            return self.sobel
        return self.asobel


def _around(point: float, half_width: float) -> Interval:
    return Interval(point - half_width, point + half_width)


def ci_sobel(fit: MediationFit, delta: float = DEFAULT_DELTA) -> Interval:
    """α̂β̂ ± z_{1-δ/2}·σ̂_αβ."""
    return _around(fit.alpha_hat * fit.beta_hat, critical_value(delta) * sobel_se(fit))


def ci_asobel(fit: MediationFit, delta: float = DEFAULT_DELTA) -> AdaptiveInterval:
    """The Sobel interval, halved in width when T_max < λ_n."""
    branch = adaptive_branch(fit)
    z = critical_value(delta)
    if branch:
        z *= 0.5
    interval = _around(fit.alpha_hat * fit.beta_hat, z * sobel_se(fit))
    return AdaptiveInterval(interval, branch)


def interval_pair(fit: MediationFit, delta: float = DEFAULT_DELTA) -> IntervalPair:
    sobel = ci_sobel(fit, delta)
    asobel, branch = ci_asobel(fit, delta)
    return IntervalPair(
        point=fit.alpha_hat * fit.beta_hat,
        sobel_lo=sobel.lo,
        sobel_hi=sobel.hi,
        asobel_lo=asobel.lo,
        asobel_hi=asobel.hi,
        se_product=sobel_se(fit),
        adaptive_branch=branch,
        level=1.0 - delta,
        degenerate=fit.alpha_hat == 0.0 and fit.beta_hat == 0.0,
        mediator_index=fit.mediator_index,
    )


def sobel_coverage_h00(delta: float = DEFAULT_DELTA) -> float:
    """Limiting coverage 2Φ(2·z_{1-δ/2}) - 1 of the Sobel interval when α = β = 0."""
    return 1.0 - 2.0 * float(std_normal_sf(2.0 * critical_value(delta)))
