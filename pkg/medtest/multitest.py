"""Family-wise error rate control across several mediators.

Each mediator k is tested at the Bonferroni threshold δ/d, and the selected
set for a method is Ω̂ = {k : P^(k) < δ/d}.
"""

from __future__ import annotations

from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence

from pydantic import BaseModel, model_validator

from medtest.defaults import DEFAULT_DELTA
from medtest.errors import DomainError, EmptyFamilyError, HeterogeneousSampleSizeError
from medtest.models import MediationFit
from medtest.tests import TestReport, evaluate, lambda_threshold
from medtest.utils.constants import TestMethod


class MultiTestResult(BaseModel):
    """
    Per-mediator tests and Bonferroni selections for one dataset.

    Attributes:
        d: Number of mediators.
        n: Shared sample size.
        delta: Family-wise level.
        lambda_n: Threshold shared by all mediators.
        per_mediator: One report per mediator, in mediator order.
        rejected: Sorted 1-based indices selected by each method.
    """

    d: int
    n: int
    delta: float
    lambda_n: float
    per_mediator: List[TestReport]
    rejected: Dict[TestMethod, List[int]]

    @model_validator(mode="after")
    def _check_selection(self) -> MultiTestResult:
        if len(self.per_mediator) != self.d:
            raise ValueError("one report per mediator is required")
        for method in TestMethod:
            expected = [
                r.mediator_index
                for r in self.per_mediator
                if r.rejects(method, self.threshold)
            ]
            if sorted(self.rejected.get(method, [])) != sorted(expected):
                raise ValueError(f"{method} selection disagrees with its p-values")
        return self

    @property
    def threshold(self) -> float:
        return self.delta / self.d

    def rejected_set(self, method: TestMethod) -> FrozenSet[int]:
        return frozenset(self.rejected[TestMethod(method)])


class ErrorRates(NamedTuple):
    fwer: float
    power: Optional[float]


def test_all(
    fits: Sequence[MediationFit], delta: float = DEFAULT_DELTA
) -> MultiTestResult:
    """Run the four tests on every mediator at the threshold δ/d.

    Raises:
        EmptyFamilyError: if `fits` is empty.
        HeterogeneousSampleSizeError: if the fits disagree on n.
    """
    if not fits:
        raise EmptyFamilyError()
    sizes = {fit.n for fit in fits}
    if len(sizes) > 1:
        raise HeterogeneousSampleSizeError([fit.n for fit in fits])
    if not 0.0 < delta < 1.0:
        raise DomainError(f"Level must lie in (0, 1), got {delta}")
    n = fits[0].n
    d = len(fits)
    lambda_n = lambda_threshold(n)
    reports = [evaluate(fit, lambda_n) for fit in fits]
    threshold = delta / d
    rejected = {
        method: [r.mediator_index for r in reports if r.rejects(method, threshold)]
        for method in TestMethod
    }
    return MultiTestResult(
        d=d,
        n=n,
        delta=delta,
        lambda_n=lambda_n,
        per_mediator=reports,
        rejected=rejected,
    )


def fwer_and_power(
    truth: Iterable[int], results: Sequence[MultiTestResult]
) -> Dict[TestMethod, ErrorRates]:
    """Empirical FWER and average per-signal power over replications.

    FWER is the fraction of replications that select at least one index
    outside `truth`. Power is |Ω̂ ∩ Ω| / |Ω| averaged over replications; it is
    `None` when `truth` is empty.
    """
    if not results:
        raise DomainError("At least one replication is required")
    omega = frozenset(truth)
    d = results[0].d
    if any(k < 1 or k > d for k in omega):
        raise DomainError(f"Truth set {sorted(omega)} is not a subset of 1..{d}")
    rates = {}
    for method in TestMethod:
        false_hits = 0
        detected = 0
        for result in results:
            selected = result.rejected_set(method)
            false_hits += bool(selected - omega)
            detected += len(selected & omega)
        power = detected / (len(omega) * len(results)) if omega else None
        rates[method] = ErrorRates(false_hits / len(results), power)
    return rates
