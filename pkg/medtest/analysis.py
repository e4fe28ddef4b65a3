from __future__ import annotations

import logging
from typing import List, Optional, Union

import pandas as pd
from pydantic import BaseModel, model_validator

from medtest.defaults import DEFAULT_DELTA, FitterSettings
from medtest.errors import DomainError
from medtest.intervals import IntervalPair, interval_pair
from medtest.models import Dataset, MediationFit, fit_mediation
from medtest.multitest import MultiTestResult, test_all
from medtest.utils.constants import OutcomeFamily, TestMethod

logger = logging.getLogger(__name__)


class MediatorReport(BaseModel):
    """
    One row of a mediation analysis report.

    Attributes:
        mediator_index: 1-based mediator position.
        name: Mediator column name.
        alpha_hat: Exposure effect on the mediator, with se_alpha.
        beta_hat: Mediator effect on the outcome, with se_beta.
        p_sobel: Sobel p-value.
        p_asobel: Adaptive Sobel p-value.
        p_js: Joint significance p-value.
        p_ajs: Adaptive joint significance p-value.
        sobel_lo, sobel_hi: Sobel interval for αβ at level 1 - δ.
        asobel_lo, asobel_hi: Adaptive Sobel interval for αβ at level 1 - δ.
        adaptive_branch: True when T_max < λ_n.
        reject_sobel, reject_js, reject_asobel, reject_ajs: Bonferroni verdicts
            at δ/d.
    """

    mediator_index: int
    name: str
    alpha_hat: float
    se_alpha: float
    beta_hat: float
    se_beta: float
    p_sobel: float
    p_asobel: float
    p_js: float
    p_ajs: float
    sobel_lo: float
    sobel_hi: float
    asobel_lo: float
    asobel_hi: float
    adaptive_branch: bool
    reject_sobel: bool
    reject_js: bool
    reject_asobel: bool
    reject_ajs: bool

    @model_validator(mode="after")
    def _check_dominance(self) -> MediatorReport:
        if self.p_ajs > self.p_js or self.p_asobel > self.p_sobel:
            raise ValueError("adaptive p-values must not exceed their base p-values")
        return self


class AnalysisReport(BaseModel):
    """
    Report of a mediation analysis, one row per mediator.

    Attributes:
        family: Outcome family of the joint model.
        n: Rows used in the fits.
        rows_dropped: Rows removed before fitting for missing or non-numeric cells.
        delta: Level of the tests and intervals.
        threshold: Bonferroni threshold δ/d.
        lambda_n: Threshold √n / ln n.
        mediators: Mediator rows, in column order.
    """

    family: OutcomeFamily
    n: int
    rows_dropped: int = 0
    delta: float
    threshold: float
    lambda_n: float
    mediators: List[MediatorReport]

    @property
    def d(self) -> int:
        return len(self.mediators)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.model_dump() for row in self.mediators])


class MediationAnalysis:
    def __init__(
        self,
        family: Union[OutcomeFamily, str],
        delta: float = DEFAULT_DELTA,
        settings: Optional[FitterSettings] = None,
    ):
        """
        This class runs the full workflow on one dataset: fit the mediator and
        outcome models, test every mediator at the Bonferroni threshold and
        build both confidence intervals.

        Args:
            family: Outcome family, linear, logistic or cox.
            delta: Family-wise level of the tests and level of each interval.
            settings: Tolerances and iteration caps of the Newton fitters.
        """
        if not 0.0 < delta < 1.0:
            raise DomainError(f"Level must lie in (0, 1), got {delta}")
        self.family = OutcomeFamily.parse(family)
        self.delta = delta
        self.settings = settings

    def fit(self, dataset: Dataset) -> List[MediationFit]:
        fits = fit_mediation(dataset, self.family, self.settings)
        logger.info("Fitted %d mediators on n=%d rows", len(fits), dataset.n)
        return fits

    def test(self, fits: List[MediationFit]) -> MultiTestResult:
        return test_all(fits, self.delta)

    def intervals(self, fits: List[MediationFit]) -> List[IntervalPair]:
        return [interval_pair(fit, self.delta) for fit in fits]

    def report(self, dataset: Dataset, rows_dropped: int = 0) -> AnalysisReport:
        fits = self.fit(dataset)
        tests = self.test(fits)
        names = dataset.mediator_names or [f"M{k}" for k in range(1, dataset.d + 1)]
        rows = []
        pairs = self.intervals(fits)
        for fit, test, pair, name in zip(fits, tests.per_mediator, pairs, names):
            k = fit.mediator_index
            rows.append(
                MediatorReport(
                    mediator_index=k,
                    name=name,
                    alpha_hat=fit.alpha_hat,
                    se_alpha=fit.se_alpha,
                    beta_hat=fit.beta_hat,
                    se_beta=fit.se_beta,
                    p_sobel=test.p_sobel,
                    p_asobel=test.p_asobel,
                    p_js=test.p_js,
                    p_ajs=test.p_ajs,
                    sobel_lo=pair.sobel_lo,
                    sobel_hi=pair.sobel_hi,
                    asobel_lo=pair.asobel_lo,
                    asobel_hi=pair.asobel_hi,
                    adaptive_branch=test.adaptive_branch,
                    reject_sobel=k in tests.rejected_set(TestMethod.SOBEL),
                    reject_js=k in tests.rejected_set(TestMethod.JS),
                    reject_asobel=k in tests.rejected_set(TestMethod.ASOBEL),
                    reject_ajs=k in tests.rejected_set(TestMethod.AJS),
                )
            )
        return AnalysisReport(
            family=self.family,
            n=dataset.n,
            rows_dropped=rows_dropped,
            delta=self.delta,
            threshold=tests.threshold,
            lambda_n=tests.lambda_n,
            mediators=rows,
        )
