"""Monte Carlo studies of the mediation tests and intervals.

Data follow the simulation designs of the three outcome families:

* mediators M = c_k + Xαᵀ + E with X ~ N(0, 1) and rows of E ~ N(0, Σ_ρ);
* linear outcome Y = c + γX + Mβ + ε;
* logistic outcome Y ~ Bernoulli(expit(γX + Mβ)), without intercept;
* Cox outcome with unit baseline hazard, T ~ Exp(exp(γX + Mβ)) and
  independent censoring C ~ U(0, c₀).

Replication r draws from `RngStream(base_seed, r)`, so a study is a pure
function of its scenario whatever the number of worker threads.
"""

from __future__ import annotations

import functools
import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import (
    Any,
    Callable,
    Dict,
    Iterable,
    List,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    TypeVar,
)

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, Field, model_validator
from scipy import optimize, stats
from scipy.special import expit

from medtest.configuration import InvalidConfiguration, ScenarioConfig, SimulationPlan
from medtest.defaults import (
    CALIBRATION_STREAM_ID,
    CENSOR_BRACKET,
    CENSOR_TOLERANCE,
    DEFAULT_PILOT_N,
    FAILURE_FLAG_RATE,
    FitterSettings,
)
from medtest.dist import (
    CovMatrix,
    FloatArray,
    RngStream,
    cholesky,
    sample_exponential,
    sample_mvn,
    sample_uniform,
)
from medtest.errors import (
    CalibrationError,
    DataError,
    DomainError,
    FitFailureWarning,
    ModelFitError,
    NumericalError,
    PValueRangeError,
)
from medtest.intervals import IntervalPair, interval_pair
from medtest.models import Dataset, MediationFit, fit_mediation
from medtest.multitest import MultiTestResult, fwer_and_power, test_all
from medtest.tests import (
    TestReport,
    evaluate,
    lambda_threshold,
    theoretical_power_ajs,
    theoretical_power_js,
)
from medtest.utils.constants import (
    IntervalMethod,
    Metric,
    OutcomeFamily,
    StudyKind,
    TestMethod,
)

logger = logging.getLogger(__name__)

R = TypeVar("R")

P_VALUE_SERIES = {
    TestMethod.SOBEL: "p_sobel",
    TestMethod.JS: "p_js",
    TestMethod.ASOBEL: "p_asobel",
    TestMethod.AJS: "p_ajs",
}


class MetricEstimate(BaseModel):
    """
    One Monte Carlo estimate of a table cell.

    Attributes:
        metric: size, power, fwer, cp or lci.
        method: Test or interval method the estimate belongs to.
        value: Estimated rate, or mean interval length for lci.
        standard_error: Monte Carlo standard error of `value`.
        mediator_index: 1-based mediator for per-mediator metrics (cp, lci).
    """

    metric: Metric
    method: str
    value: float
    standard_error: float = Field(ge=0.0)
    mediator_index: Optional[int] = None

    @model_validator(mode="after")
    def _check_range(self) -> MetricEstimate:
        if self.metric == Metric.LCI:
            if not self.value >= 0.0:
                raise ValueError(
                    f"interval length must be non-negative, got {self.value}"
                )
        elif not 0.0 <= self.value <= 1.0:
            raise ValueError(
                f"{self.metric} estimate must lie in [0, 1], got {self.value}"
            )
        return self


class SimulationSummary(BaseModel):
    """
    Result of one Monte Carlo study on one scenario.

    Attributes:
        scenario: The scenario as a configuration dictionary, c₀ included.
        study: Study driver that produced the summary.
        label: Row label.
        reps: Replications requested.
        reps_used: Replications whose fits all succeeded.
        failures: Replications dropped after a fitter failure.
        flagged: True when failures exceed 1% of the replications.
        elapsed: Wall-clock seconds, excluded from table output.
        estimates: Table cells with their standard errors.
        diagnostics: Extra scalar outputs (plug-in theoretical powers,
            censoring rate, threshold).
        statistics: Per-replication series, kept on request.
    """

    scenario: Dict[str, Any]
    study: StudyKind
    label: str
    reps: int
    reps_used: int
    failures: int
    flagged: bool
    elapsed: float
    estimates: List[MetricEstimate]
    diagnostics: Dict[str, float] = Field(default_factory=dict)
    statistics: Optional[Dict[str, List[float]]] = None

    @model_validator(mode="after")
    def _check_counts(self) -> SimulationSummary:
        if self.reps_used + self.failures != self.reps:
            raise ValueError("reps_used and failures must add up to reps")
        return self

    def estimate(
        self, metric: Metric, method: str, mediator_index: Optional[int] = None
    ) -> MetricEstimate:
        for estimate in self.estimates:
            if (
                estimate.metric == metric
                and estimate.method == str(method)
                and estimate.mediator_index == mediator_index
            ):
                return estimate
        raise KeyError(f"No {metric} estimate for {method} (mediator {mediator_index})")


class _Replication(NamedTuple):
    fits: List[MediationFit]
    censoring_rate: Optional[float]


@functools.lru_cache(maxsize=32)
def _error_factor(d: int, rho: float) -> FloatArray:
    factor = cholesky(CovMatrix.ar1(d, rho))
    factor.setflags(write=False)
    return factor


def _linear_predictor(
    scenario: ScenarioConfig, rng: RngStream, n: int
) -> Tuple[FloatArray, FloatArray, FloatArray]:
    exposure = np.asarray(rng.standard_normal(n))
    factor = _error_factor(scenario.d, scenario.rho)
    errors = sample_mvn(np.zeros(scenario.d), factor, rng, n)
    mediators = (
        scenario.mediator_intercept + np.outer(exposure, scenario.alpha) + errors
    )
    eta = scenario.gamma * exposure + mediators @ np.asarray(scenario.beta)
    return exposure, mediators, eta


def generate(scenario: ScenarioConfig, rep: int) -> Dataset:
    """Draw replication `rep` of a scenario.

    Raises:
        InvalidConfiguration: for a Cox scenario without a calibrated c₀.
    """
    c0 = scenario.require_calibrated() if scenario.family == OutcomeFamily.COX else None
    rng = RngStream(scenario.base_seed, rep)
    n = scenario.n
    exposure, mediators, eta = _linear_predictor(scenario, rng, n)
    if scenario.family == OutcomeFamily.LINEAR:
        outcome = scenario.outcome_intercept + eta + np.asarray(rng.standard_normal(n))
        return Dataset(exposure=exposure, mediators=mediators, outcome=outcome)
    if scenario.family == OutcomeFamily.LOGISTIC:
        outcome = (np.asarray(rng.uniform(n)) < expit(eta)).astype(np.float64)
        return Dataset(exposure=exposure, mediators=mediators, outcome=outcome)
    event_time = np.asarray(sample_exponential(np.exp(eta), rng))
    censor_time = np.asarray(sample_uniform(0.0, float(c0), rng, n))
    return Dataset(
        exposure=exposure,
        mediators=mediators,
        time=np.minimum(event_time, censor_time),
        event=(event_time <= censor_time).astype(np.float64),
    )


def _pilot_censoring_rate(event_time: FloatArray, c0: float) -> float:
    # P(C < T) for C ~ U(0, c0) is E[min(T, c0)] / c0
    return float(np.mean(np.minimum(event_time, c0)) / c0)


def calibrate_censoring(
    scenario: ScenarioConfig, pilot_n: int = DEFAULT_PILOT_N
) -> float:
    """Find c₀ such that C ~ U(0, c₀) censors `censor_target` of the sample.

    A pilot sample of event times is drawn once from the reserved calibration
    stream and the censoring rate, decreasing in c₀, is solved for by
    bisection on log c₀ over the bracket (10⁻³, 10³).

    Raises:
        InvalidConfiguration: for a non-Cox scenario.
        DomainError: if `pilot_n` is below 10⁵.
        CalibrationError: if the target cannot be met inside the bracket.
    """
    if scenario.family != OutcomeFamily.COX:
        raise InvalidConfiguration(
            f"family: censoring calibration needs the cox family, not {scenario.family}"
        )
    if pilot_n < DEFAULT_PILOT_N:
        raise DomainError(f"pilot_n must be at least {DEFAULT_PILOT_N}, got {pilot_n}")
    rng = RngStream(scenario.base_seed, CALIBRATION_STREAM_ID)
    _, _, eta = _linear_predictor(scenario, rng, pilot_n)
    event_time = np.asarray(sample_exponential(np.exp(eta), rng))
    target = scenario.censor_target

    def excess(log_c0: float) -> float:
        return _pilot_censoring_rate(event_time, math.exp(log_c0)) - target

    lo, hi = (math.log(bound) for bound in CENSOR_BRACKET)
    try:
        log_c0 = optimize.bisect(excess, lo, hi, xtol=1e-12)
    except ValueError as e:
        raise CalibrationError(target, CENSOR_BRACKET) from e
    c0 = math.exp(log_c0)
    achieved = _pilot_censoring_rate(event_time, c0)
    if abs(achieved - target) > CENSOR_TOLERANCE:
        raise CalibrationError(target, CENSOR_BRACKET)
    logger.info(
        "Calibrated censoring for %s: c0=%.6g gives rate %.4f (target %.2f)",
        scenario.name,
        c0,
        achieved,
        target,
    )
    return c0


def ensure_calibrated(
    scenario: ScenarioConfig, pilot_n: int = DEFAULT_PILOT_N
) -> ScenarioConfig:
    """Return the scenario with c₀ filled in when it is a Cox scenario."""
    if scenario.family != OutcomeFamily.COX or scenario.censor_c0 is not None:
        return scenario
    return scenario.with_overrides(censor_c0=calibrate_censoring(scenario, pilot_n))


def _replicate(
    scenario: ScenarioConfig, rep: int, settings: Optional[FitterSettings]
) -> Optional[_Replication]:
    try:
        data = generate(scenario, rep)
        fits = fit_mediation(data, scenario.family, settings)
    except (ModelFitError, DataError, DomainError) as e:
        logger.debug("Replication %d of %s dropped: %s", rep, scenario.name, e)
        return None
    censoring = None if data.event is None else float(1.0 - np.mean(data.event))
    return _Replication(fits, censoring)


def _run_replications(
    scenario: ScenarioConfig,
    analyse: Callable[[List[MediationFit]], R],
    workers: int,
    settings: Optional[FitterSettings],
) -> Tuple[List[R], List[float], int]:
    if not isinstance(workers, int) or workers < 1:
        raise DomainError(f"workers must be a positive integer, got {workers}")

    def one(rep: int) -> Optional[Tuple[R, Optional[float]]]:
        replication = _replicate(scenario, rep, settings)
        if replication is None:
            return None
        return analyse(replication.fits), replication.censoring_rate

    reps = range(scenario.reps)
    if workers == 1:
        outcomes = list(map(one, reps))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, reps))
    kept = [outcome for outcome in outcomes if outcome is not None]
    failures = len(outcomes) - len(kept)
    if not kept:
        raise NumericalError(
            f"All {scenario.reps} replications of {scenario.name} failed to fit"
        )
    censoring = [rate for _, rate in kept if rate is not None]
    return [result for result, _ in kept], censoring, failures


def _binomial_se(p: float, m: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / m)


def _flag(scenario: ScenarioConfig, failures: int) -> bool:
    flagged = failures > FAILURE_FLAG_RATE * scenario.reps
    if failures:
        logger.info(
            "%d of %d replications of %s failed",
            failures,
            scenario.reps,
            scenario.name,
        )
    if flagged:
        warnings.warn(
            f"{failures} of {scenario.reps} replications of {scenario.name} failed "
            f"to fit (more than {FAILURE_FLAG_RATE:.0%})",
            FitFailureWarning,
            stacklevel=3,
        )
    return flagged


def _summary(
    scenario: ScenarioConfig,
    study: StudyKind,
    reps_used: int,
    failures: int,
    started: float,
    estimates: List[MetricEstimate],
    diagnostics: Dict[str, float],
    censoring: Sequence[float],
    statistics: Optional[Dict[str, List[float]]] = None,
) -> SimulationSummary:
    if censoring:
        diagnostics["censoring_rate"] = float(np.mean(censoring))
    elapsed = time.perf_counter() - started
    logger.info("Finished %s study for %s in %.1fs", study, scenario.name, elapsed)
    return SimulationSummary(
        scenario=scenario.to_dict(),
        study=study,
        label=scenario.name,
        reps=scenario.reps,
        reps_used=reps_used,
        failures=failures,
        flagged=_flag(scenario, failures),
        elapsed=elapsed,
        estimates=estimates,
        diagnostics=diagnostics,
        statistics=statistics,
    )


def _start(scenario: ScenarioConfig, study: StudyKind, workers: int) -> float:
    logger.info(
        "Running %s study for %s (%d reps, %d workers)",
        study,
        scenario.name,
        scenario.reps,
        workers,
    )
    return time.perf_counter()


def run_size_power(
    scenario: ScenarioConfig,
    workers: int = 1,
    keep_statistics: bool = False,
    settings: Optional[FitterSettings] = None,
) -> SimulationSummary:
    """Empirical size or power of the four tests for one mediator.

    The metric is size when αβ = 0 and power otherwise. Diagnostics carry the
    Monte Carlo means of T_α and T_β, the frequency of T_max ≥ λ_n and the
    plug-in theoretical JS and AJS powers built from them.
    """
    if scenario.d != 1:
        raise InvalidConfiguration(
            f"alpha: size/power studies take one mediator, got {scenario.d}"
        )
    scenario = ensure_calibrated(scenario)
    started = _start(scenario, StudyKind.SIZE_POWER, workers)
    reports, censoring, failures = _run_replications(
        scenario, lambda fits: evaluate(fits[0]), workers, settings
    )
    m = len(reports)
    metric = Metric.SIZE if scenario.is_null else Metric.POWER
    estimates = []
    for method in TestMethod:
        rate = sum(r.rejects(method, scenario.delta) for r in reports) / m
        estimates.append(
            MetricEstimate(
                metric=metric,
                method=str(method),
                value=rate,
                standard_error=_binomial_se(rate, m),
            )
        )
    lambda_n = lambda_threshold(scenario.n)
    mu_alpha = float(np.mean([r.t_alpha for r in reports]))
    mu_beta = float(np.mean([r.t_beta for r in reports]))
    prob_tmax_ge = sum(not r.adaptive_branch for r in reports) / m
    diagnostics = {
        "lambda_n": lambda_n,
        "mu_alpha": mu_alpha,
        "mu_beta": mu_beta,
        "prob_tmax_ge": prob_tmax_ge,
        "theoretical_power_js": theoretical_power_js(mu_alpha, mu_beta, scenario.delta),
        "theoretical_power_ajs": theoretical_power_ajs(
            mu_alpha, mu_beta, scenario.delta, prob_tmax_ge
        ),
    }
    statistics = _statistics(reports) if keep_statistics else None
    return _summary(
        scenario,
        StudyKind.SIZE_POWER,
        m,
        failures,
        started,
        estimates,
        diagnostics,
        censoring,
        statistics,
    )


def _statistics(reports: Sequence[TestReport]) -> Dict[str, List[float]]:
    series = {"t_max": [r.t_max for r in reports]}
    for method, name in P_VALUE_SERIES.items():
        series[name] = [r.p_value(method) for r in reports]
    return series


def run_fwer(
    scenario: ScenarioConfig,
    workers: int = 1,
    settings: Optional[FitterSettings] = None,
) -> SimulationSummary:
    """Empirical FWER and power of Bonferroni selection over d ≥ 2 mediators."""
    if scenario.d < 2:
        raise InvalidConfiguration(
            f"alpha: FWER studies take at least two mediators, got {scenario.d}"
        )
    scenario = ensure_calibrated(scenario)
    started = _start(scenario, StudyKind.FWER, workers)

    def analyse(fits: List[MediationFit]) -> MultiTestResult:
        return test_all(fits, scenario.delta)

    results, censoring, failures = _run_replications(
        scenario, analyse, workers, settings
    )
    m = len(results)
    rates = fwer_and_power(scenario.truth_set, results)
    estimates = []
    for method, rate in rates.items():
        estimates.append(
            MetricEstimate(
                metric=Metric.FWER,
                method=str(method),
                value=rate.fwer,
                standard_error=_binomial_se(rate.fwer, m),
            )
        )
        if rate.power is not None:
            estimates.append(
                MetricEstimate(
                    metric=Metric.POWER,
                    method=str(method),
                    value=rate.power,
                    standard_error=_binomial_se(rate.power, m),
                )
            )
    diagnostics = {
        "lambda_n": lambda_threshold(scenario.n),
        "threshold": scenario.delta / scenario.d,
        "true_mediators": float(len(scenario.truth_set)),
    }
    return _summary(
        scenario,
        StudyKind.FWER,
        m,
        failures,
        started,
        estimates,
        diagnostics,
        censoring,
    )


def run_coverage(
    scenario: ScenarioConfig,
    workers: int = 1,
    settings: Optional[FitterSettings] = None,
) -> SimulationSummary:
    """Coverage probability and mean length of both intervals, per mediator.

    Pairs with α̂ = β̂ = 0 have zero-width intervals and are left out of the
    averages of their mediator; their count is reported in the diagnostics.
    """
    scenario = ensure_calibrated(scenario)
    started = _start(scenario, StudyKind.COVERAGE, workers)

    def analyse(fits: List[MediationFit]) -> List[IntervalPair]:
        return [interval_pair(fit, scenario.delta) for fit in fits]

    pairs, censoring, failures = _run_replications(scenario, analyse, workers, settings)
    estimates = []
    diagnostics: Dict[str, float] = {}
    for k, effect in enumerate(scenario.effects):
        usable = [rep[k] for rep in pairs if not rep[k].degenerate]
        excluded = len(pairs) - len(usable)
        if excluded:
            diagnostics[f"degenerate_{k + 1}"] = float(excluded)
        if not usable:
            logger.warning("Every interval of mediator %d is degenerate", k + 1)
            continue
        m = len(usable)
        for method in IntervalMethod:
            intervals = [pair.interval(method) for pair in usable]
            cp = sum(interval.contains(effect) for interval in intervals) / m
            widths = np.array([interval.width for interval in intervals])
            estimates.append(
                MetricEstimate(
                    metric=Metric.CP,
                    method=str(method),
                    value=cp,
                    standard_error=_binomial_se(cp, m),
                    mediator_index=k + 1,
                )
            )
            estimates.append(
                MetricEstimate(
                    metric=Metric.LCI,
                    method=str(method),
                    value=float(np.mean(widths)),
                    standard_error=(
                        float(np.std(widths, ddof=1) / math.sqrt(m)) if m > 1 else 0.0
                    ),
                    mediator_index=k + 1,
                )
            )
    return _summary(
        scenario,
        StudyKind.COVERAGE,
        len(pairs),
        failures,
        started,
        estimates,
        diagnostics,
        censoring,
    )


def run_plan(
    plan: SimulationPlan,
    workers: int = 1,
    settings: Optional[FitterSettings] = None,
    keep_statistics: bool = False,
) -> List[SimulationSummary]:
    """Run every scenario of a plan with the driver of its study kind."""
    summaries = []
    for scenario in plan.scenarios:
        if plan.study == StudyKind.SIZE_POWER:
            summaries.append(
                run_size_power(scenario, workers, keep_statistics, settings)
            )
        elif plan.study == StudyKind.FWER:
            summaries.append(run_fwer(scenario, workers, settings))
        else:
            summaries.append(run_coverage(scenario, workers, settings))
    return summaries


def summary_rows(summaries: Iterable[SimulationSummary]) -> pd.DataFrame:
    """Flatten summaries into the table layout.

    There is one row per (scenario, metric, mediator) and one column per
    method, each followed by its `<method>_se` column. Elapsed times are left
    out so that the table only depends on the scenarios.
    """
    rows: Dict[Tuple[str, str, Optional[int]], Dict[str, Any]] = {}
    for summary in summaries:
        alpha = summary.scenario["alpha"]
        beta = summary.scenario["beta"]
        for estimate in summary.estimates:
            key = (summary.label, str(estimate.metric), estimate.mediator_index)
            if key not in rows:
                k = estimate.mediator_index
                if k is None and len(alpha) == 1:
                    k = 1
                rows[key] = {
                    "scenario": summary.label,
                    "family": summary.scenario["family"],
                    "n": summary.scenario["n"],
                    "d": len(alpha),
                    "mediator": estimate.mediator_index,
                    "alpha": alpha[k - 1] if k is not None else None,
                    "beta": beta[k - 1] if k is not None else None,
                    "reps": summary.reps,
                    "reps_used": summary.reps_used,
                    "seed": summary.scenario["base_seed"],
                    "flagged": summary.flagged,
                    "metric": str(estimate.metric),
                }
            rows[key][estimate.method] = estimate.value
            rows[key][f"{estimate.method}_se"] = estimate.standard_error
    return pd.DataFrame(list(rows.values()))


def _pvalue_array(pvalues: ArrayLike) -> FloatArray:
    p = np.asarray(pvalues, dtype=np.float64).ravel()
    if p.size == 0:
        raise DomainError("At least one p-value is required")
    for row, value in enumerate(p):
        if not 0.0 <= value <= 1.0:
            raise PValueRangeError(row + 1, float(value))
    return p


def qq_data(pvalues: ArrayLike) -> List[Tuple[float, float]]:
    """Pairs ((i - 0.5)/m, p_(i)) of uniform plotting positions and sorted p-values.

    Raises:
        PValueRangeError: naming the first 1-based row outside [0, 1].
    """
    p = np.sort(_pvalue_array(pvalues))
    m = p.size
    positions = (np.arange(1, m + 1) - 0.5) / m
    return [(float(u), float(v)) for u, v in zip(positions, p)]


def histogram_data(
    pvalues: ArrayLike, bins: int = 20
) -> Tuple[FloatArray, NDArray[np.int64]]:
    """Bin edges and counts of p-values over [0, 1]."""
    if bins < 1:
        raise DomainError(f"bins must be positive, got {bins}")
    counts, edges = np.histogram(_pvalue_array(pvalues), bins=bins, range=(0.0, 1.0))
    return edges, counts.astype(np.int64)


def ks_uniform(pvalues: ArrayLike) -> float:
    """Kolmogorov-Smirnov distance between the p-values and U(0, 1)."""
    return float(stats.kstest(_pvalue_array(pvalues), "uniform").statistic)
