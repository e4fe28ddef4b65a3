"""Regression fitters for the mediator and outcome models.

The mediator model is always linear (OLS). The outcome model is linear,
logistic (Newton/IRLS) or Cox proportional hazards (Newton on the Breslow
partial likelihood). `fit_mediation` wires them into per-mediator
(α̂, σ̂_α, β̂, σ̂_β) quadruples.
"""

from __future__ import annotations

import logging
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular
from scipy.special import expit

from medtest.defaults import (
    INFINITE_STEP_RTOL,
    PERFECT_FIT_RTOL,
    SINGULAR_RCOND,
    FitterSettings,
)
from medtest.dist import FloatArray
from medtest.errors import (
    ConvergenceError,
    DegenerateFitError,
    DimensionError,
    DivergenceError,
    InsufficientDataError,
    InvalidDatasetError,
    MediatorFitError,
    ModelFitError,
    SeparationError,
    SingularDesignError,
)
from medtest.utils.constants import OutcomeFamily

logger = logging.getLogger(__name__)

_Objective = Callable[[FloatArray], Tuple[float, FloatArray, FloatArray]]


def _vector(values: ArrayLike, name: str) -> FloatArray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be a vector, got shape {arr.shape}")
    return arr


def _matrix(values: ArrayLike, name: str) -> FloatArray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a matrix, got shape {arr.shape}")
    return arr


class Dataset(BaseModel):
    """
    Observed data for a mediation analysis.

    Attributes:
        exposure: Exposure X, length n.
        mediators: Mediator matrix M, n x d.
        covariates: Covariate matrix Z, n x q with q >= 0.
        outcome: Continuous or binary outcome Y, for the linear and logistic families.
        time: Observed survival times min(T, C), for the Cox family.
        event: Event indicators 1{T <= C}, for the Cox family.
        mediator_names: Optional display names for the mediator columns.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    exposure: FloatArray
    mediators: FloatArray
    covariates: Optional[FloatArray] = None
    outcome: Optional[FloatArray] = None
    time: Optional[FloatArray] = None
    event: Optional[FloatArray] = None
    mediator_names: Optional[List[str]] = None

    @field_validator("exposure", "outcome", "time", "event", mode="before")
    @classmethod
    def _as_vector(cls, value: Optional[ArrayLike]) -> Optional[FloatArray]:
        if value is None:
            return None
        return _vector(value, "Dataset column")

    @field_validator("mediators", "covariates", mode="before")
    @classmethod
    def _as_matrix(cls, value: Optional[ArrayLike]) -> Optional[FloatArray]:
        if value is None:
            return None
        return _matrix(value, "Dataset block")

    @model_validator(mode="after")
    def _check_invariants(self) -> Dataset:
        n = self.exposure.shape[0]
        if self.covariates is None:
            self.covariates = np.empty((n, 0))
        blocks = {
            "mediators": self.mediators,
            "covariates": self.covariates,
            "outcome": self.outcome,
            "time": self.time,
            "event": self.event,
        }
        for name, block in blocks.items():
            if block is None:
                continue
            if block.shape[0] != n:
                raise InvalidDatasetError(
                    f"{name} has {block.shape[0]} rows, expected n={n}"
                )
            if not np.all(np.isfinite(block)):
                raise InvalidDatasetError(f"{name} has non-finite entries")
        if not np.all(np.isfinite(self.exposure)):
            raise InvalidDatasetError("exposure has non-finite entries")
        if self.mediators.shape[1] < 1:
            raise InvalidDatasetError("At least one mediator column is required")
        survival = self.time is not None or self.event is not None
        if survival and (self.time is None or self.event is None):
            raise InvalidDatasetError("Survival data needs both time and event")
        if survival and self.outcome is not None:
            raise InvalidDatasetError("Give either outcome or (time, event), not both")
        if not survival and self.outcome is None:
            raise InvalidDatasetError("Dataset has no outcome")
        if self.time is not None and np.any(self.time <= 0.0):
            raise InvalidDatasetError("Survival times must be strictly positive")
        if self.event is not None:
            if not np.all(np.isin(self.event, (0.0, 1.0))):
                raise InvalidDatasetError("Event indicators must be 0 or 1")
            if not np.any(self.event == 1.0):
                raise InvalidDatasetError("Survival data has no events")
        if self.mediator_names is not None and len(self.mediator_names) != self.d:
            raise InvalidDatasetError(
                f"Got {len(self.mediator_names)} mediator names for {self.d} mediators"
            )
        return self

    @property
    def n(self) -> int:
        return int(self.exposure.shape[0])

    @property
    def d(self) -> int:
        return int(self.mediators.shape[1])

    @property
    def q(self) -> int:
        return 0 if self.covariates is None else int(self.covariates.shape[1])

    @property
    def is_survival(self) -> bool:
        return self.time is not None


class FitResult(BaseModel):
    """
    Coefficients and standard errors of one regression fit.

    Attributes:
        coefficients: Estimated coefficients, in design column order.
        standard_errors: Standard errors of the coefficients.
        converged: Whether the fitter reached its tolerance.
        iterations: Newton iterations used; 0 for OLS.
        loglik: Maximised (partial) log-likelihood; 0 for OLS.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    coefficients: FloatArray
    standard_errors: FloatArray
    converged: bool
    iterations: int
    loglik: float

    @model_validator(mode="after")
    def _check_lengths(self) -> FitResult:
        if self.coefficients.shape != self.standard_errors.shape:
            raise ValueError("coefficients and standard_errors differ in length")
        if np.isnan(self.loglik):
            raise ValueError("loglik is NaN")
        return self


class MediationFit(BaseModel):
    """
    Per-mediator estimates consumed by every test and interval.

    Attributes:
        alpha_hat: Exposure coefficient in the mediator model.
        se_alpha: Standard error of alpha_hat.
        beta_hat: Mediator coefficient in the joint outcome model.
        se_beta: Standard error of beta_hat.
        n: Sample size.
        mediator_index: 1-based position of the mediator.
    """

    model_config = ConfigDict(frozen=True)

    alpha_hat: float
    se_alpha: float
    beta_hat: float
    se_beta: float
    n: int
    mediator_index: int = 1

    @field_validator("alpha_hat", "beta_hat")
    @classmethod
    def _finite_estimate(cls, value: float) -> float:
        if not np.isfinite(value):
            raise ValueError("estimates must be finite")
        return value

    @field_validator("se_alpha", "se_beta")
    @classmethod
    def _positive_se(cls, value: float) -> float:
        if not (np.isfinite(value) and value > 0.0):
            raise ValueError("standard errors must be finite and positive")
        return value

    @field_validator("n")
    @classmethod
    def _sample_size(cls, value: int) -> int:
        if value < 3:
            raise ValueError(f"sample size must be at least 3, got {value}")
        return value

    @property
    def t_alpha(self) -> float:
        return self.alpha_hat / self.se_alpha

    @property
    def t_beta(self) -> float:
        return self.beta_hat / self.se_beta

    @property
    def t_max(self) -> float:
        return max(abs(self.t_alpha), abs(self.t_beta))


def _check_design(
    response: FloatArray, design: FloatArray, full_rank: bool = True
) -> None:
    n, p = design.shape
    if response.shape[0] != n:
        raise DimensionError(
            f"Response has length {response.shape[0]} but design has {n} rows"
        )
    if n <= p:
        raise InsufficientDataError(n, p)
    if not np.all(np.isfinite(design)) or not np.all(np.isfinite(response)):
        raise InvalidDatasetError("Fitter inputs must be finite")
    if full_rank:
        rank = int(np.linalg.matrix_rank(design))
        if rank < p:
            raise SingularDesignError(rank, p)


def fit_ols(response: ArrayLike, design: ArrayLike) -> FitResult:
    """Ordinary least squares through a QR factorisation.

    Standard errors are √(s² diag((XᵀX)⁻¹)) with s² = SSE / (n - p). A residual
    sum of squares at or below (1e-12·‖y‖)² is reported as an exact fit.

    Raises:
        InsufficientDataError: if n <= p.
        SingularDesignError: if the design is rank deficient.
    """
    y = _vector(response, "response")
    x = _matrix(design, "design")
    _check_design(y, x)
    n, p = x.shape
    q, r = np.linalg.qr(x)
    coefficients = solve_triangular(r, q.T @ y)
    residuals = y - x @ coefficients
    sse = float(residuals @ residuals)
    if sse <= (PERFECT_FIT_RTOL * float(np.linalg.norm(y))) ** 2:
        sse = 0.0
    r_inv = solve_triangular(r, np.eye(p))
    xtx_inv_diag = np.einsum("ij,ij->i", r_inv, r_inv)
    standard_errors = np.sqrt(sse / (n - p) * xtx_inv_diag)
    return FitResult(
        coefficients=coefficients,
        standard_errors=standard_errors,
        converged=True,
        iterations=0,
        loglik=0.0,
    )


def _factor_information(
    information: FloatArray, failure: Callable[[str], ModelFitError]
) -> Tuple[FloatArray, bool]:
    try:
        factor = cho_factor(information, lower=True)
    except LinAlgError:
        raise failure("information matrix is not positive definite") from None
    diag = np.diag(factor[0]) ** 2
    if diag.min() <= SINGULAR_RCOND * diag.max():
        raise failure("information matrix is near-singular")
    return factor


def _covariance_at_optimum(
    beta: FloatArray,
    score: FloatArray,
    information: FloatArray,
    failure: Callable[[str], ModelFitError],
) -> FloatArray:
    """Inverse information at a Newton optimum.

    A flat likelihood lets the score reach the tolerance while a coefficient
    is still running off to infinity; the Newton step that would follow is
    then of order one instead of vanishing.
    """
    factor = _factor_information(information, failure)
    covariance = cho_solve(factor, np.eye(beta.shape[0]))
    remaining = np.abs(covariance @ score)
    if np.any(remaining > INFINITE_STEP_RTOL * np.maximum(np.abs(beta), 1.0)):
        raise failure("likelihood is monotone, a coefficient is infinite")
    return covariance


def _newton_maximize(
    objective: _Objective,
    start: FloatArray,
    max_iter: int,
    settings: FitterSettings,
    failure: Callable[[str], ModelFitError],
) -> Tuple[FloatArray, float, FloatArray, FloatArray, int]:
    """Newton ascent with step-halving on likelihood decrease.

    Stops once the score sup-norm drops below the tolerance. Coefficients
    leaving the ±max_abs_coefficient box signal separation or divergence
    through `failure`.
    """
    beta = start
    loglik, score, information = objective(beta)
    iterations = 0
    while float(np.max(np.abs(score), initial=0.0)) >= settings.score_tolerance:
        if iterations >= max_iter:
            raise ConvergenceError(iterations, float(np.max(np.abs(score))))
        step = cho_solve(_factor_information(information, failure), score)
        scale = 1.0
        slack = 1e-12 * max(1.0, abs(loglik))
        for _ in range(settings.max_step_halvings):
            candidate = beta + scale * step
            c_loglik, c_score, c_information = objective(candidate)
            if np.isfinite(c_loglik) and c_loglik >= loglik - slack:
                break
            scale *= 0.5
        else:
            raise ConvergenceError(iterations, float(np.max(np.abs(score))))
        beta, loglik, score, information = candidate, c_loglik, c_score, c_information
        iterations += 1
        if float(np.max(np.abs(beta))) > settings.max_abs_coefficient:
            raise failure(
                f"coefficient magnitude exceeds {settings.max_abs_coefficient}"
            )
    logger.debug("Newton converged in %d iterations, loglik %.6f", iterations, loglik)
    return beta, loglik, score, information, iterations


def fit_logistic(
    response: ArrayLike, design: ArrayLike, settings: Optional[FitterSettings] = None
) -> FitResult:
    """Bernoulli maximum likelihood by Newton/IRLS.

    Raises:
        SeparationError: for a constant response, perfectly fitted
            probabilities, a coefficient beyond the configured bound or an
            infinite maximum likelihood estimate.
        ConvergenceError: if the score does not reach the tolerance.
    """
    settings = settings or FitterSettings()
    y = _vector(response, "response")
    x = _matrix(design, "design")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise InvalidDatasetError("Logistic response must be 0 or 1")
    _check_design(y, x)
    if y.min() == y.max():
        raise SeparationError("response is constant")

    def objective(beta: FloatArray) -> Tuple[float, FloatArray, FloatArray]:
        eta = x @ beta
        loglik = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
        mu = expit(eta)
        score = x.T @ (y - mu)
        information = (x * (mu * (1.0 - mu))[:, None]).T @ x
        return loglik, score, information

    beta, loglik, score, information, iterations = _newton_maximize(
        objective,
        np.zeros(x.shape[1]),
        settings.logistic_max_iter,
        settings,
        SeparationError,
    )
    if np.allclose(expit(x @ beta), y, rtol=0.0, atol=1e-6):
        raise SeparationError("fitted probabilities reproduce the response")
    covariance = _covariance_at_optimum(beta, score, information, SeparationError)
    return FitResult(
        coefficients=beta,
        standard_errors=np.sqrt(np.diag(covariance)),
        converged=True,
        iterations=iterations,
        loglik=loglik,
    )


def _reverse_cumsum(values: FloatArray) -> FloatArray:
    return np.cumsum(values[::-1], axis=0)[::-1]


def fit_cox(
    time: ArrayLike,
    event: ArrayLike,
    design: ArrayLike,
    settings: Optional[FitterSettings] = None,
) -> FitResult:
    """Cox proportional hazards by Newton on the Breslow partial likelihood.

    The model has no intercept. Tied event times share the full risk set.
    When the score vanishes at the start and the information is zero (for
    example a covariate that is identically 0), the coefficients stay at 0
    with infinite standard errors.

    Raises:
        DegenerateFitError: if there are no events.
        DivergenceError: if the partial likelihood is monotone, which shows
            as a coefficient beyond the configured bound or a Newton step
            that does not vanish at convergence.
        ConvergenceError: if the score does not reach the tolerance.
    """
    settings = settings or FitterSettings()
    t = _vector(time, "time")
    status = _vector(event, "event")
    x = _matrix(design, "design")
    _check_design(t, x, full_rank=False)
    if status.shape != t.shape:
        raise DimensionError("time and event differ in length")
    if np.any(t <= 0.0):
        raise InvalidDatasetError("Survival times must be strictly positive")
    if not np.all(np.isin(status, (0.0, 1.0))):
        raise InvalidDatasetError("Event indicators must be 0 or 1")
    if not np.any(status == 1.0):
        raise DegenerateFitError("no events")

    order = np.argsort(t, kind="stable")
    t_sorted, x_sorted = t[order], x[order]
    is_event = status[order] == 1.0
    # Everyone tied with an event time is still at risk at that time.
    risk_start = np.searchsorted(t_sorted, t_sorted, side="left")[is_event]
    x_events = x_sorted[is_event]
    outer = x_sorted[:, :, None] * x_sorted[:, None, :]

    def objective(beta: FloatArray) -> Tuple[float, FloatArray, FloatArray]:
        eta = x_sorted @ beta
        shift = float(eta.max())
        w = np.exp(eta - shift)
        s0 = _reverse_cumsum(w)[risk_start]
        s1 = _reverse_cumsum(w[:, None] * x_sorted)[risk_start]
        s2 = _reverse_cumsum(w[:, None, None] * outer)[risk_start]
        mean = s1 / s0[:, None]
        loglik = float(np.sum(eta[is_event] - shift - np.log(s0)))
        score = np.sum(x_events - mean, axis=0)
        information = np.sum(
            s2 / s0[:, None, None] - mean[:, :, None] * mean[:, None, :], axis=0
        )
        return loglik, score, information

    beta, loglik, score, information, iterations = _newton_maximize(
        objective,
        np.zeros(x.shape[1]),
        settings.cox_max_iter,
        settings,
        DivergenceError,
    )
    if iterations == 0 and not np.any(information):
        standard_errors = np.full(x.shape[1], np.inf)
    else:
        covariance = _covariance_at_optimum(beta, score, information, DivergenceError)
        standard_errors = np.sqrt(np.diag(covariance))
    return FitResult(
        coefficients=beta,
        standard_errors=standard_errors,
        converged=True,
        iterations=iterations,
        loglik=loglik,
    )


def fit_mediation(
    data: Dataset,
    outcome_family: Union[OutcomeFamily, str],
    settings: Optional[FitterSettings] = None,
) -> List[MediationFit]:
    """Fit the mediator models and the joint outcome model.

    For each mediator k, α̂_k is the exposure coefficient of the OLS fit of M_k
    on (1, X, Z). β̂_k is the coefficient of M_k in the joint outcome model on
    (X, M_1..M_d, Z); linear and logistic outcome models carry an intercept,
    the Cox model does not.

    Raises:
        MediatorFitError: wrapping the fitter error, tagged with the 1-based
            mediator index or `None` for the outcome model.
    """
    family = OutcomeFamily.parse(outcome_family)
    n, d = data.n, data.d
    intercept = np.ones((n, 1))
    exposure = data.exposure[:, None]
    covariates = data.covariates if data.covariates is not None else np.empty((n, 0))
    mediator_design = np.hstack([intercept, exposure, covariates])

    alphas: List[Tuple[float, float]] = []
    for k in range(d):
        try:
            fit = fit_ols(data.mediators[:, k], mediator_design)
        except ModelFitError as e:
            raise MediatorFitError(k + 1, e) from e
        alphas.append((float(fit.coefficients[1]), float(fit.standard_errors[1])))

    if family == OutcomeFamily.COX:
        if data.time is None or data.event is None:
            raise InvalidDatasetError("The Cox family needs survival data")
        offset = 1
        outcome_design = np.hstack([exposure, data.mediators, covariates])
    else:
        if data.outcome is None:
            raise InvalidDatasetError(f"The {family} family needs an outcome column")
        offset = 2
        outcome_design = np.hstack([intercept, exposure, data.mediators, covariates])
    try:
        if family == OutcomeFamily.LINEAR:
            outcome_fit = fit_ols(data.outcome, outcome_design)
        elif family == OutcomeFamily.LOGISTIC:
            outcome_fit = fit_logistic(data.outcome, outcome_design, settings)
        else:
            outcome_fit = fit_cox(data.time, data.event, outcome_design, settings)
    except ModelFitError as e:
        raise MediatorFitError(None, e) from e

    fits = []
    for k, (alpha_hat, se_alpha) in enumerate(alphas):
        beta_hat = float(outcome_fit.coefficients[offset + k])
        se_beta = float(outcome_fit.standard_errors[offset + k])
        for name, se in (("alpha", se_alpha), ("beta", se_beta)):
            if not (np.isfinite(se) and se > 0.0):
                raise MediatorFitError(
                    k + 1, DegenerateFitError(f"standard error of {name} is {se}")
                )
        fits.append(
            MediationFit(
                alpha_hat=alpha_hat,
                se_alpha=se_alpha,
                beta_hat=beta_hat,
                se_beta=se_beta,
                n=n,
                mediator_index=k + 1,
            )
        )
    return fits
