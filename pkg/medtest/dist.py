"""Normal special functions, Cholesky factorisation and seeded random streams."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import lapack
from scipy.special import ndtr, ndtri

from medtest.defaults import MAX_UINT64
from medtest.errors import DecompositionError, DimensionError, DomainError

FloatArray = NDArray[np.float64]
Size = Optional[Union[int, Tuple[int, ...]]]
RealOrArray = Union[float, FloatArray]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_UNIFORM_BITS = 52
_UNIFORM_SCALE = 2.0**-_UNIFORM_BITS


def _scalar_or_array(values: FloatArray) -> RealOrArray:
    if values.ndim == 0:
        return float(values)
    return values


def _finite(x: ArrayLike, name: str) -> FloatArray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} requires finite arguments")
    return arr


def std_normal_pdf(x: ArrayLike) -> RealOrArray:
    arr = _finite(x, "std_normal_pdf")
    return _scalar_or_array(_INV_SQRT_2PI * np.exp(-0.5 * arr * arr))


def std_normal_cdf(x: ArrayLike) -> RealOrArray:
    """Standard normal distribution function Φ(x).

    Accurate to double precision in both tails, so that Φ(-x) = 1 - Φ(x)
    holds to the last bit away from the origin.

    Raises:
        DomainError: if any argument is not finite.
    """
    return _scalar_or_array(ndtr(_finite(x, "std_normal_cdf")))


def std_normal_sf(x: ArrayLike) -> RealOrArray:
    """Upper tail 1 - Φ(x), computed without cancellation."""
    return _scalar_or_array(ndtr(-_finite(x, "std_normal_sf")))


def std_normal_quantile(p: ArrayLike) -> RealOrArray:
    """Inverse of the standard normal distribution function.

    The inverse is evaluated on the lower tail min(p, 1 - p), where 1 - p is
    exact, and refined by one Newton step.

    Raises:
        DomainError: if p is not strictly inside (0, 1).
    """
    arr = np.asarray(p, dtype=np.float64)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise DomainError("std_normal_quantile requires 0 < p < 1")
    lower = np.minimum(arr, 1.0 - arr)
    x = ndtri(lower)
    density = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(density > 0.0, (ndtr(x) - lower) / density, 0.0)
    x = x - step
    return _scalar_or_array(np.where(arr > 0.5, -x, x))


def critical_value(delta: float) -> float:
    """Two-sided normal critical value z_{1-δ/2}, computed as -Φ⁻¹(δ/2)."""
    if not 0.0 < delta < 1.0:
        raise DomainError(f"Level must lie in (0, 1), got {delta}")
    return -float(std_normal_quantile(0.5 * delta))


def two_sided_pvalue(t: ArrayLike) -> RealOrArray:
    """2(1 - Φ(|t|)), capped at 1."""
    arr = np.abs(_finite(t, "two_sided_pvalue"))
    return _scalar_or_array(np.minimum(2.0 * ndtr(-arr), 1.0))


@dataclass(frozen=True, eq=False)
class CovMatrix:
    """Symmetric covariance matrix.

    Positive definiteness is checked by `cholesky`, which names the failing
    pivot.
    """

    entries: FloatArray

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=np.float64)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionError(
                f"Covariance matrix must be square, got shape {entries.shape}"
            )
        if entries.shape[0] == 0:
            raise DimensionError("Covariance matrix must have dimension at least 1")
        if not np.all(np.isfinite(entries)):
            raise DomainError("Covariance matrix has non-finite entries")
        scale = max(1.0, float(np.max(np.abs(entries))))
        if not np.allclose(entries, entries.T, rtol=0.0, atol=1e-12 * scale):
            raise DomainError("Covariance matrix is not symmetric")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    @classmethod
    def identity(cls, dim: int) -> CovMatrix:
        return cls(np.eye(dim))

    @classmethod
    def ar1(cls, dim: int, rho: float) -> CovMatrix:
        """AR(1) correlation matrix with entries rho^|i-j|."""
        if not -1.0 < rho < 1.0:
            raise DomainError(f"AR(1) parameter must lie in (-1, 1), got {rho}")
        lags = np.abs(np.subtract.outer(np.arange(dim), np.arange(dim)))
        return cls(np.power(float(rho), lags))


def cholesky(m: Union[CovMatrix, ArrayLike]) -> FloatArray:
    """Lower-triangular L with L·Lᵀ = m.

    Raises:
        DecompositionError: with the 1-based index of the first nonpositive pivot.
    """
    matrix = m if isinstance(m, CovMatrix) else CovMatrix(np.asarray(m))
    factor, info = lapack.dpotrf(matrix.entries, lower=1, clean=1)
    if info > 0:
        raise DecompositionError(int(info))
    if info < 0:
        raise DecompositionError(-int(info), "illegal value")
    return np.asarray(factor, dtype=np.float64)


class RngStream:
    """Counter-based random stream, a pure function of (seed, stream_id).

    Streams are built on the Philox generator keyed by a `SeedSequence` whose
    spawn key is the stream id. A stream is owned by one replication and is
    never shared between threads.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        for name, value in (("seed", seed), ("stream_id", stream_id)):
            if not isinstance(value, (int, np.integer)) or not (
                0 <= int(value) <= MAX_UINT64
            ):
                raise DomainError(f"{name} must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self._generator = np.random.Generator(np.random.Philox(sequence))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def uniform(self, size: Size = None) -> RealOrArray:
        """Uniform draws on the open interval (0, 1)."""
        k = self._generator.integers(0, 2**_UNIFORM_BITS, size=size, dtype=np.int64)
        u = (np.asarray(k, dtype=np.float64) + 0.5) * _UNIFORM_SCALE
        return _scalar_or_array(u)

    def standard_normal(self, size: Size = None) -> RealOrArray:
        """Standard normal draws by inversion, one uniform per variate."""
        return _scalar_or_array(ndtri(np.asarray(self.uniform(size))))


def sample_uniform(
    lo: float, hi: float, rng: RngStream, size: Size = None
) -> RealOrArray:
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
        raise DomainError(f"Uniform bounds must satisfy lo < hi, got ({lo}, {hi})")
    u = np.asarray(rng.uniform(size))
    return _scalar_or_array(lo + (hi - lo) * u)


def sample_exponential(
    rate: ArrayLike, rng: RngStream, size: Size = None
) -> RealOrArray:
    """Exponential draws -ln(U)/rate.

    `rate` may be an array of per-draw rates, in which case `size` defaults to
    its shape.
    """
    rates = _finite(rate, "sample_exponential")
    if np.any(rates <= 0.0):
        raise DomainError("Exponential rate must be positive")
    if size is None and rates.ndim > 0:
        size = rates.shape
    u = np.asarray(rng.uniform(size))
    return _scalar_or_array(-np.log(u) / rates)


def sample_mvn(
    mean: ArrayLike, chol: ArrayLike, rng: RngStream, size: Optional[int] = None
) -> FloatArray:
    """Multivariate normal draws mean + L·z.

    Returns a vector of length d, or a (size, d) matrix with one draw per row.
    """
    mu = np.atleast_1d(np.asarray(mean, dtype=np.float64))
    factor = np.atleast_2d(np.asarray(chol, dtype=np.float64))
    dim = mu.shape[0]
    if mu.ndim != 1 or factor.shape != (dim, dim):
        raise DimensionError(
            f"Mean of length {mu.shape} does not match factor of shape {factor.shape}"
        )
    shape = dim if size is None else (size, dim)
    z = np.asarray(rng.standard_normal(shape))
    return np.asarray(mu + z @ factor.T, dtype=np.float64)
