"""Standard normal kernels: density, CDF, quantile and a seeded sampler.

The quantile is a rational approximation (Acklam's coefficients) polished by
one Halley step against the CDF, which brings it to full double precision on
(0, 1).  Every function accepts a scalar or an array; scalars come back as
plain floats.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)

# Rational approximation coefficients for the inverse normal CDF.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549671010242380e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425

# 52 random bits per uniform keeps (k + 0.5) exactly representable.
_UNIFORM_BITS = 52


def _unwrap(arr, scalar_input):
    if scalar_input:
        return float(arr)
    return arr


def pdf(z):
    """Standard normal density."""
    z = np.asarray(z, dtype=float)
    return _unwrap(np.exp(-0.5 * z * z) / SQRT2PI, z.ndim == 0)


def cdf(z):
    """Standard normal CDF.

    Evaluated as ``0.5 * erfc(-z / sqrt(2))`` so the lower tail keeps full
    relative precision.

    Raises
    ------
    ValueError
        If any input is NaN or infinite.
    """
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("cdf requires finite input")
    return _unwrap(0.5 * erfc(-z / SQRT2), z.ndim == 0)


def _lower_quantile(p):
    """Quantile for 0 < p <= 0.5, vectorised."""
    x = np.empty_like(p)

    tail = p < _P_LOW
    if np.any(tail):
        q = np.sqrt(-2.0 * np.log(p[tail]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        x[tail] = num / den

    mid = ~tail
    if np.any(mid):
        q = p[mid] - 0.5
        r = q * q
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[mid] = num / den

    # One Halley step. Deep in the tail exp(x^2/2) overflows; the
    # approximation is already at its best there, so leave it.
    with np.errstate(over="ignore", invalid="ignore"):
        err = 0.5 * erfc(-x / SQRT2) - p
        u = err * SQRT2PI * np.exp(0.5 * x * x)
        step = u / (1.0 + 0.5 * x * u)
    ok = np.isfinite(step)
    x[ok] -= step[ok]
    return x


def _lower_quantile_scalar(p: float) -> float:
    """Scalar twin of :func:`_lower_quantile` without array overhead."""
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
    else:
        q = p - 0.5
        r = q * q
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    x = num / den
    err = float(0.5 * erfc(-x / SQRT2)) - p
    try:
        u = err * SQRT2PI * math.exp(0.5 * x * x)
    except OverflowError:
        return x
    step = u / (1.0 + 0.5 * x * u)
    return x - step if math.isfinite(step) else x


def quantile(p):
    """Inverse of :func:`cdf`.

    ``quantile(0)`` is ``-inf`` and ``quantile(1)`` is ``+inf``.  For
    ``p > 0.5`` the value is computed as ``-quantile(1 - p)``.

    Raises
    ------
    ValueError
        If any ``p`` lies outside [0, 1] or is NaN.
    """
    if isinstance(p, (float, int)) and not isinstance(p, bool):
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise ValueError("quantile requires 0 <= p <= 1")
        if p == 0.0:
            return -math.inf
        if p == 1.0:
            return math.inf
        return _lower_quantile_scalar(p) if p <= 0.5 else -_lower_quantile_scalar(1.0 - p)

    p = np.asarray(p, dtype=float)
    scalar_input = p.ndim == 0
    p = np.atleast_1d(p)
    if np.any(np.isnan(p)) or np.any((p < 0.0) | (p > 1.0)):
        raise ValueError("quantile requires 0 <= p <= 1")

    out = np.empty_like(p)
    out[p == 0.0] = -np.inf
    out[p == 1.0] = np.inf

    lower = (p > 0.0) & (p <= 0.5)
    if np.any(lower):
        out[lower] = _lower_quantile(p[lower])
    upper = (p > 0.5) & (p < 1.0)
    if np.any(upper):
        out[upper] = -_lower_quantile(1.0 - p[upper])

    if scalar_input:
        return float(out[0])
    return out.reshape(np.shape(p))


def uniform_open(rng: np.random.Generator, size=None):
    """Uniform draws strictly inside (0, 1) built from 52 random bits."""
    k = rng.integers(0, 1 << _UNIFORM_BITS, size=size, dtype=np.int64)
    return (k + 0.5) * 2.0 ** -_UNIFORM_BITS


def sample_standard_normal(rng: np.random.Generator, size=None):
    """Standard normal draw(s) by inverse transform of :func:`uniform_open`.

    Identical uniform streams therefore give identical normal streams, with
    no dependence on the generator's own Gaussian algorithm.
    """
    return quantile(uniform_open(rng, size))


def standard_normal_draws(seed: int, n: int) -> np.ndarray:
    """``n`` standard normal draws from a fresh generator seeded with ``seed``."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    rng = np.random.default_rng(seed)
    return np.atleast_1d(sample_standard_normal(rng, size=n))
