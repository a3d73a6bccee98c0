"""Numeric kernels: harmonic numbers, incomplete beta, beta prime, negative binomial.

These are the scalar building blocks used by the estimators (harmonic
numbers enter the log-ratio point estimates) and by the closed-form
theory module (beta prime tail weights, negative-binomial moments).
Everything is plain 64-bit float arithmetic; accuracy targets are
stated per function and pinned by tests against independently computed
reference values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EULER_GAMMA",
    "HarmonicTable",
    "harmonic",
    "log_beta",
    "reg_inc_beta",
    "beta_prime_pdf",
    "beta_prime_cdf",
    "NegBinMoments",
    "negbin_moments",
    "mean_inv_bounds",
]

EULER_GAMMA = 0.5772156649015328606065120900824024


class HarmonicTable:
    """Harmonic numbers H_n = 1 + 1/2 + ... + 1/n for arbitrary n >= 1.

    Values up to ``cutoff`` come from a cached prefix-sum table built in
    extended precision (the table is the exact partial sum rounded once
    to float64).  Beyond the cutoff the asymptotic expansion

        H_n = ln n + gamma + 1/(2n) - 1/(12 n^2) + 1/(120 n^4) - ...

    is used; at the default cutoff 2**20 its truncation error is far
    below float64 resolution, so the two branches agree at the boundary.
    Relative error is <= 1e-12 everywhere (in practice ~1e-16).
    """

    def __init__(self, cutoff: int = 1 << 20):
        if cutoff < 1:
            raise ValueError("cutoff must be >= 1")
        self.cutoff = cutoff
        k = np.arange(1, cutoff + 1, dtype=np.longdouble)
        self._table = np.cumsum(1.0 / k).astype(np.float64)

    def value(self, n: int) -> float:
        if n < 1:
            raise ValueError(f"harmonic number needs n >= 1, got {n}")
        if n <= self.cutoff:
            return float(self._table[n - 1])
        x = float(n)
        inv2 = 1.0 / (x * x)
        return (
            math.log(x)
            + EULER_GAMMA
            + 1.0 / (2.0 * x)
            - inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 / 252.0))
        )


_default_table: HarmonicTable | None = None


def harmonic(n: int) -> float:
    """H_n via a lazily built shared table (see :class:`HarmonicTable`)."""
    global _default_table
    if _default_table is None:
        _default_table = HarmonicTable()
    return _default_table.value(n)


def log_beta(a: float, b: float) -> float:
    """log B(a, b) for a, b > 0."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError(f"beta function needs positive parameters, got ({a}, {b})")
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


_CF_MAXIT = 400
_CF_EPS = 3.0e-16
_CF_TINY = 1.0e-300


def _inc_beta_cf(a: float, b: float, x: float) -> float:
    # Modified Lentz evaluation of the standard continued fraction for
    # I_x(a, b) / prefactor.  Converges quickly for x below a/(a+b);
    # callers mirror the arguments otherwise.
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2 * m
        # even step
        num = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + num * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + num / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        # odd step
        num = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + num * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + num / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < _CF_EPS:
            return h
    raise RuntimeError(f"incomplete beta continued fraction stalled at a={a}, b={b}, x={x}")


def reg_inc_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function I_x(a, b).

    Continued-fraction evaluation with the symmetry switch at
    x = a/(a+b): above that point the reflected form 1 - I_{1-x}(b, a)
    is computed instead, keeping the fraction in its fast-convergence
    region on both sides.
    """
    if a <= 0.0 or b <= 0.0:
        raise ValueError(f"reg_inc_beta needs positive parameters, got ({a}, {b})")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"reg_inc_beta needs x in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = a * math.log(x) + b * math.log1p(-x) - log_beta(a, b)
    if x < a / (a + b):
        return math.exp(log_front) * _inc_beta_cf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _inc_beta_cf(b, a, 1.0 - x) / b


def beta_prime_pdf(z: float, a: float, b: float) -> float:
    """Density z^(a-1) / (B(a,b) (1+z)^(a+b)) of the beta prime law, z > 0."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError(f"beta prime needs positive parameters, got ({a}, {b})")
    if z <= 0.0:
        raise ValueError(f"beta_prime_pdf needs z > 0, got {z}")
    return math.exp((a - 1.0) * math.log(z) - (a + b) * math.log1p(z) - log_beta(a, b))


def beta_prime_cdf(z: float, a: float, b: float) -> float:
    """P[Z <= z] for beta prime Z, computed as I_{z/(z+1)}(a, b)."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError(f"beta prime needs positive parameters, got ({a}, {b})")
    if z < 0.0:
        raise ValueError(f"beta_prime_cdf needs z >= 0, got {z}")
    return reg_inc_beta(z / (z + 1.0), a, b)


@dataclass(frozen=True)
class NegBinMoments:
    """Moment formulas for the draw count N of sampling until r successes.

    N counts Bernoulli(p) draws until the r-th success (so N >= r).
    ``mean_inv_minus1`` is E[1/(N-1)], exact for r >= 2;
    ``var_inv_minus1_upper`` is an upper bound on Var[1/(N-1)], valid
    for r >= 3.  Accessing a field below its r-threshold raises.
    """

    r: int
    p: float

    @property
    def mean(self) -> float:
        return self.r / self.p

    @property
    def variance(self) -> float:
        return self.r * (1.0 - self.p) / (self.p * self.p)

    @property
    def mean_inv_minus1(self) -> float:
        if self.r < 2:
            raise ValueError(f"E[1/(N-1)] needs r >= 2, got r={self.r}")
        return self.p / (self.r - 1)

    @property
    def var_inv_minus1_upper(self) -> float:
        if self.r < 3:
            raise ValueError(f"Var[1/(N-1)] bound needs r >= 3, got r={self.r}")
        return (
            self.p * self.p * (1.0 - self.p)
            / ((self.r - 1) ** 2 * (self.r - 2 + 2.0 * self.p))
        )


def negbin_moments(r: int, p: float) -> NegBinMoments:
    """Moments of the sampling-until-r-successes draw count, see NegBinMoments."""
    if r < 1:
        raise ValueError(f"negbin_moments needs r >= 1, got {r}")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"negbin_moments needs p in (0, 1], got {p}")
    return NegBinMoments(r=r, p=p)


def mean_inv_bounds(r: int, p: float) -> tuple[float, float]:
    """Two-sided bounds (lower, upper) on E[1/N] for the count N above, r >= 3."""
    if r < 3:
        raise ValueError(f"mean_inv_bounds needs r >= 3, got {r}")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"mean_inv_bounds needs p in (0, 1], got {p}")
    base = p / (r - 1)
    lower = base * (1.0 - p / (r - 2))
    upper = base * (1.0 - p / (r - 1 + p))
    return lower, upper
