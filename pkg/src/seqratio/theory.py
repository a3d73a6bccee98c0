"""Closed-form performance bounds and approximations.

Everything here is a function of design-level quantities only: the
target error, the target size ratio (or group shape), and the
population pair expressed through the kind's natural parameters

    ratio_param  r  = p1/p2            (rr, lrr)
                 r* = q1/q2            (or, lor), with qi = pi (1 - pi)
    scale_param  s  = sqrt(p1 p2)      (rr, lrr)
                 s* = sqrt(q1 q2)      (or, lor)

Sample-size statements are normalized: bounds and group counts are
returned multiplied by the kind's scale_param, so they are finite
numbers independent of how rare the populations are.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .design import (
    DesignParams,
    EstimatorKind,
    derive_design,
    error_fn,
    first_order_coeffs,
    select_suf1,
)
from .special import beta_prime_cdf, log_beta, reg_inc_beta

__all__ = [
    "ratio_param",
    "scale_param",
    "true_value",
    "probabilities_from_normalized",
    "avg_size_bound",
    "efficiency_bound_element",
    "crossing_ratio",
    "expected_groups_approx",
    "expected_abs_gap_approx",
    "efficiency_group_approx",
    "conditional_mse_bound",
    "StageOneMoments",
    "stage1_ratio_moments",
    "VarianceSummands",
    "variance_decomposition",
    "TheoryPoint",
    "theory_point",
    "beta_prime_limit_cdf",
]


def _check_p(p1: float, p2: float) -> None:
    if not 0.0 < p1 < 1.0 or not 0.0 < p2 < 1.0:
        raise ValueError(f"probabilities must lie in (0,1), got ({p1}, {p2})")


def ratio_param(kind: EstimatorKind, p1: float, p2: float) -> float:
    """The kind's natural ratio parameter of the population pair."""
    _check_p(p1, p2)
    if kind.transformed:
        return (p1 * (1.0 - p1)) / (p2 * (1.0 - p2))
    return p1 / p2


def scale_param(kind: EstimatorKind, p1: float, p2: float) -> float:
    """The kind's natural scale parameter of the population pair."""
    _check_p(p1, p2)
    if kind.transformed:
        return math.sqrt(p1 * (1.0 - p1) * p2 * (1.0 - p2))
    return math.sqrt(p1 * p2)


def true_value(kind: EstimatorKind, p1: float, p2: float) -> float:
    """The estimand at (p1, p2)."""
    _check_p(p1, p2)
    if kind.name == "rr":
        return p1 / p2
    if kind.name == "lrr":
        return math.log(p1 / p2)
    odds = (p1 / (1.0 - p1)) / (p2 / (1.0 - p2))
    if kind.name == "or":
        return odds
    return math.log(odds)


def probabilities_from_normalized(ratio: float, scale: float) -> tuple[float, float]:
    """Invert (r, s) = (p1/p2, sqrt(p1 p2)) back to (p1, p2)."""
    if not ratio > 0.0 or not scale > 0.0:
        raise ValueError(f"ratio and scale must be positive, got ({ratio}, {scale})")
    p1 = scale * math.sqrt(ratio)
    p2 = scale / math.sqrt(ratio)
    if not p1 < 1.0 or not p2 < 1.0:
        raise ValueError(
            f"(ratio={ratio}, scale={scale}) implies probabilities ({p1}, {p2}) outside (0,1)"
        )
    return p1, p2


def _q_factor(kind: EstimatorKind, tarvar: float, suf1: int, delta: float = 1.0) -> float:
    return 1.0 / tarvar + kind.stage1_cost * suf1 + kind.c1 + delta


def avg_size_bound(
    kind: EstimatorKind, tarvar: float, tarsara: float, ratio: float, pop: int
) -> float:
    """Upper bound on E[N_pop] * scale_param (raw observations)."""
    suf1 = select_suf1(tarvar, kind)
    q = _q_factor(kind, tarvar, suf1)
    rho = tarsara * ratio
    body = q * (1.0 / math.sqrt(rho) + math.sqrt(rho))
    if pop == 0:
        return body * math.sqrt(tarsara)
    return body / math.sqrt(tarsara)


def efficiency_bound_element(
    kind: EstimatorKind, tarvar: float, tarsara: float, ratio: float, scale: float
) -> float:
    """Lower bound on estimator efficiency under element sampling."""
    suf1 = select_suf1(tarvar, kind)
    lead = 1.0 / (1.0 + tarvar * (kind.stage1_cost * suf1 + kind.c1 + 1.0))
    if kind.transformed:
        return lead
    rho = tarsara * ratio
    depress = scale * (1.0 / math.sqrt(tarsara) + math.sqrt(tarsara)) / (
        1.0 / math.sqrt(rho) + math.sqrt(rho)
    )
    return lead * (1.0 - depress)


def crossing_ratio(kind: EstimatorKind, suf1: int, tarsara: float, ratio: float) -> float:
    """Normalized pilot ratio at which the two populations' per-group
    demands cross: the sign-change point of the expected demand gap."""
    rr = tarsara * ratio
    suf2 = kind.suf2_of(suf1)
    disc = (rr - 1.0) ** 2 + 4.0 * rr * (suf1 - 1.0) * (suf2 - 1.0) / (suf1 * suf2)
    return suf2 / (2.0 * rr * (suf1 - 1.0)) * (rr - 1.0 + math.sqrt(disc))


def _log_crossing_weight(suf1: int, suf2: int, wn: float) -> float:
    """log of  wn^(suf2-1) / ((wn+1)^(suf1+suf2-1) B(suf2, suf1))."""
    return (
        (suf2 - 1.0) * math.log(wn)
        - (suf1 + suf2 - 1.0) * math.log1p(wn)
        - log_beta(suf2, suf1)
    )


def expected_groups_approx(
    kind: EstimatorKind,
    tarvar: float,
    m1: int,
    m2: int,
    ratio: float,
    *,
    crossing_term: bool = True,
) -> float:
    """Approximate E[G] * scale_param under group sampling.

    The first part is the half-sum of the per-population expected
    demands; the crossing term accounts for taking the max instead of
    the half-sum.  ``crossing_term=False`` exposes the bare half-sum
    (diagnostics only: it reproduces element-mode sizes exactly).
    """
    tarsara = m1 / m2
    suf1 = select_suf1(tarvar, kind)
    suf2 = kind.suf2_of(suf1)
    q = _q_factor(kind, tarvar, suf1)
    sr = math.sqrt(ratio)
    base = 1.0 / (m1 * sr) + sr / m2
    if not crossing_term:
        return q * base
    wn = crossing_ratio(kind, suf1, tarsara, ratio)
    weight = math.exp(_log_crossing_weight(suf1, suf2, wn))
    extra = weight * (1.0 / (suf1 * m1 * sr) + wn * sr / (suf2 * m2))
    return q * (base + extra)


def expected_abs_gap_approx(
    kind: EstimatorKind, tarvar: float, m1: int, m2: int, ratio: float
) -> float:
    """Approximate E[|gap|] * scale_param, where the gap is the difference
    of the two populations' per-group demands.

    Replaces the pilot counts by their means and the second-stage counts
    by their conditional means, then integrates the remaining dependence
    on the pilot ratio against its limiting beta-prime law.
    """
    tarsara = m1 / m2
    design = derive_design(tarvar, tarsara, kind)
    suf1, suf2 = design.suf1, design.suf2
    k1c, k1w, k2c, k2w = first_order_coeffs(design)
    delta = design.susrou
    cost = kind.stage1_cost
    sr = math.sqrt(ratio)
    wn = crossing_ratio(kind, suf1, tarsara, ratio)
    z = wn / (wn + 1.0)

    term0 = (k1c + cost * suf1 + delta) / (m1 * sr) - (k2c + cost * suf2 + delta) * sr / m2
    term_w = k1w * suf2 * sr / ((suf1 - 1.0) * m1)
    term_v = k2w * suf1 / ((suf2 - 1.0) * m2 * sr)
    return (
        term0 * (1.0 - 2.0 * reg_inc_beta(z, suf2, suf1))
        + term_w * (1.0 - 2.0 * reg_inc_beta(z, suf2 + 1.0, suf1 - 1.0))
        - term_v * (1.0 - 2.0 * reg_inc_beta(z, suf2 - 1.0, suf1 + 1.0))
    )


def efficiency_group_approx(
    kind: EstimatorKind, tarvar: float, m1: int, m2: int, p1: float, p2: float
) -> float:
    """Approximate estimator efficiency under group sampling."""
    _check_p(p1, p2)
    r = ratio_param(kind, p1, p2)
    sr = math.sqrt(r)
    if kind.transformed:
        num = 1.0 / (m1 * sr) + sr / m2
    else:
        num = (1.0 - p1) / (m1 * sr) + (1.0 - p2) * sr / m2
    eg_scaled = expected_groups_approx(kind, tarvar, m1, m2, r)
    return num / (tarvar * eg_scaled)


def conditional_mse_bound(
    kind: EstimatorKind, sus1: int, sus2: int, p1: float, p2: float
) -> float:
    """Bound on the conditional second moment (in the kind's metric)
    given the rounded targets: E[est^2 | sus] / value^2 for the ratio
    kinds, 1 + conditional MSE bound for the log kinds.  Never exceeds
    1 + error_fn(sus1, sus2)."""
    _check_p(p1, p2)
    if kind.name == "rr":
        return (1.0 + (1.0 - p1) / (sus1 - 2.0 + 2.0 * p1)) * (1.0 + (1.0 - p2) / sus2)
    if kind.name == "or":
        q1 = p1 * (1.0 - p1)
        q2 = p2 * (1.0 - p2)
        f1 = 1.0 + (1.0 - q1 / (sus1 - 2.0 + 2.0 * p1)) / (sus1 - 2.0)
        f2 = 1.0 + (1.0 - q2 / (sus2 - 2.0 * p2)) / (sus2 - 2.0)
        return f1 * f2
    return 1.0 + error_fn(sus1, sus2, kind)


class StageOneMoments(NamedTuple):
    mean_w: float
    mean_inv_w: float
    var_w: float
    var_inv_w: float
    cov_w_neg_inv_w: float


def stage1_ratio_moments(
    kind: EstimatorKind, suf1: int, suf2: int, ratio: float
) -> StageOneMoments:
    """Small-scale approximations of the pilot ratio statistic's moments."""
    if suf1 < 3 or suf2 < 3:
        raise ValueError(f"pilot sizes must be >= 3 for variances, got ({suf1}, {suf2})")
    mean_w = suf2 * ratio / (suf1 - 1.0)
    mean_inv = suf1 / ((suf2 - 1.0) * ratio)
    var_w = suf2 * (suf1 + suf2 - 1.0) * ratio**2 / ((suf1 - 2.0) * (suf1 - 1.0) ** 2)
    var_inv = suf1 * (suf1 + suf2 - 1.0) / ((suf2 - 2.0) * (suf2 - 1.0) ** 2 * ratio**2)
    cov = mean_w * mean_inv - 1.0
    return StageOneMoments(mean_w, mean_inv, var_w, var_inv, cov)


class VarianceSummands(NamedTuple):
    """Normalized contributions to the variance of the per-group demand
    gap: pilot counts directly, second stage given targets, second stage
    through target variability, and a bound on the cross term."""

    stage1_direct: float
    stage2_conditional: float
    stage2_induced: float
    covariance_bound: float


def variance_decomposition(
    kind: EstimatorKind, tarvar: float, tarsara: float, ratio: float
) -> VarianceSummands:
    """Var[gap] * scale^2 * m1 * m2, split into its four summands.

    The third summand dominates; that is what justifies replacing all
    counts but the targets by means in the E[|gap|] approximation.
    """
    suf1 = select_suf1(tarvar, kind)
    suf2 = kind.suf2_of(suf1)
    q = _q_factor(kind, tarvar, suf1)
    rr = tarsara * ratio
    delta = 1.0
    inv = 1.0 / tarvar

    if kind.transformed:
        s1 = 2.25 * suf1 * (1.0 / rr + rr)
        s2 = (inv + kind.c1 + delta) / rr + rr * (inv + kind.c1 + delta - kind.alpha) + 2.0 * q
    else:
        s1 = suf1 / rr + suf2 * rr
        s2 = (inv + kind.c1 + delta) / rr + rr * (inv + kind.c2 + delta) + 2.0 * q
    s3 = (
        q
        * q
        * (suf1 + suf2 - 1.0)
        * (
            rr / ((suf1 - 2.0) * suf2)
            + 1.0 / (rr * suf1 * (suf2 - 2.0))
            + 2.0 / (suf1 * suf2)
        )
    )
    s4 = 2.0 * math.sqrt(s1 * s3)
    return VarianceSummands(s1, s2, s3, s4)


@dataclass(frozen=True)
class TheoryPoint:
    """All closed-form columns for one configuration."""

    kind: str
    tarvar: float
    tarsara: float
    ratio: float
    scale: float
    suf1: int
    suf2: int
    size_bound_n1: float  # E[N1] * scale upper bound
    size_bound_n2: float
    efficiency_bound: float
    crossing: float
    expected_groups: float | None = None  # E[G] * scale, group configs only
    efficiency_group: float | None = None


def theory_point(
    kind: EstimatorKind,
    tarvar: float,
    *,
    tarsara: float | None = None,
    groups: tuple[int, int] | None = None,
    ratio: float,
    scale: float,
    p1: float | None = None,
    p2: float | None = None,
) -> TheoryPoint:
    """Evaluate every applicable closed form for one configuration."""
    if groups is not None:
        m1, m2 = groups
        tarsara = m1 / m2
    elif tarsara is None:
        tarsara = 1.0
    design = derive_design(tarvar, tarsara, kind)
    eg = None
    egr = None
    if groups is not None:
        eg = expected_groups_approx(kind, tarvar, m1, m2, ratio)
        if p1 is not None and p2 is not None:
            egr = efficiency_group_approx(kind, tarvar, m1, m2, p1, p2)
    return TheoryPoint(
        kind=kind.name,
        tarvar=tarvar,
        tarsara=tarsara,
        ratio=ratio,
        scale=scale,
        suf1=design.suf1,
        suf2=design.suf2,
        size_bound_n1=avg_size_bound(kind, tarvar, tarsara, ratio, 0),
        size_bound_n2=avg_size_bound(kind, tarvar, tarsara, ratio, 1),
        efficiency_bound=efficiency_bound_element(kind, tarvar, tarsara, ratio, scale),
        crossing=crossing_ratio(kind, design.suf1, tarsara, ratio),
        expected_groups=eg,
        efficiency_group=egr,
    )


def beta_prime_limit_cdf(z: float, suf1: int, suf2: int) -> float:
    """Limiting CDF of the normalized pilot ratio W/ratio (small scale)."""
    return beta_prime_cdf(z, suf2, suf1)
