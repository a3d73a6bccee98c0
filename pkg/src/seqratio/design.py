"""Two-stage design: pilot sizing, second-stage solving, rounding.

Each estimator kind comes with constants (c1, c2, c12) defining the
guaranteed error surface

    g(n1, n2) = 1/(n1 - c1) + 1/(n2 - c2) + c12 / ((n1 - c1) (n2 - c2)),

valid for n1 > c1, n2 > c2.  Keeping g <= tarvar bounds the estimator's
(relative) mean squared error by tarvar for every probability pair.

The design maps a target ``tarvar`` and sample-size ratio ``tarsara``
to a pilot size and the affine map from the pilot ratio statistic W to
the real-valued second-stage success targets; ``round_sus`` then picks
an integer pair that still satisfies the guarantee.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

__all__ = [
    "EstimatorKind",
    "RR",
    "LRR",
    "OR",
    "LOR",
    "KINDS",
    "kind_from_name",
    "ConfigError",
    "DesignParams",
    "SecondStageReal",
    "SecondStageParams",
    "error_fn",
    "curvature_fn",
    "select_suf1",
    "derive_design",
    "solve_sus",
    "first_order_coeffs",
    "round_sus",
    "SUF1_CAP",
]

#: Pilot sizes above this abort design derivation (the tarvar asked for
#: is far below anything this construction is meant for).
SUF1_CAP = 10**6


class ConfigError(ValueError):
    """A requested design is outside the supported configuration space."""


@dataclass(frozen=True)
class EstimatorKind:
    """An estimand family together with its error-surface constants.

    ``relative``   — guarantee and MSE reporting are relative to the
                     squared estimand (ratio-type) rather than absolute
                     (log-type).
    ``transformed``— stage 1 runs on factory-transformed streams with
                     success rate p(1-p); stage-1 draws cost 3/(2 p(1-p))
                     raw observations per success on average.
    ``alpha``      — offset between the two stage-2 sampling targets of
                     each population (transformed kinds only).
    """

    name: str
    c1: float
    c2: float
    c12: float
    relative: bool
    transformed: bool
    alpha: int = 0

    @property
    def stage1_cost(self) -> float:
        """Mean raw draws per stage-1 success, up to the 1/p(1-p) factor."""
        return 1.5 if self.transformed else 1.0

    def suf2_of(self, suf1: int) -> int:
        """Pilot size of population 2 implied by population 1's."""
        if self.transformed:
            return suf1
        return suf1 + int(self.c1 - self.c2)

    def __repr__(self) -> str:  # keep reprs short in test output
        return f"EstimatorKind({self.name!r})"


RR = EstimatorKind("rr", 2.0, 0.0, 1.0, relative=True, transformed=False)
LRR = EstimatorKind("lrr", 1.0, 1.0, 0.0, relative=False, transformed=False)
OR = EstimatorKind("or", 2.0, 2.0, 1.0, relative=True, transformed=True, alpha=2)
LOR = EstimatorKind("lor", 1.25, 1.25, 0.0, relative=False, transformed=True, alpha=0)

KINDS = {k.name: k for k in (RR, LRR, OR, LOR)}


def kind_from_name(name: str) -> EstimatorKind:
    try:
        return KINDS[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown estimator kind {name!r}; choose from {sorted(KINDS)}")


@dataclass(frozen=True)
class DesignParams:
    """Frozen output of the design derivation for one (kind, tarvar, tarsara)."""

    kind: EstimatorKind
    tarvar: float
    tarsara: float
    suf1: int
    suf2: int
    cdemul: float
    cdeadd1: float
    cdeadd2: float
    cdesm1: float = 0.5
    cdesm2: float = 0.5
    susrou: float = 1.0


@dataclass(frozen=True)
class SecondStageReal:
    """Real-valued second-stage solution along the constraint curve."""

    sus1_real: float
    sus2_real: float
    discriminant: float


@dataclass(frozen=True)
class SecondStageParams:
    """Rounded (integer) second-stage success targets."""

    sus1: int
    sus2: int


def error_fn(sus1: float, sus2: float, kind: EstimatorKind) -> float:
    """The guaranteed-error surface g at (sus1, sus2)."""
    d1 = sus1 - kind.c1
    d2 = sus2 - kind.c2
    if d1 <= 0.0 or d2 <= 0.0:
        raise ValueError(
            f"error function undefined at ({sus1}, {sus2}) for {kind.name}: "
            f"need sus1 > {kind.c1} and sus2 > {kind.c2}"
        )
    return 1.0 / d1 + 1.0 / d2 + kind.c12 / (d1 * d2)


def curvature_fn(tarvar: float, suf1: int, susrou: float, kind: EstimatorKind) -> float:
    """Sign of the solver's constant coefficient as a pilot-size criterion.

    Nonnegative values mean the W -> sus1 map is convex (its secants lie
    above it), which is what makes the rounded design's expected size
    bounds hold.  Strictly increasing in suf1; the pilot size is the
    smallest suf1 >= 3 with nonnegative curvature.
    """
    if suf1 < 3:
        raise ValueError(f"pilot size must be >= 3, got {suf1}")
    inv = 1.0 / tarvar
    if kind.transformed:
        x = (inv + 1.5 * suf1 + kind.c1 + susrou) * (suf1 - 1.0) / suf1 - inv
    else:
        suf2 = kind.suf2_of(suf1)
        t = math.sqrt((suf1 - 1.0) * (suf2 - 1.0) / (suf1 * suf2))
        x = (inv + suf1 + kind.c1 + susrou) * t - inv
    return tarvar * x * x + 2.0 * x - kind.c12


def select_suf1(tarvar: float, kind: EstimatorKind, susrou: float = 1.0) -> int:
    """Smallest admissible pilot size for population 1."""
    if not tarvar > 0.0:
        raise ConfigError(f"tarvar must be positive, got {tarvar}")
    n = 3
    while curvature_fn(tarvar, n, susrou, kind) < 0.0:
        n += 1
        if n > SUF1_CAP:
            raise ConfigError(
                f"pilot size exceeds {SUF1_CAP} for tarvar={tarvar} ({kind.name}); "
                "target error is below the supported range"
            )
    return n


def derive_design(tarvar: float, tarsara: float, kind: EstimatorKind) -> DesignParams:
    """Derive the full two-stage design for one configuration.

    ``tarsara`` is the target ratio E[N1]/E[N2] of expected sample
    sizes (for grouped sampling: m1/m2).
    """
    if not tarvar > 0.0:
        raise ConfigError(f"tarvar must be positive, got {tarvar}")
    if tarvar > 1.0:
        warnings.warn(
            f"tarvar={tarvar} exceeds 1; the guarantee is vacuous at this level",
            stacklevel=2,
        )
    if not tarsara > 0.0:
        raise ConfigError(f"tarsara must be positive, got {tarsara}")

    susrou = 1.0
    suf1 = select_suf1(tarvar, kind, susrou)
    suf2 = kind.suf2_of(suf1)
    inv = 1.0 / tarvar

    if kind.transformed:
        cdemul = tarsara
        cdeadd1 = (inv + 1.5 * suf1 + kind.c1 + susrou) * (suf1 - 1.0) / suf1 - inv - kind.c1
        cdeadd2 = cdeadd1
    else:
        cdemul = tarsara * math.sqrt(
            suf1 * (suf1 - 1.0) / (suf2 * (suf2 - 1.0))
        )
        t = math.sqrt((suf1 - 1.0) * (suf2 - 1.0) / (suf1 * suf2))
        q = inv + suf1 + kind.c1 + susrou
        cdeadd1 = q * t - inv - kind.c1
        cdeadd2 = cdeadd1 + kind.c1 - kind.c2

    return DesignParams(
        kind=kind,
        tarvar=tarvar,
        tarsara=tarsara,
        suf1=suf1,
        suf2=suf2,
        cdemul=cdemul,
        cdeadd1=cdeadd1,
        cdeadd2=cdeadd2,
        susrou=susrou,
    )


def solve_sus(design: DesignParams, varaf: float) -> SecondStageReal:
    """Solve for the real second-stage targets given the pilot ratio W.

    Solves g(sus1, sus2) = tarvar subject to the size-ratio constraint
    (sus1 + a1) = cdemul * W * (sus2 + a2); returns the root with both
    targets valid (the + branch of the quadratic).
    """
    if not varaf > 0.0 or not math.isfinite(varaf):
        raise ValueError(f"pilot ratio statistic must be positive and finite, got {varaf}")
    kind = design.kind
    e = design.tarvar
    d = design.cdemul
    a1 = design.cdeadd1
    a2 = design.cdeadd2
    c1 = kind.c1
    c12 = kind.c12
    w = varaf
    biga = a1 + c1  # == a2 + c2 by construction
    dw = d * w
    ea = e * biga

    b = 1.0 + dw * (1.0 + ea) - ea
    raw = b * b - 4.0 * e * (biga * dw - biga - c12 * dw)
    # Near the perfect-square configuration the raw form cancels
    # catastrophically; the expanded quadratic-in-W form has all
    # coefficients nonnegative exactly in that regime.
    d_u = (d * (1.0 + ea)) ** 2
    d_v = 2.0 * d * (1.0 + 2.0 * e * c12 - 2.0 * ea - ea * ea)
    d_w = (1.0 + ea) ** 2
    if d_v >= 0.0 or raw < 1e-8 * b * b:
        disc = (d_u * w + d_v) * w + d_w
    else:
        disc = raw
    if disc < 0.0:
        if disc < -1e-9 * max(1.0, b * b):
            raise RuntimeError(
                f"negative discriminant {disc} for design {kind.name} at W={w}"
            )
        disc = 0.0

    sus1 = (dw * (1.0 + ea) - e * (a1 - c1) + 1.0 + math.sqrt(disc)) / (2.0 * e)
    sus2 = (sus1 + a1) / dw - a2
    return SecondStageReal(sus1_real=sus1, sus2_real=sus2, discriminant=disc)


def first_order_coeffs(design: DesignParams) -> tuple[float, float, float, float]:
    """Asymptote coefficients of the W -> (sus1, sus2) solution curve.

    Returns (k1c, k1w, k2c, k2w):
      sus1 -> k1c as W -> 0,      sus1 / W -> k1w as W -> inf,
      sus2 -> k2c as W -> inf,    sus2 * W -> k2w as W -> 0.
    The affine upper bounds sus1 <= k1c + k1w W and
    sus2 <= k2c + k2w / W hold everywhere, with equality exactly when
    the curvature is zero.
    """
    kind = design.kind
    inv = 1.0 / design.tarvar
    k1c = inv + kind.c1
    k1w = design.cdemul * (inv + design.cdeadd2 + kind.c2)
    k2c = inv + kind.c2
    k2w = (inv + design.cdeadd1 + kind.c1) / design.cdemul
    return (k1c, k1w, k2c, k2w)


def round_sus(real: SecondStageReal, design: DesignParams, stream) -> SecondStageParams:
    """Round the real solution to integers without losing the guarantee.

    A fair coin picks which population is tried upward first; the first
    candidate pair that stays on the valid side of the error surface
    wins, falling back to rounding both up (always valid).  Floor
    candidates at or below the validity threshold are skipped.
    """
    kind = design.kind
    e = design.tarvar
    x1 = real.sus1_real
    x2 = real.sus2_real
    up1, dn1 = math.ceil(x1), math.floor(x1)
    up2, dn2 = math.ceil(x2), math.floor(x2)
    tol = e * (1.0 + 1e-12)

    def ok(n1: int, n2: int) -> bool:
        if n1 <= kind.c1 or n2 <= kind.c2:
            return False
        return error_fn(n1, n2, kind) <= tol

    if int(stream.integers(0, 2)) == 0:
        candidates = ((up1, dn2), (dn1, up2))
    else:
        candidates = ((dn1, up2), (up1, dn2))
    for n1, n2 in candidates:
        if ok(n1, n2):
            return SecondStageParams(sus1=n1, sus2=n2)
    return SecondStageParams(sus1=up1, sus2=up2)
