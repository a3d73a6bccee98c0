"""Two-stage estimation pipelines for the four estimand kinds.

Stage 1 samples a pilot from each population — directly for rr/lrr, and
through a Bernoulli factory with output rate p(1-p) for or/lor — and
forms the ratio statistic W from the pilot draw counts.  The design
solver turns W into integer second-stage targets; stage 2 runs fresh
inverse binomial sampling, and the point estimate is computed from
stage-2 counts alone (W is never recomputed and stage-1 data enters the
estimate only through the targets).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import DesignParams, EstimatorKind, SecondStageParams, round_sus, solve_sus
from .rng import TAG_FACTORY_POP1, TAG_FACTORY_POP2, TAG_ROUNDING
from .sampling import (
    DRAW_CAP,
    DrawCapExceeded,
    LedgerSnapshot,
    SampleSource,
    ibs_count,
    ibs_failures_count,
)
from .special import harmonic

__all__ = [
    "StageOneResult",
    "Stage2Counts",
    "EstimateResult",
    "bernoulli_factory_pq",
    "run_stage1",
    "run_stage2",
    "point_estimate",
    "estimate",
]


@dataclass(frozen=True)
class StageOneResult:
    """Pilot draw counts and the ratio statistic W built from them."""

    vasaf1: int  # pilot draws in population 1 (factory outputs for or/lor)
    vasaf2: int
    varaf: float  # W: pop-2 count over pop-1 count, half-corrected
    raw1: int  # raw observations consumed (== vasaf for rr/lrr)
    raw2: int


@dataclass(frozen=True)
class Stage2Counts:
    """Stage-2 draw counts; ``split`` carries the per-run counts of the
    two inverse binomial runs per population for the transformed kinds
    (until-success run, until-failure run)."""

    m1: int
    m2: int
    split: tuple[int, int, int, int] | None = None


@dataclass(frozen=True)
class EstimateResult:
    kind: EstimatorKind
    value: float
    sus1: int
    sus2: int
    sus1_real: float
    sus2_real: float
    varaf: float
    stage1: StageOneResult
    counts: Stage2Counts
    ledger: LedgerSnapshot
    groups: int | None = None
    discarded: tuple[int, int] | None = None


# Bernoulli factory ----------------------------------------------------------
#
# Turns a p-coin into a p(1-p)-coin using at most two input draws per
# output.  A fair criterion coin picks between two sub-schemes:
#   c = 0: draw x1; if x1 = 0 emit failure, else draw x2 and emit 1-x2.
#   c = 1: draw x1; if x1 = 1 emit failure, else draw x2 and emit x2.
# Either way a success consumes exactly two inputs and the expected
# inputs per output is 3/2 for every p.


def bernoulli_factory_pq(source: SampleSource, pop: int, stream) -> int:
    """One factory output bit from ``pop`` (generic per-draw path)."""
    c = int(stream.integers(0, 2))
    x1 = source.draw(pop)
    if c == 0:
        if x1 == 0:
            return 0
        return 1 - source.draw(pop)
    if x1 == 1:
        return 0
    return source.draw(pop)


def _factory_parse_py(bits, start, stop, crit, cstart, cstop, need, pending, pc):
    """Run the factory over buffered input bits until ``need`` successes.

    Consumes bits[start:stop) and criterion bits crit[cstart:cstop),
    stopping at ``need`` output successes or input exhaustion.  A
    half-finished output (first draw taken, second unavailable) is
    carried across calls via (pending, pc); the first draw's value is
    implied by the criterion, so only the criterion bit is stored.
    Returns (pos, cpos, outputs, successes, pending, pc).
    """
    pos = start
    cpos = cstart
    out = 0
    suc = 0
    while suc < need:
        if pending == 0:
            if cpos >= cstop or pos >= stop:
                break
            c = crit[cpos]
            x1 = bits[pos]
            cpos += 1
            pos += 1
            if c == 0:
                if x1 == 0:
                    out += 1
                    continue
            else:
                if x1 == 1:
                    out += 1
                    continue
            if pos >= stop:
                pending = 1
                pc = c
                break
            x2 = bits[pos]
            pos += 1
            out += 1
            suc += (1 - x2) if c == 0 else x2
        else:
            if pos >= stop:
                break
            x2 = bits[pos]
            pos += 1
            out += 1
            suc += (1 - x2) if pc == 0 else x2
            pending = 0
    return pos, cpos, out, suc, pending, pc


try:  # compiled parser; the pure-Python one is the behavioral reference
    from numba import njit

    _factory_parse = njit(cache=True)(_factory_parse_py)
except Exception:  # pragma: no cover - exercised only without numba
    _factory_parse = _factory_parse_py


class _CritBits:
    """Buffered fair-coin bits for the factory's criterion choices."""

    __slots__ = ("_gen", "_buf", "_pos", "_len", "_block")

    def __init__(self, gen, block: int = 1 << 12):
        self._gen = gen
        self._buf = np.empty(0, dtype=np.uint8)
        self._pos = 0
        self._len = 0
        self._block = block

    def window(self):
        if self._pos == self._len:
            raw = self._gen.bit_generator.random_raw(self._block)
            self._buf = (raw & np.uint64(1)).astype(np.uint8)
            self._pos = 0
            self._len = self._block
            if self._block < (1 << 16):
                self._block *= 2
        return self._buf, self._pos, self._len

    def advance(self, n: int):
        self._pos += n


def _factory_ibs(source, pop: int, need: int, crit: _CritBits, cap: int) -> tuple[int, int]:
    """Factory outputs from ``pop`` until the need-th success.

    Returns (outputs, raw draws).  Uses the buffered window interface
    when the source has one, the generic per-draw path otherwise.
    """
    window = getattr(source, "_window", None)
    if window is None:
        gen = crit._gen
        outputs = 0
        succ = 0
        raw0 = source.ledger.total(pop)
        while succ < need:
            if source.ledger.total(pop) - raw0 >= cap:
                raise DrawCapExceeded(pop, source.ledger.total(pop) - raw0)
            bit = bernoulli_factory_pq(source, pop, gen)
            outputs += 1
            succ += bit
        return outputs, source.ledger.total(pop) - raw0

    outputs = 0
    succ = 0
    raw = 0
    pending = 0
    pc = 0
    while succ < need:
        bits, pos, stop = window(pop)
        if pos == stop:
            # every remaining success certainly costs two more input
            # draws (one if an output is mid-flight)
            source._grow(pop, 2 * (need - succ) - pending)
            continue
        cbuf, cpos, cstop = crit.window()
        new_pos, new_cpos, out_add, suc_add, pending, pc = _factory_parse(
            bits, pos, stop, cbuf, cpos, cstop, need - succ, pending, pc
        )
        consumed = new_pos - pos
        source._advance(pop, consumed)
        crit.advance(new_cpos - cpos)
        raw += consumed
        outputs += out_add
        succ += suc_add
        if raw >= cap and succ < need:
            raise DrawCapExceeded(pop, raw)
    return outputs, raw


def run_stage1(
    kind: EstimatorKind,
    design: DesignParams,
    source: SampleSource,
    *,
    cap: int = DRAW_CAP,
) -> StageOneResult:
    """Sample the pilot and form W = (n2 - 1/2) / (n1 - 1/2)."""
    if kind.transformed:
        crit1 = _CritBits(source.substream(TAG_FACTORY_POP1))
        crit2 = _CritBits(source.substream(TAG_FACTORY_POP2))
        n1, raw1 = _factory_ibs(source, 0, design.suf1, crit1, cap)
        n2, raw2 = _factory_ibs(source, 1, design.suf2, crit2, cap)
    else:
        n1 = ibs_count(source, 0, design.suf1, cap=cap)
        n2 = ibs_count(source, 1, design.suf2, cap=cap)
        raw1, raw2 = n1, n2
    w = (n2 - design.cdesm2) / (n1 - design.cdesm1)
    return StageOneResult(vasaf1=n1, vasaf2=n2, varaf=w, raw1=raw1, raw2=raw2)


def run_stage2(
    kind: EstimatorKind,
    sus: SecondStageParams,
    source: SampleSource,
    *,
    cap: int = DRAW_CAP,
) -> Stage2Counts:
    """Run the stage-2 inverse binomial samples in the fixed order."""
    s1, s2 = sus.sus1, sus.sus2
    if not kind.transformed:
        m1 = ibs_count(source, 0, s1, cap=cap)
        m2 = ibs_count(source, 1, s2, cap=cap)
        return Stage2Counts(m1=m1, m2=m2)
    a = kind.alpha
    m1p = ibs_count(source, 0, s1, cap=cap)
    m1pp = ibs_failures_count(source, 0, s1 - a, cap=cap)
    m2p = ibs_count(source, 1, s2 - a, cap=cap)
    m2pp = ibs_failures_count(source, 1, s2, cap=cap)
    return Stage2Counts(m1=m1p + m1pp, m2=m2p + m2pp, split=(m1p, m1pp, m2p, m2pp))


def point_estimate(kind: EstimatorKind, sus: SecondStageParams, counts: Stage2Counts) -> float:
    """Unbiased point estimate from stage-2 counts alone."""
    s1, s2 = sus.sus1, sus.sus2
    if kind.name == "rr":
        return (s1 - 1.0) * counts.m2 / (s2 * (counts.m1 - 1.0))
    if kind.name == "lrr":
        return (
            harmonic(counts.m2 - 1)
            - harmonic(counts.m1 - 1)
            + harmonic(s1 - 1)
            - harmonic(s2 - 1)
        )
    m1p, m1pp, m2p, m2pp = counts.split
    if kind.name == "or":
        num = (s1 - 1.0) * (s2 - 1.0) * m1pp * m2p
        den = (s1 - 2.0) * (s2 - 2.0) * (m1p - 1.0) * (m2pp - 1.0)
        return num / den
    # lor
    return (
        harmonic(m1pp - 1)
        - harmonic(m1p - 1)
        + harmonic(m2p - 1)
        - harmonic(m2pp - 1)
    )


def estimate(
    kind: EstimatorKind,
    design: DesignParams,
    source: SampleSource,
    *,
    cap: int = DRAW_CAP,
) -> EstimateResult:
    """Full two-stage run on ``source``; returns the estimate and audit trail."""
    source.ledger.begin_stage(1)
    stage1 = run_stage1(kind, design, source, cap=cap)
    real = solve_sus(design, stage1.varaf)
    sus = round_sus(real, design, source.substream(TAG_ROUNDING))
    source.ledger.begin_stage(2)
    counts = run_stage2(kind, sus, source, cap=cap)
    value = point_estimate(kind, sus, counts)
    groups = getattr(source, "groups", None)
    discarded = source.discarded() if groups is not None else None
    return EstimateResult(
        kind=kind,
        value=value,
        sus1=sus.sus1,
        sus2=sus.sus2,
        sus1_real=real.sus1_real,
        sus2_real=real.sus2_real,
        varaf=stage1.varaf,
        stage1=stage1,
        counts=counts,
        ledger=source.ledger.snapshot(),
        groups=groups,
        discarded=discarded,
    )
