"""Bernoulli observation sources and inverse binomial sampling.

Two populations supply independent Bernoulli bits.  Estimation code
never touches probabilities directly; it requests draws through a
:class:`SampleSource` and every single draw is accounted in a
:class:`SampleLedger`, split by estimation stage.

``ibs_count`` / ``ibs_failures_count`` implement the sampling-until-k
loops.  For synthetic sources the underlying bit stream is materialized
in blocks and consumed one bit at a time through cumulative-count scans
— semantically identical to calling ``draw`` in a loop (same bits, same
counts, same ledger) but orders of magnitude faster.  External sources
go through the literal per-draw path.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .rng import (
    TAG_OBS_POP1,
    TAG_OBS_POP2,
    StreamPool,
    make_generator,
)

__all__ = [
    "DRAW_CAP",
    "PopulationId",
    "POP1",
    "POP2",
    "DrawCapExceeded",
    "ProtocolError",
    "SampleLedger",
    "LedgerSnapshot",
    "SampleSource",
    "SyntheticSource",
    "ExternalOracleSource",
    "ibs_count",
    "ibs_failures_count",
]

#: Default per-call draw cap: a single sampling-until-k call aborts after
#: this many draws (guards against a starved external oracle; synthetic
#: sources with p in (0,1) terminate with probability one).
DRAW_CAP = 10**9


class PopulationId(enum.IntEnum):
    """The two observation populations (array index valued)."""

    POP1 = 0
    POP2 = 1


POP1 = PopulationId.POP1
POP2 = PopulationId.POP2


class DrawCapExceeded(RuntimeError):
    """A single sampling loop exceeded its draw cap."""

    def __init__(self, pop: int, draws: int):
        super().__init__(f"draw cap exceeded: {draws} draws from population {int(pop) + 1}")
        self.pop = int(pop)
        self.draws = draws


class ProtocolError(RuntimeError):
    """The external oracle sent something other than a '0' or '1' line."""


@dataclass(frozen=True)
class LedgerSnapshot:
    """Immutable copy of a ledger: per-stage, per-population draw counts."""

    stage1: tuple[int, int]
    stage2: tuple[int, int]

    @property
    def n_pop1(self) -> int:
        return self.stage1[0] + self.stage2[0]

    @property
    def n_pop2(self) -> int:
        return self.stage1[1] + self.stage2[1]


class SampleLedger:
    """Counts every draw by population and estimation stage.

    Counts never decrease; totals are exact integers (no float
    accumulation anywhere in the accounting path).
    """

    __slots__ = ("_stage", "_s1", "_s2")

    def __init__(self):
        self._stage = 1
        self._s1 = [0, 0]
        self._s2 = [0, 0]

    def begin_stage(self, stage: int) -> None:
        if stage not in (1, 2):
            raise ValueError(f"stage must be 1 or 2, got {stage}")
        self._stage = stage

    def add(self, pop: int, n: int) -> None:
        if self._stage == 1:
            self._s1[pop] += n
        else:
            self._s2[pop] += n

    @property
    def n_pop1(self) -> int:
        return self._s1[0] + self._s2[0]

    @property
    def n_pop2(self) -> int:
        return self._s1[1] + self._s2[1]

    def total(self, pop: int) -> int:
        return self._s1[pop] + self._s2[pop]

    def stage_counts(self, stage: int) -> tuple[int, int]:
        src = self._s1 if stage == 1 else self._s2
        return (src[0], src[1])

    def snapshot(self) -> LedgerSnapshot:
        return LedgerSnapshot(stage1=tuple(self._s1), stage2=tuple(self._s2))


class SampleSource:
    """Capability base: two-population Bernoulli draws plus accounting.

    Subclasses must implement ``draw``; everything else has generic
    fallbacks.  Fast buffered subclasses additionally provide
    ``take_successes`` / ``take_failures`` (consumed by the sampling
    loops) and ``_window`` / ``_advance`` / ``_grow`` (consumed by the
    factory parser), all with identical draw-by-draw semantics.
    """

    ledger: SampleLedger

    def draw(self, pop: int) -> int:
        raise NotImplementedError

    def bulk_bits(self, pop: int, n: int) -> np.ndarray:
        """Draw exactly ``n`` bits as an array (generic: n draw calls)."""
        out = np.empty(n, dtype=np.uint8)
        for i in range(n):
            out[i] = self.draw(pop)
        return out

    def substream(self, tag: int):
        """Auxiliary random stream tied to this source's identity."""
        raise NotImplementedError(f"{type(self).__name__} carries no auxiliary streams")


# Buffered-window machinery -------------------------------------------------
#
# A window is a contiguous run of not-yet-consumed bits per population,
# together with inclusive cumulative success (and lazily, failure)
# counts.  Scans locate the k-th success at a searchsorted; refills
# append blocks.  Consumed prefixes are compacted away so memory stays
# proportional to the block size, not the draw count.

_INIT_BLOCK = 1 << 13
_MAX_BLOCK = 1 << 22
_COMPACT_MIN = 1 << 16


class _BitWindowSource(SampleSource):
    """Shared buffered-window implementation; subclasses supply refills."""

    def __init__(self, block_hint: tuple[int, int] | None = None):
        self.ledger = SampleLedger()
        self._bits = [np.empty(0, np.uint8), np.empty(0, np.uint8)]
        self._cums = [np.empty(0, np.int64), np.empty(0, np.int64)]
        self._cumf: list[np.ndarray | None] = [None, None]
        self._track_f = [False, False]
        self._len = [0, 0]
        self._pos = [0, 0]
        if block_hint is None:
            self._block = [_INIT_BLOCK, _INIT_BLOCK]
        else:
            self._block = [
                int(min(max(h, 64), _MAX_BLOCK)) for h in block_hint
            ]

    # -- subclass hook -------------------------------------------------
    def _next_block(self, pop: int, n: int) -> np.ndarray:
        """Produce the next ``n`` bits of the population's stream."""
        raise NotImplementedError

    # -- window plumbing ------------------------------------------------
    def _append(self, pop: int, new: np.ndarray) -> None:
        n = new.shape[0]
        length = self._len[pop]
        bits = self._bits[pop]
        if length + n > bits.shape[0]:
            cap = max(2 * bits.shape[0], length + n)
            grown = np.empty(cap, dtype=np.uint8)
            if length:
                grown[:length] = bits[:length]
            self._bits[pop] = bits = grown
            grown_c = np.empty(cap, dtype=np.int64)
            if length:
                grown_c[:length] = self._cums[pop][:length]
            self._cums[pop] = grown_c
            if self._track_f[pop]:
                grown_f = np.empty(cap, dtype=np.int64)
                if length:
                    grown_f[:length] = self._cumf[pop][:length]
                self._cumf[pop] = grown_f
        bits[length : length + n] = new
        cums = self._cums[pop]
        base = cums[length - 1] if length else 0
        np.cumsum(new, dtype=np.int64, out=cums[length : length + n])
        if base:
            cums[length : length + n] += base
        if self._track_f[pop]:
            cumf = self._cumf[pop]
            basef = cumf[length - 1] if length else 0
            np.subtract(
                np.arange(1, n + 1, dtype=np.int64) + basef,
                cums[length : length + n] - base,
                out=cumf[length : length + n],
            )
        self._len[pop] = length + n

    def _refill(self, pop: int, need: int = 1) -> None:
        # ``need`` is a lower bound on how many more bits this population
        # is certain to consume; subclasses with quantized acquisition
        # (group wrappers) size their fetches by it so they never
        # acquire beyond what the run provably uses.
        n = self._block[pop]
        self._block[pop] = min(2 * n, _MAX_BLOCK)
        if need > n:
            n = min(need, _MAX_BLOCK)
        self._append(pop, self._next_block(pop, n))

    def _maybe_compact(self, pop: int) -> None:
        pos = self._pos[pop]
        if pos < _COMPACT_MIN:
            return
        length = self._len[pop]
        tail = length - pos
        if tail == 0:
            self._len[pop] = 0
            self._pos[pop] = 0
            return
        if pos <= tail:
            return
        bits = self._bits[pop]
        bits[:tail] = bits[pos:length]
        cums = self._cums[pop]
        base = cums[pos - 1]
        cums[:tail] = cums[pos:length] - base
        if self._track_f[pop]:
            cumf = self._cumf[pop]
            basef = cumf[pos - 1]
            cumf[:tail] = cumf[pos:length] - basef
        self._len[pop] = tail
        self._pos[pop] = 0

    def _ensure_cumf(self, pop: int) -> None:
        if self._track_f[pop]:
            return
        self._track_f[pop] = True
        length = self._len[pop]
        cumf = np.empty(self._bits[pop].shape[0], dtype=np.int64)
        if length:
            cumf[:length] = np.arange(1, length + 1, dtype=np.int64) - self._cums[pop][:length]
        self._cumf[pop] = cumf

    # -- factory-parser access ------------------------------------------
    def _window(self, pop: int) -> tuple[np.ndarray, int, int]:
        return self._bits[pop], self._pos[pop], self._len[pop]

    def _advance(self, pop: int, n: int) -> None:
        self._pos[pop] += n
        self.ledger.add(pop, n)

    def _grow(self, pop: int, need: int = 1) -> None:
        self._maybe_compact(pop)
        self._refill(pop, need)

    # -- SampleSource API -------------------------------------------------
    def draw(self, pop: int) -> int:
        if self._pos[pop] == self._len[pop]:
            self._maybe_compact(pop)
            self._refill(pop)
        bit = self._bits[pop][self._pos[pop]]
        self._pos[pop] += 1
        self.ledger.add(pop, 1)
        return int(bit)

    def _scan(self, pop: int, k: int, cap: int, cum_sel: int) -> int:
        """Consume draws until k more target-bits were seen; return #draws."""
        if k < 1:
            raise ValueError(f"need a positive target count, got {k}")
        self._maybe_compact(pop)
        if cum_sel:
            self._ensure_cumf(pop)
        pos = self._pos[pop]
        cums = self._cumf[pop] if cum_sel else self._cums[pop]
        target = (cums[pos - 1] if pos else 0) + k
        while True:
            length = self._len[pop]
            idx = int(np.searchsorted(cums[:length], target, side="left"))
            if idx < length:
                break
            if length - pos >= cap:
                raise DrawCapExceeded(pop, length - pos)
            still = int(target - (cums[length - 1] if length else 0))
            self._refill(pop, still)
            cums = self._cumf[pop] if cum_sel else self._cums[pop]
        n = idx + 1 - pos
        if n > cap:
            raise DrawCapExceeded(pop, n)
        self._pos[pop] = idx + 1
        self.ledger.add(pop, n)
        return n

    def take_successes(self, pop: int, k: int, cap: int = DRAW_CAP) -> int:
        return self._scan(pop, k, cap, 0)

    def take_failures(self, pop: int, k: int, cap: int = DRAW_CAP) -> int:
        return self._scan(pop, k, cap, 1)


class SyntheticSource(_BitWindowSource):
    """Independent Bernoulli(p1), Bernoulli(p2) streams from Philox keys.

    The bit sequence each population sees is a pure function of
    ``(master_seed, cell, rep)`` — independent of block sizes, of how
    draws interleave across populations, and of which consumption path
    (per-draw or scan) is used.
    """

    def __init__(
        self,
        p1: float,
        p2: float,
        *,
        master_seed: int = 0,
        cell: int = 0,
        rep: int = 0,
        pool: StreamPool | None = None,
        block_hint: tuple[int, int] | None = None,
    ):
        if not 0.0 < p1 < 1.0 or not 0.0 < p2 < 1.0:
            raise ValueError(f"success probabilities must lie in (0,1), got ({p1}, {p2})")
        super().__init__(block_hint)
        self.p1 = float(p1)
        self.p2 = float(p2)
        self._key = (master_seed, cell, rep)
        self._pool = pool
        tags = (TAG_OBS_POP1, TAG_OBS_POP2)
        if pool is None:
            self._gen = [make_generator(master_seed, cell, rep, tag=t) for t in tags]
        else:
            self._gen = [pool.seat(t, master_seed, cell, rep, t) for t in tags]
        self._thresh = [
            np.uint64(min(max(round(p * 2.0**64), 1), 2**64 - 1)) for p in (p1, p2)
        ]

    @property
    def ratio(self) -> float:
        """p1 / p2."""
        return self.p1 / self.p2

    @property
    def scale(self) -> float:
        """sqrt(p1 * p2)."""
        return float(np.sqrt(self.p1 * self.p2))

    def _next_block(self, pop: int, n: int) -> np.ndarray:
        raw = self._gen[pop].bit_generator.random_raw(n)
        return (raw < self._thresh[pop]).view(np.uint8)

    def bulk_bits(self, pop: int, n: int) -> np.ndarray:
        # Group wrappers pull whole groups through here; the stream is
        # the same one the window path consumes, so element-mode and
        # group-mode runs see identical per-population bit sequences.
        if n <= _MAX_BLOCK:
            out = self._next_block(pop, n)
        else:
            out = np.empty(n, dtype=np.uint8)
            done = 0
            while done < n:
                step = min(_MAX_BLOCK, n - done)
                out[done : done + step] = self._next_block(pop, step)
                done += step
        self.ledger.add(pop, n)
        return out

    def substream(self, tag: int):
        master, cell, rep = self._key
        if self._pool is not None:
            return self._pool.seat(tag, master, cell, rep, tag)
        return make_generator(master, cell, rep, tag=tag)


class ExternalOracleSource(SampleSource):
    """Line-protocol source: writes ``? 1`` / ``? 2`` requests, reads bits.

    One request line per draw; the reply line must be ``1`` or ``0``.
    Anything else (including end of stream) raises :class:`ProtocolError`
    carrying the partial ledger in its message.
    """

    def __init__(self, reply_in, request_out, *, aux_seed: int = 0):
        self.ledger = SampleLedger()
        self._in = reply_in
        self._out = request_out
        self._aux_seed = aux_seed

    def draw(self, pop: int) -> int:
        self._out.write(f"? {int(pop) + 1}\n")
        self._out.flush()
        line = self._in.readline()
        token = line.strip()
        if token == "1":
            self.ledger.add(pop, 1)
            return 1
        if token == "0":
            self.ledger.add(pop, 1)
            return 0
        s1 = self.ledger.stage_counts(1)
        s2 = self.ledger.stage_counts(2)
        raise ProtocolError(
            f"bad oracle reply {line!r} (ledger so far: stage1={s1}, stage2={s2})"
        )

    def substream(self, tag: int):
        return make_generator(self._aux_seed, 0, 0, tag=tag)


def ibs_count(source: SampleSource, pop: int, r: int, *, cap: int = DRAW_CAP) -> int:
    """Draw from ``pop`` until the r-th success; return the draw count."""
    if r < 1:
        raise ValueError(f"success target must be >= 1, got {r}")
    take = getattr(source, "take_successes", None)
    if take is not None:
        return take(pop, r, cap)
    draws = 0
    succ = 0
    while succ < r:
        if draws >= cap:
            raise DrawCapExceeded(pop, draws)
        draws += 1
        succ += source.draw(pop)
    return draws


def ibs_failures_count(source: SampleSource, pop: int, f: int, *, cap: int = DRAW_CAP) -> int:
    """Draw from ``pop`` until the f-th failure; return the draw count."""
    if f < 1:
        raise ValueError(f"failure target must be >= 1, got {f}")
    take = getattr(source, "take_failures", None)
    if take is not None:
        return take(pop, f, cap)
    draws = 0
    fails = 0
    while fails < f:
        if draws >= cap:
            raise DrawCapExceeded(pop, draws)
        draws += 1
        fails += 1 - source.draw(pop)
    return draws
