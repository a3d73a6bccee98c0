"""Group-quantized acquisition on top of an element source.

Observations often arrive in bundles: one group delivers ``m1`` items
from population 1 and ``m2`` items from population 2, and groups are the
unit that costs anything.  :class:`GroupedSource` queues the per-group
deliveries and serves the estimator element by element, acquiring a new
batch of groups only when a queue runs dry — sized by a provable lower
bound on remaining consumption, so the final group count always equals

    G = max(ceil(N1 / m1), ceil(N2 / m2))

with N1, N2 the element demands.  The per-population bit sequences are
identical to what an ungrouped run on the same inner source would see.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .design import ConfigError, DesignParams, EstimatorKind
from .estimators import EstimateResult, estimate
from .sampling import DRAW_CAP, SampleSource, _BitWindowSource

__all__ = [
    "GroupConfig",
    "GroupedSource",
    "grouped_draw",
    "estimate_grouped",
]

_QUEUE_WARN = 10**8


@dataclass(frozen=True)
class GroupConfig:
    """Per-group delivery sizes for the two populations."""

    m1: int
    m2: int

    def __post_init__(self):
        if self.m1 < 1 or self.m2 < 1:
            raise ConfigError(f"group sizes must be >= 1, got ({self.m1}, {self.m2})")

    @property
    def tarsara(self) -> float:
        return self.m1 / self.m2


class GroupedSource(_BitWindowSource):
    """Serve element draws from whole-group acquisitions.

    ``ledger`` records the element demand (what the estimator consumed);
    the inner source's ledger records raw acquisition, which always
    totals ``groups * m_i`` per population.
    """

    def __init__(self, inner: SampleSource, config: GroupConfig):
        super().__init__()
        self._inner = inner
        self.config = config
        self._m = (config.m1, config.m2)
        self.groups = 0
        self._warned = False

    # acquisition -----------------------------------------------------
    def _refill(self, pop: int, need: int = 1) -> None:
        m = self._m[pop]
        g = -((-max(need, 1)) // m)  # ceil division
        # keep single fetches bounded; under-fetching is always safe
        # (the consumer loops), over-fetching would break the identity
        g = min(g, max(1, (1 << 22) // max(self._m)))
        self._append(0, self._inner.bulk_bits(0, g * self._m[0]))
        self._append(1, self._inner.bulk_bits(1, g * self._m[1]))
        self.groups += g
        if not self._warned:
            queued = max(self._len[0] - self._pos[0], self._len[1] - self._pos[1])
            if queued > _QUEUE_WARN:
                warnings.warn(
                    f"grouped queue holds {queued} undelivered observations; "
                    f"group sizes ({self._m[0]}, {self._m[1]}) are far off the "
                    "consumption ratio",
                    stacklevel=2,
                )
                self._warned = True

    # accounting --------------------------------------------------------
    def demand(self, pop: int) -> int:
        return self.ledger.total(pop)

    def discarded(self) -> tuple[int, int]:
        """Acquired-but-unconsumed observations per population."""
        return (
            self.groups * self._m[0] - self.ledger.total(0),
            self.groups * self._m[1] - self.ledger.total(1),
        )

    # delegation ----------------------------------------------------------
    def substream(self, tag: int):
        return self._inner.substream(tag)

    @property
    def p1(self):
        return self._inner.p1

    @property
    def p2(self):
        return self._inner.p2


def grouped_draw(source: GroupedSource, pop: int) -> int:
    """One element from ``pop``, acquiring a group if its queue is empty."""
    return source.draw(pop)


def estimate_grouped(
    kind: EstimatorKind,
    design: DesignParams,
    source: GroupedSource,
    *,
    cap: int = DRAW_CAP,
) -> EstimateResult:
    """Two-stage run under grouped acquisition.

    The design's target size ratio must match the group shape — that is
    what keeps both queues draining at compatible rates.
    """
    shape = source.config.tarsara
    if abs(design.tarsara - shape) > 1e-12 * max(1.0, shape):
        raise ConfigError(
            f"design targets size ratio {design.tarsara} but groups deliver "
            f"{source.config.m1}:{source.config.m2}"
        )
    return estimate(kind, design, source, cap=cap)
