"""Monte Carlo harness: replication grids, aggregation, CSV emission.

One experiment is a grid of cells (target error x population pair) run
for R replications each.  Replication j of cell c draws its randomness
from streams keyed (master seed, c, j), so per-replication results do
not depend on scheduling.  Partial sums merge in fixed index order:
integer tallies are exact, and float aggregates are bit-identical for
any worker count at a fixed chunk size (chunk size changes them only in
the last ulps, since float addition is not associative).
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

from .design import ConfigError, EstimatorKind, derive_design, kind_from_name
from .estimators import estimate
from .grouping import GroupConfig, GroupedSource, estimate_grouped
from .rng import StreamPool
from .sampling import DRAW_CAP, SyntheticSource
from .theory import (
    avg_size_bound,
    efficiency_bound_element,
    efficiency_group_approx,
    expected_groups_approx,
    probabilities_from_normalized,
    ratio_param,
    scale_param,
    true_value,
)

__all__ = [
    "ExperimentSpec",
    "SummaryRow",
    "grid_from_ratio_scale",
    "run_experiment",
    "empirical_efficiency",
    "write_csv",
    "CSV_COLUMNS",
]

_CHUNK = 2048


def grid_from_ratio_scale(pairs) -> tuple[tuple[float, float], ...]:
    """Convert (ratio, scale) pairs — in raw p-space — to (p1, p2) pairs."""
    return tuple(probabilities_from_normalized(r, s) for r, s in pairs)


@dataclass(frozen=True)
class ExperimentSpec:
    """A replication grid: every tarvar crossed with every (p1, p2)."""

    kind: EstimatorKind
    tarvars: tuple[float, ...]
    grid: tuple[tuple[float, float], ...]
    reps: int
    master_seed: int = 0
    tarsara: float = 1.0
    groups: tuple[int, int] | None = None
    threads: int = 1
    cap: int = DRAW_CAP

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", kind_from_name(self.kind))
        object.__setattr__(self, "tarvars", tuple(float(t) for t in self.tarvars))
        object.__setattr__(self, "grid", tuple((float(a), float(b)) for a, b in self.grid))
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        if not self.tarvars:
            raise ConfigError("tarvar list is empty")
        if not self.grid:
            raise ConfigError("population grid is empty")
        for p1, p2 in self.grid:
            if not 0.0 < p1 < 1.0 or not 0.0 < p2 < 1.0:
                raise ConfigError(f"grid probabilities must lie in (0,1), got ({p1}, {p2})")
        if self.groups is not None:
            g = GroupConfig(*self.groups)
            object.__setattr__(self, "tarsara", g.tarsara)
        elif not self.tarsara > 0.0:
            raise ConfigError(f"tarsara must be positive, got {self.tarsara}")

    @property
    def mode(self) -> str:
        return "group" if self.groups is not None else "element"

    def cells(self):
        idx = 0
        for tarvar in self.tarvars:
            for p1, p2 in self.grid:
                yield idx, tarvar, p1, p2
                idx += 1


@dataclass
class SummaryRow:
    """Aggregated statistics for one cell, with its theory columns."""

    kind: str
    tarvar: float
    tarsara: float
    m1: int | None
    m2: int | None
    p1: float
    p2: float
    ratio: float
    scale: float
    reps: int
    seed: int
    mode: str
    true_value: float
    mean_estimate: float
    bias: float
    mse: float
    se_mean: float | None
    se_mse: float | None
    mean_n1: float
    mean_n2: float
    ratio_n: float
    se_n1: float | None
    se_n2: float | None
    mean_groups: float | None
    mean_sus2_real: float
    sd_sus2_real: float
    efficiency: float | None
    size_bound_n1: float
    size_bound_n2: float
    efficiency_bound: float
    expected_groups_approx: float | None
    efficiency_group_approx: float | None
    total_n1: int
    total_n2: int
    total_groups: int
    identity_violations: int
    sus2_counts: dict = field(default_factory=dict, repr=False)


CSV_COLUMNS = tuple(f.name for f in fields(SummaryRow) if f.name != "sus2_counts")


# Per-process stream pool, reseated for every replication.
_POOL: StreamPool | None = None


def _pool() -> StreamPool:
    global _POOL
    if _POOL is None:
        _POOL = StreamPool(5)
    return _POOL


def _block_hints(kind, tarvar, tarsara, p1, p2) -> tuple[int, int]:
    s = scale_param(kind, p1, p2)
    r = ratio_param(kind, p1, p2)
    hints = []
    for pop in (0, 1):
        expect = avg_size_bound(kind, tarvar, tarsara, r, pop) / s
        hints.append(int(min(max(expect * 0.6, 1 << 9), 1 << 22)))
    return tuple(hints)


def _run_chunk(payload) -> dict:
    (kind_name, tarvar, tarsara, groups, p1, p2, master, cell, start, count, cap) = payload
    kind = kind_from_name(kind_name)
    design = derive_design(tarvar, tarsara, kind)
    theta = true_value(kind, p1, p2)
    hints = _block_hints(kind, tarvar, tarsara, p1, p2)
    pool = _pool()
    gconf = GroupConfig(*groups) if groups is not None else None

    n = 0
    sum_est = 0.0
    sum_est2 = 0.0
    sum_d2 = 0.0
    sum_d4 = 0.0
    tot_n1 = 0
    tot_n2 = 0
    tot_n1sq = 0
    tot_n2sq = 0
    tot_groups = 0
    sum_s2r = 0.0
    sum_s2r2 = 0.0
    counts: Counter = Counter()
    viol = 0

    for rep in range(start, start + count):
        src = SyntheticSource(
            p1, p2, master_seed=master, cell=cell, rep=rep, pool=pool, block_hint=hints
        )
        if gconf is None:
            res = estimate(kind, design, src, cap=cap)
        else:
            res = estimate_grouped(kind, design, GroupedSource(src, gconf), cap=cap)
        est = res.value
        d = est - theta
        if kind.relative:
            d /= theta
        d2 = d * d
        n += 1
        sum_est += est
        sum_est2 += est * est
        sum_d2 += d2
        sum_d4 += d2 * d2
        n1 = res.ledger.n_pop1
        n2 = res.ledger.n_pop2
        tot_n1 += n1
        tot_n2 += n2
        tot_n1sq += n1 * n1
        tot_n2sq += n2 * n2
        sum_s2r += res.sus2_real
        sum_s2r2 += res.sus2_real * res.sus2_real
        counts[res.sus2] += 1
        if gconf is not None:
            tot_groups += res.groups
            expect_g = max(-(-n1 // gconf.m1), -(-n2 // gconf.m2))
            if res.groups != expect_g:
                viol += 1

    return {
        "cell": cell,
        "start": start,
        "n": n,
        "sum_est": sum_est,
        "sum_est2": sum_est2,
        "sum_d2": sum_d2,
        "sum_d4": sum_d4,
        "tot_n1": tot_n1,
        "tot_n2": tot_n2,
        "tot_n1sq": tot_n1sq,
        "tot_n2sq": tot_n2sq,
        "tot_groups": tot_groups,
        "sum_s2r": sum_s2r,
        "sum_s2r2": sum_s2r2,
        "counts": counts,
        "viol": viol,
    }


def _merge(parts: list[dict]) -> dict:
    parts = sorted(parts, key=lambda p: p["start"])
    out = parts[0]
    for p in parts[1:]:
        for k, v in p.items():
            if k in ("cell", "start"):
                continue
            if k == "counts":
                out["counts"] = out["counts"] + v
            else:
                out[k] = out[k] + v
    return out


def empirical_efficiency(row: SummaryRow, mode: str | None = None) -> float | None:
    """Plug sample means and sample MSE into the kind's efficiency formula."""
    if mode is None:
        mode = row.mode
    if not row.mse > 0.0:
        return None
    kind = kind_from_name(row.kind)
    p1, p2 = row.p1, row.p2
    if mode == "group":
        en1 = row.m1 * row.mean_groups
        en2 = row.m2 * row.mean_groups
    else:
        en1, en2 = row.mean_n1, row.mean_n2
    if kind.transformed:
        num = 1.0 / (p1 * (1.0 - p1) * en1) + 1.0 / (p2 * (1.0 - p2) * en2)
    else:
        num = (1.0 - p1) / (p1 * en1) + (1.0 - p2) / (p2 * en2)
    return num / row.mse


def run_experiment(spec: ExperimentSpec) -> list[SummaryRow]:
    """Run every cell for ``spec.reps`` replications; one row per cell."""
    units = []
    for idx, tarvar, p1, p2 in spec.cells():
        start = 0
        while start < spec.reps:
            count = min(_CHUNK, spec.reps - start)
            units.append(
                (
                    spec.kind.name,
                    tarvar,
                    spec.tarsara,
                    spec.groups,
                    p1,
                    p2,
                    spec.master_seed,
                    idx,
                    start,
                    count,
                    spec.cap,
                )
            )
            start += count

    if spec.threads <= 1 or len(units) == 1:
        partials = [_run_chunk(u) for u in units]
    else:
        with ProcessPoolExecutor(max_workers=spec.threads) as pool:
            partials = list(pool.map(_run_chunk, units, chunksize=1))

    by_cell: dict[int, list[dict]] = {}
    for p in partials:
        by_cell.setdefault(p["cell"], []).append(p)

    rows = []
    for idx, tarvar, p1, p2 in spec.cells():
        acc = _merge(by_cell[idx])
        rows.append(_build_row(spec, tarvar, p1, p2, acc))
    return rows


def _build_row(spec: ExperimentSpec, tarvar: float, p1: float, p2: float, acc: dict) -> SummaryRow:
    kind = spec.kind
    r = acc["n"]
    theta = true_value(kind, p1, p2)
    mean_est = acc["sum_est"] / r
    mse = acc["sum_d2"] / r
    mean_n1 = acc["tot_n1"] / r
    mean_n2 = acc["tot_n2"] / r
    if r > 1:
        var_est = max(acc["sum_est2"] / r - mean_est * mean_est, 0.0)
        se_mean = math.sqrt(var_est / r)
        var_d2 = max(acc["sum_d4"] / r - mse * mse, 0.0)
        se_mse = math.sqrt(var_d2 / r)
        se_n1 = math.sqrt(max(acc["tot_n1sq"] / r - mean_n1 * mean_n1, 0.0) / r)
        se_n2 = math.sqrt(max(acc["tot_n2sq"] / r - mean_n2 * mean_n2, 0.0) / r)
    else:
        se_mean = None
        se_mse = None
        se_n1 = None
        se_n2 = None
    mean_s2r = acc["sum_s2r"] / r
    sd_s2r = math.sqrt(max(acc["sum_s2r2"] / r - mean_s2r * mean_s2r, 0.0))
    rat = ratio_param(kind, p1, p2)
    sca = scale_param(kind, p1, p2)
    grouped = spec.groups is not None
    m1, m2 = spec.groups if grouped else (None, None)

    row = SummaryRow(
        kind=kind.name,
        tarvar=tarvar,
        tarsara=spec.tarsara,
        m1=m1,
        m2=m2,
        p1=p1,
        p2=p2,
        ratio=rat,
        scale=sca,
        reps=r,
        seed=spec.master_seed,
        mode=spec.mode,
        true_value=theta,
        mean_estimate=mean_est,
        bias=mean_est - theta,
        mse=mse,
        se_mean=se_mean,
        se_mse=se_mse,
        mean_n1=mean_n1,
        mean_n2=mean_n2,
        ratio_n=mean_n1 / mean_n2,
        se_n1=se_n1,
        se_n2=se_n2,
        mean_groups=(acc["tot_groups"] / r) if grouped else None,
        mean_sus2_real=mean_s2r,
        sd_sus2_real=sd_s2r,
        efficiency=None,
        size_bound_n1=avg_size_bound(kind, tarvar, spec.tarsara, rat, 0),
        size_bound_n2=avg_size_bound(kind, tarvar, spec.tarsara, rat, 1),
        efficiency_bound=efficiency_bound_element(kind, tarvar, spec.tarsara, rat, sca),
        expected_groups_approx=(
            expected_groups_approx(kind, tarvar, m1, m2, rat) if grouped else None
        ),
        efficiency_group_approx=(
            efficiency_group_approx(kind, tarvar, m1, m2, p1, p2) if grouped else None
        ),
        total_n1=acc["tot_n1"],
        total_n2=acc["tot_n2"],
        total_groups=acc["tot_groups"],
        identity_violations=acc["viol"],
        sus2_counts=dict(sorted(acc["counts"].items())),
    )
    row.efficiency = empirical_efficiency(row)
    return row


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.14e}"
    return str(value)


def _write_rows(fh, rows: list[SummaryRow]) -> None:
    writer = csv.writer(fh)
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(getattr(row, col)) for col in CSV_COLUMNS])


def write_csv(rows: list[SummaryRow], path) -> None:
    """Emit rows in fixed column order; refuses to write nothing.

    `path` may also be an open text stream (anything with .write).
    """
    if not rows:
        raise ValueError("no rows to write")
    if hasattr(path, "write"):
        _write_rows(path, rows)
        return
    try:
        with open(path, "w", newline="") as fh:
            _write_rows(fh, rows)
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc
