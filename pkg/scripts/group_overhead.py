"""Cost of group sampling: mean group counts and the efficiency price.

Group delivery rounds each population up to whole batches of m1 / m2
observations, so some draws are paid for and never used.  For a few batch
shapes this compares the simulated mean number of groups against the
closed-form approximation, and element-mode efficiency against group-mode
efficiency (the gap is the waste).

Usage:
    python3 scripts/group_overhead.py --reps 30000 --kind rr
"""

from __future__ import annotations

import argparse
import sys

from seqratio import ExperimentSpec, grid_from_ratio_scale, run_experiment
from seqratio.design import KINDS

SHAPES = ((1, 1), (2, 5), (3, 1))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--kind", default="rr", choices=sorted(KINDS))
    parser.add_argument("--tarvars", default="0.01,0.05")
    parser.add_argument("--reps", type=int, default=30_000)
    parser.add_argument("--seed", type=int, default=61)
    args = parser.parse_args(argv)

    tarvars = tuple(float(t) for t in args.tarvars.split(","))
    grid = grid_from_ratio_scale(((1.0, 0.01),))
    element_rows = run_experiment(ExperimentSpec(
        kind=args.kind, tarvars=tarvars, grid=grid, reps=args.reps,
        master_seed=args.seed))
    element_eff = {row.tarvar: row.efficiency for row in element_rows}

    print("# kind m1 m2 tarvar | groups*scale  closed-form  rel.err | "
          "eff(grouped)  eff(element)")
    seed = args.seed + 1
    for shape in SHAPES:
        spec = ExperimentSpec(kind=args.kind, tarvars=tarvars, grid=grid,
                              reps=args.reps, master_seed=seed, groups=shape)
        seed += 1
        for row in run_experiment(spec):
            assert row.identity_violations == 0
            got = row.mean_groups * row.scale
            approx = row.expected_groups_approx
            print(f"{row.kind:3s} {row.m1} {row.m2} {row.tarvar:5.3g} | "
                  f"{got:9.3f} {approx:9.3f} {abs(got - approx) / approx:8.3%} | "
                  f"{row.efficiency:8.4f} {element_eff[row.tarvar]:8.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
