"""Distribution of the second-stage success target in a near-degenerate design.

With p = (0.4, 0.025) and MSE targets just above/below the point where the
rounded second-stage target flips between 2 and 3, the distribution of sus2
collapses onto one or two integers and the achieved relative MSE drops far
below the configured target.  This script prints the exact profile: mean and
sd of the real-valued solution, the mass on each rounded value, and the
achieved relative MSE.

Usage:
    python3 scripts/second_stage_profile.py --reps 1000000
"""

from __future__ import annotations

import argparse
import sys

from seqratio import ExperimentSpec, run_experiment
from seqratio.design import RR, derive_design


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--reps", type=int, default=1_000_000)
    parser.add_argument("--seed", type=int, default=77)
    parser.add_argument("--tarvars", default="0.562,0.501")
    args = parser.parse_args(argv)

    tarvars = tuple(float(t) for t in args.tarvars.split(","))
    spec = ExperimentSpec(kind="rr", tarvars=tarvars, grid=((0.4, 0.025),),
                          reps=args.reps, master_seed=args.seed)
    for row in run_experiment(spec):
        design = derive_design(row.tarvar, 1.0, RR)
        print(f"tarvar={row.tarvar}  suf1={design.suf1}  suf2={design.suf2}")
        print(f"  sus2 real solution: mean {row.mean_sus2_real:.4f}  "
              f"sd {row.sd_sus2_real:.4f}")
        for value, count in row.sus2_counts.items():
            print(f"  P(sus2 = {value}) = {count / row.reps:.4f}")
        print(f"  relative MSE {row.mse:.4f}  (target {row.tarvar})")
        print(f"  mean sizes n1 {row.mean_n1:.2f}  n2 {row.mean_n2:.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
