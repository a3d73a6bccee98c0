"""Small-probability limit of the pilot sample-size ratio W.

As the success probabilities shrink with their ratio held fixed, W converges
to r times a beta-prime variable with parameters (suf1, suf2).  Draws W at a
small scale and reports the Kolmogorov-Smirnov distance to the limit plus a
few quantiles side by side.

Usage:
    python3 scripts/pilot_ratio_limit.py --draws 100000 --scale 1e-3
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from seqratio.design import kind_from_name, derive_design, KINDS
from seqratio.estimators import run_stage1
from seqratio.rng import StreamPool
from seqratio.sampling import SyntheticSource
from seqratio.theory import beta_prime_limit_cdf, probabilities_from_normalized


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--kind", default="rr", choices=sorted(KINDS))
    parser.add_argument("--tarvar", type=float, default=0.01)
    parser.add_argument("--ratio", type=float, default=1.0)
    parser.add_argument("--scale", type=float, default=1e-3)
    parser.add_argument("--draws", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=90)
    args = parser.parse_args(argv)

    kind = kind_from_name(args.kind)
    design = derive_design(args.tarvar, 1.0, kind)
    p1, p2 = probabilities_from_normalized(args.ratio, args.scale)
    pool = StreamPool(5)
    ws = np.empty(args.draws)
    for rep in range(args.draws):
        src = SyntheticSource(p1, p2, master_seed=args.seed, rep=rep, pool=pool,
                              block_hint=(1 << 14, 1 << 14))
        ws[rep] = run_stage1(kind, design, src).varaf

    ws.sort()
    # limit is stated for the probability ratio; fold the kind's r back out
    cdf = np.array([beta_prime_limit_cdf(w / args.ratio, design.suf1, design.suf2)
                    for w in ws])
    steps = np.arange(1, args.draws + 1) / args.draws
    ks = max(np.max(cdf - (steps - 1.0 / args.draws)), np.max(steps - cdf))
    print(f"suf1={design.suf1} suf2={design.suf2} draws={args.draws}")
    print(f"KS distance to the limit: {ks:.5f}  "
          f"(pure-noise scale ~{1.36 / args.draws ** 0.5:.5f})")
    print("quantile   simulated   limit-implied")
    for q in (0.05, 0.25, 0.5, 0.75, 0.95):
        emp = ws[int(q * args.draws)]
        lo, hi = ws[0], ws[-1]
        for _ in range(80):  # bisect the limit cdf
            mid = 0.5 * (lo + hi)
            if beta_prime_limit_cdf(mid / args.ratio, design.suf1, design.suf2) < q:
                lo = mid
            else:
                hi = mid
        print(f"  {q:4.2f}     {emp:9.5f}   {0.5 * (lo + hi):9.5f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
