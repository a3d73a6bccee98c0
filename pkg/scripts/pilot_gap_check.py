"""Fast cross-check of the group gap/variance closed forms (rr / lrr only).

For synthetic Bernoulli populations the stopping counts are negative
binomials, so the whole two-stage procedure can be simulated in closed form:
stage-1 sizes, the ratio W, the rounded second-stage targets, stage-2 sizes.
That shortcut is banned inside the estimators (they must consume observation
streams draw by draw) but is exact here and runs millions of replications in
seconds, enough to resolve the percent-level accuracy of

  * E[|n1/m1 - n2/m2|]  (expected_abs_gap_approx),
  * E[max(ceil(n1/m1), ceil(n2/m2))]  (expected_groups_approx),
  * Var[gap] * scale^2 * m1 * m2 against the four-summand decomposition
    (the covariance summand is a bound, so the truth must land inside
    total +- that summand).

Transformed kinds route stage drawing through the Bernoulli factory, whose
raw-input counts are not negative binomial; use the estimator-path scripts
for those.

Usage:
    python3 scripts/pilot_gap_check.py --reps 2000000 --m1 2 --m2 5
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from seqratio.design import derive_design, kind_from_name, round_sus, solve_sus
from seqratio.rng import make_generator
from seqratio.theory import (
    expected_abs_gap_approx,
    expected_groups_approx,
    probabilities_from_normalized,
    variance_decomposition,
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--kind", default="rr", choices=("rr", "lrr"))
    parser.add_argument("--tarvar", type=float, default=0.02)
    parser.add_argument("--m1", type=int, default=2)
    parser.add_argument("--m2", type=int, default=5)
    parser.add_argument("--ratio", type=float, default=1.0)
    parser.add_argument("--scale", type=float, default=1e-3)
    parser.add_argument("--reps", type=int, default=2_000_000)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args(argv)

    kind = kind_from_name(args.kind)
    m1, m2 = args.m1, args.m2
    design = derive_design(args.tarvar, m1 / m2, kind)
    p1, p2 = probabilities_from_normalized(args.ratio, args.scale)
    rng = np.random.default_rng(args.seed)
    round_stream = make_generator(args.seed, 0, 0, tag=3)

    n1 = design.suf1 + rng.negative_binomial(design.suf1, p1, size=args.reps)
    n2 = design.suf2 + rng.negative_binomial(design.suf2, p2, size=args.reps)
    w = (n2 - 0.5) / (n1 - 0.5)
    sus1 = np.empty(args.reps, dtype=np.int64)
    sus2 = np.empty(args.reps, dtype=np.int64)
    for i in range(args.reps):
        sus = round_sus(solve_sus(design, w[i]), design, round_stream)
        sus1[i], sus2[i] = sus.sus1, sus.sus2
    t1 = sus1 + rng.negative_binomial(sus1, p1)
    t2 = sus2 + rng.negative_binomial(sus2, p2)

    gap = t1 / m1 - t2 / m2
    groups = np.maximum(np.ceil(t1 / m1), np.ceil(t2 / m2))
    s = args.scale

    got_gap = np.abs(gap).mean() * s
    want_gap = expected_abs_gap_approx(kind, args.tarvar, m1, m2, args.ratio)
    got_groups = groups.mean() * s
    want_groups = expected_groups_approx(kind, args.tarvar, m1, m2, args.ratio)
    got_var = gap.var() * s * s * m1 * m2
    vs = variance_decomposition(kind, args.tarvar, m1 / m2, args.ratio)
    core = vs.stage1_direct + vs.stage2_conditional + vs.stage2_induced

    print(f"{kind.name} tarvar={args.tarvar} m=({m1},{m2}) ratio={args.ratio} "
          f"scale={s} reps={args.reps}")
    print(f"E|gap|*s      simulated {got_gap:10.4f}   approx {want_gap:10.4f}   "
          f"rel.err {abs(got_gap - want_gap) / want_gap:.3%}")
    print(f"E[G]*s        simulated {got_groups:10.4f}   approx {want_groups:10.4f}   "
          f"rel.err {abs(got_groups - want_groups) / want_groups:.3%}")
    print(f"Var[gap]*s^2*m1*m2  simulated {got_var:10.2f}")
    print(f"  summands: stage1 {vs.stage1_direct:.1f} + stage2 "
          f"{vs.stage2_conditional:.1f} + induced {vs.stage2_induced:.1f} "
          f"= {core:.1f}  (+- covariance bound {vs.covariance_bound:.1f})")
    inside = core - vs.covariance_bound <= got_var <= core + vs.covariance_bound
    print(f"  within the covariance bracket: {inside}")
    return 0 if inside else 1


if __name__ == "__main__":
    sys.exit(main())
