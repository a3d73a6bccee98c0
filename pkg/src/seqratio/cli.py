"""Command-line interface.

Subcommands:
  design    print the derived design constants for a configuration
  estimate  one estimation run (synthetic populations or external oracle)
  simulate  Monte Carlo grid -> CSV of summary rows
  theory    closed-form bound/approximation curves -> CSV

Exit codes: 0 success; 2 configuration error; 3 oracle protocol error;
4 draw-cap abort.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import fields

from .design import ConfigError, derive_design, kind_from_name
from .estimators import estimate
from .grouping import GroupConfig, GroupedSource, estimate_grouped
from .harness import ExperimentSpec, run_experiment, write_csv
from .sampling import (
    DRAW_CAP,
    DrawCapExceeded,
    ExternalOracleSource,
    ProtocolError,
    SyntheticSource,
)
from .theory import TheoryPoint, probabilities_from_normalized, ratio_param, scale_param, theory_point

__all__ = ["main"]


def _parse_groups(text: str) -> tuple[int, int]:
    try:
        m1, m2 = (int(tok) for tok in text.split(","))
    except ValueError:
        raise ConfigError(f"--groups expects 'm1,m2' integers, got {text!r}")
    return m1, m2


def _parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}")


def _population(args) -> tuple[float, float]:
    if args.p1 is not None or args.p2 is not None:
        if args.p1 is None or args.p2 is None:
            raise ConfigError("--p1 and --p2 must be given together")
        if args.ratio is not None or args.scale is not None:
            raise ConfigError("give either --p1/--p2 or --ratio/--scale, not both")
        return args.p1, args.p2
    if args.ratio is None or args.scale is None:
        raise ConfigError("population required: --p1/--p2 or --ratio/--scale")
    return probabilities_from_normalized(args.ratio, args.scale)


def _tarsara_of(args) -> tuple[float, tuple[int, int] | None]:
    if args.groups is not None:
        g = _parse_groups(args.groups)
        if args.tarsara is not None:
            raise ConfigError("give either --tarsara or --groups, not both")
        return g[0] / g[1], g
    return (args.tarsara if args.tarsara is not None else 1.0), None


def _print_kv(pairs, out):
    for key, value in pairs:
        out.write(f"{key}={value!r}\n" if isinstance(value, str) else f"{key}={value}\n")
    out.flush()


def _cmd_design(args) -> int:
    kind = kind_from_name(args.kind)
    tarsara, _ = _tarsara_of(args)
    design = derive_design(args.tarvar, tarsara, kind)
    _print_kv(
        [
            ("kind", kind.name),
            ("tarvar", design.tarvar),
            ("tarsara", design.tarsara),
            ("suf1", design.suf1),
            ("suf2", design.suf2),
            ("cdemul", design.cdemul),
            ("cdeadd1", design.cdeadd1),
            ("cdeadd2", design.cdeadd2),
            ("cdesm1", design.cdesm1),
            ("cdesm2", design.cdesm2),
            ("susrou", design.susrou),
        ],
        sys.stdout,
    )
    return 0


def _cmd_estimate(args) -> int:
    kind = kind_from_name(args.kind)
    tarsara, groups = _tarsara_of(args)
    design = derive_design(args.tarvar, tarsara, kind)
    if args.external:
        source = ExternalOracleSource(sys.stdin, sys.stdout, aux_seed=args.seed)
    else:
        p1, p2 = _population(args)
        source = SyntheticSource(p1, p2, master_seed=args.seed, cell=args.cell, rep=args.rep)
    if groups is not None:
        source = GroupedSource(source, GroupConfig(*groups))
        res = estimate_grouped(kind, design, source, cap=args.draw_cap)
    else:
        res = estimate(kind, design, source, cap=args.draw_cap)
    pairs = [
        ("kind", kind.name),
        ("estimate", res.value),
        ("sus1", res.sus1),
        ("sus2", res.sus2),
        ("sus1_real", res.sus1_real),
        ("sus2_real", res.sus2_real),
        ("varaf", res.varaf),
        ("stage1_n1", res.stage1.vasaf1),
        ("stage1_n2", res.stage1.vasaf2),
        ("n1", res.ledger.n_pop1),
        ("n2", res.ledger.n_pop2),
    ]
    if res.groups is not None:
        pairs.append(("groups", res.groups))
        pairs.append(("discarded1", res.discarded[0]))
        pairs.append(("discarded2", res.discarded[1]))
    _print_kv(pairs, sys.stdout)
    return 0


def _read_config(path) -> dict:
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    return values


def _spec_from_args(args) -> ExperimentSpec:
    conf = _read_config(args.config) if args.config else {}

    def pick(flag_value, key):
        return flag_value if flag_value is not None else conf.get(key)

    kind = pick(args.kind, "kind")
    if kind is None:
        raise ConfigError("kind required (flag --kind or config key 'kind')")
    tarvars = pick(args.tarvar, "tarvar")
    if tarvars is None:
        raise ConfigError("tarvar required (flag --tarvar or config key 'tarvar')")
    if isinstance(tarvars, str):
        tarvars = _parse_float_list(tarvars)

    groups = pick(args.groups, "groups")
    if isinstance(groups, str):
        groups = _parse_groups(groups)
    tarsara = pick(args.tarsara, "tarsara")
    if groups is not None and args.tarsara is not None:
        raise ConfigError("give either --tarsara or --groups, not both")
    if isinstance(tarsara, str):
        tarsara = float(tarsara)

    p1 = pick(args.p1, "p1")
    p2 = pick(args.p2, "p2")
    ratio = pick(args.ratio, "ratio")
    scale = pick(args.scale, "scale")
    as_list = lambda v: _parse_float_list(v) if isinstance(v, str) else (float(v),)
    if p1 is not None and p2 is not None:
        p1s, p2s = as_list(p1), as_list(p2)
        if len(p1s) != len(p2s):
            raise ConfigError("p1 and p2 lists must have equal length")
        grid = tuple(zip(p1s, p2s))
    elif ratio is not None and scale is not None:
        rs, ss = as_list(ratio), as_list(scale)
        grid = tuple(
            probabilities_from_normalized(r, s) for r in rs for s in ss
        )
    else:
        raise ConfigError("population grid required: p1/p2 or ratio/scale")

    reps = pick(args.reps, "reps")
    if reps is None:
        reps = 10**6 if args.full else 10**5
    return ExperimentSpec(
        kind=kind_from_name(kind) if isinstance(kind, str) else kind,
        tarvars=tarvars,
        grid=grid,
        reps=int(reps),
        master_seed=int(pick(args.seed, "seed") or 0),
        tarsara=float(tarsara) if tarsara is not None else 1.0,
        groups=groups,
        threads=int(pick(args.threads, "threads") or 1),
    )


def _cmd_simulate(args) -> int:
    spec = _spec_from_args(args)
    rows = run_experiment(spec)
    write_csv(rows, args.out if args.out else sys.stdout)
    return 0


def _cmd_theory(args) -> int:
    kind = kind_from_name(args.kind)
    tarsara, groups = _tarsara_of(args)
    if args.p1 is not None:
        p1, p2 = _population(args)
        rat = ratio_param(kind, p1, p2)
        sca = scale_param(kind, p1, p2)
    else:
        if args.ratio is None or args.scale is None:
            raise ConfigError("population required: --p1/--p2 or --ratio/--scale")
        p1, p2 = probabilities_from_normalized(args.ratio, args.scale)
        rat = ratio_param(kind, p1, p2)
        sca = scale_param(kind, p1, p2)
    points = [
        theory_point(
            kind,
            tv,
            tarsara=tarsara,
            groups=groups,
            ratio=rat,
            scale=sca,
            p1=p1,
            p2=p2,
        )
        for tv in _parse_float_list(args.tarvar)
    ]
    cols = [f.name for f in fields(TheoryPoint)]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(cols)
        for pt in points:
            writer.writerow(["" if getattr(pt, c) is None else getattr(pt, c) for c in cols])
    finally:
        if args.out:
            out.close()
    return 0


def _add_population_flags(sub, lists=False):
    # simulate takes comma lists (kept as strings for _spec_from_args to
    # expand into a grid); the single-run commands take one float each
    kind = str if lists else float
    extra = "; comma list allowed" if lists else ""
    sub.add_argument("--p1", type=kind, default=None, help="success probability, population 1" + extra)
    sub.add_argument("--p2", type=kind, default=None, help="success probability, population 2" + extra)
    sub.add_argument("--ratio", type=kind, default=None, help="p1/p2 (with --scale)" + extra)
    sub.add_argument("--scale", type=kind, default=None, help="sqrt(p1*p2) (with --ratio)" + extra)


def _add_design_flags(sub, tarvar_list=False):
    sub.add_argument("--kind", required=False, default=None, choices=["rr", "lrr", "or", "lor"])
    if tarvar_list:
        sub.add_argument("--tarvar", default=None, help="target (relative) MSE; comma list allowed")
    else:
        sub.add_argument("--tarvar", type=float, required=True, help="target (relative) MSE")
    sub.add_argument("--tarsara", type=float, default=None, help="target sample-size ratio E[N1]/E[N2]")
    sub.add_argument("--groups", default=None, help="group sizes m1,m2 (group sampling mode)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqratio",
        description="Two-stage sequential estimation of risk and odds ratios with guaranteed MSE",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_design = sub.add_parser("design", help="print derived design constants")
    _add_design_flags(p_design)
    p_design.set_defaults(func=_cmd_design)

    p_est = sub.add_parser("estimate", help="run one two-stage estimation")
    _add_design_flags(p_est)
    _add_population_flags(p_est)
    p_est.add_argument("--external", action="store_true", help="draw bits via the '? i' line protocol on stdio")
    p_est.add_argument("--seed", type=int, default=0)
    p_est.add_argument("--cell", type=int, default=0)
    p_est.add_argument("--rep", type=int, default=0)
    p_est.add_argument("--draw-cap", type=int, default=DRAW_CAP)
    p_est.set_defaults(func=_cmd_estimate)

    p_sim = sub.add_parser("simulate", help="Monte Carlo grid -> CSV")
    _add_design_flags(p_sim, tarvar_list=True)
    _add_population_flags(p_sim, lists=True)
    p_sim.add_argument("--config", default=None, help="key = value file; CLI flags override")
    p_sim.add_argument("--reps", type=int, default=None)
    p_sim.add_argument("--full", action="store_true", help="default reps 10^6 instead of 10^5")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--threads", type=int, default=None)
    p_sim.add_argument("--out", default=None, help="CSV path (stdout if omitted)")
    p_sim.set_defaults(func=_cmd_simulate)

    p_th = sub.add_parser("theory", help="closed-form curves -> CSV")
    _add_design_flags(p_th, tarvar_list=True)
    _add_population_flags(p_th)
    p_th.add_argument("--out", default=None, help="CSV path (stdout if omitted)")
    p_th.set_defaults(func=_cmd_theory)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "kind", None) is None and args.command in ("design", "estimate", "theory"):
        parser.error(f"{args.command}: --kind is required")
    if getattr(args, "tarvar", None) is None and args.command == "theory":
        parser.error("theory: --tarvar is required")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ProtocolError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return 3
    except DrawCapExceeded as exc:
        print(f"draw cap exceeded: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
