"""Command-line entry point.

Verbs: analyze, cutoffs, simulate, sweep, dorfman, serve, export-strategy.
Exit code 0 iff the command completed; usage and domain errors exit nonzero.
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional, Sequence

from .errors import PoolTestError


def _grid(spec: str) -> List[float]:
    """Parse "start:stop:count" into an inclusive evenly spaced grid."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"grid must be start:stop:count, got {spec!r}")
    try:
        start, stop = float(parts[0]), float(parts[1])
        count = int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {spec!r}")
    if count < 1 or stop < start:
        raise argparse.ArgumentTypeError(f"bad grid {spec!r}")
    if count == 1:
        return [start]
    step = (stop - start) / (count - 1)
    return [start + i * step for i in range(count)]


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pooltest")
    sub = p.add_subparsers(dest="verb", required=True)

    an = sub.add_parser("analyze", help="cost / entropy / optimality report")
    group = an.add_mutually_exclusive_group(required=True)
    group.add_argument("--strategy", action="append",
                       help="strategy id, repeatable")
    group.add_argument("--best", action="store_true",
                       help="report the best basic strategy for each x")
    xg = an.add_mutually_exclusive_group(required=True)
    xg.add_argument("--x", type=float)
    xg.add_argument("--x-grid", type=_grid)
    an.add_argument("--risk-y", type=float, default=None,
                    help="low-risk rate; with a mixed strategy id reports "
                         "the two-group optimality ratio")
    an.add_argument("--format", choices=("csv", "text"), default="text")

    sub.add_parser("cutoffs", help="dominance-boundary table")

    sim = sub.add_parser("simulate", help="Monte Carlo run")
    sim.add_argument("--strategy", required=True)
    sim.add_argument("--x", type=float, required=True)
    sim.add_argument("--y", type=float, default=None)
    sim.add_argument("--persons", type=int, default=10_000)
    sim.add_argument("--reps", type=int, default=10)
    sim.add_argument("--seed", type=int, default=0)

    sw = sub.add_parser("sweep", help="CSV sweep of simulations vs closed form")
    sw.add_argument("--strategy", action="append", required=True)
    sw.add_argument("--x-grid", type=_grid, required=True)
    sw.add_argument("--persons", type=int, default=10_000)
    sw.add_argument("--reps", type=int, default=10)
    sw.add_argument("--seed", type=int, default=0)

    do = sub.add_parser("dorfman", help="two-stage baseline optimum")
    do.add_argument("--p", type=float, required=True)

    sv = sub.add_parser("serve", help="run the session HTTP service")
    sv.add_argument("--port", type=int, default=8000)
    sv.add_argument("--data-dir", default=None)

    ex = sub.add_parser("export-strategy", help="print a strategy as JSON")
    ex.add_argument("--strategy", required=True)
    ex.add_argument("--out", default=None, help="file path (default stdout)")

    return p


def _cmd_analyze(args) -> int:
    from .costs import closed_form_cost, curve_rows, entropy, select_best
    from .mixed import mixed_performance
    xs = args.x_grid if args.x_grid is not None else [args.x]
    if args.best:
        for x in xs:
            print(f"x={x:.12g} best={select_best(x).name} "
                  f"cost={float(best := closed_form_cost(select_best(x), x)):.12g} "
                  f"entropy={entropy(x):.12g} "
                  f"optimality={entropy(x) / float(best):.12g}")
        return 0
    names = args.strategy
    if args.risk_y is not None:
        for name in names:
            for x in xs:
                ratio = mixed_performance(name, x, args.risk_y)
                print(f"strategy={name} x={x:.12g} y={args.risk_y:.12g} "
                      f"optimality={ratio:.12g}")
        return 0
    if args.format == "csv":
        for row in curve_rows(names, xs):
            print(row)
        return 0
    for name in names:
        for x in xs:
            c = float(closed_form_cost(name, x))
            h = entropy(x)
            print(f"strategy={name} x={x:.12g} cost={c:.12g} "
                  f"entropy={h:.12g} optimality={h / c:.12g}")
    return 0


def _cmd_cutoffs(args) -> int:
    from .costs import cutoff
    print("boundary,value")
    for i in range(1, 6):
        print(f"g{i},{cutoff(i):.15f}")
    return 0


def _cmd_simulate(args) -> int:
    from .simulate import gen_population, run_stratified, simulate_replicated
    from .strategy import build_mixed, get_strategy, parse_id
    if args.y is not None:
        from .risk import two_group
        sid = parse_id(args.strategy)
        if sid.kind != "M":
            print("error: --y requires a mixed strategy id", file=sys.stderr)
            return 2
        strategy = build_mixed(args.strategy)
        risk = two_group(args.x, args.y)
        from .strategy import Stratum
        half = args.persons // 2
        pops = {
            Stratum.HIGH_RISK_UPPER: gen_population(
                risk, half, args.seed, Stratum.HIGH_RISK_UPPER),
            Stratum.LOW_RISK_LOWER: gen_population(
                risk, args.persons - half, args.seed + 1,
                Stratum.LOW_RISK_LOWER, start_id=half),
        }
        rep = run_stratified(strategy, risk, pops, args.seed)
        print(f"strategy={args.strategy} x={args.x:.12g} y={args.y:.12g} "
              f"persons={args.persons} seed={args.seed}")
        print(f"total_tests={rep.total_tests} resolved={rep.resolved} "
              f"tests_per_person={rep.tests_per_person:.12g}")
        print(f"misclassifications={rep.misclassifications} "
              f"repool_events={rep.repool_events} "
              f"loop_abort_events={rep.loop_abort_events} "
              f"introduction_failures={rep.introduction_failures} "
              f"leftover={rep.leftover}")
        return 0
    strategy = get_strategy(args.strategy)
    mean, se, agg = simulate_replicated(strategy, args.x, args.persons,
                                        args.reps, args.seed)
    print(f"strategy={args.strategy} x={args.x:.12g} persons={args.persons} "
          f"reps={args.reps} seed={args.seed}")
    print(f"tests_per_person={mean:.12g} std_error={se:.12g}")
    print(f"total_tests={agg.total_tests} resolved={agg.resolved} "
          f"misclassifications={agg.misclassifications} "
          f"repool_events={agg.repool_events} "
          f"loop_abort_events={agg.loop_abort_events} "
          f"introduction_failures={agg.introduction_failures}")
    return 0


def _cmd_sweep(args) -> int:
    from .simulate import sweep
    for row in sweep(args.strategy, args.x_grid, args.reps, args.seed,
                     persons=args.persons):
        print(row)
    return 0


def _cmd_dorfman(args) -> int:
    from .costs import dorfman_cost, dorfman_opt, dorfman_opt_int
    n_real = dorfman_opt(args.p)
    n_int = dorfman_opt_int(args.p)
    print(f"p={args.p:.12g} group_size_real={n_real:.12g} "
          f"group_size={n_int} "
          f"tests_per_person={dorfman_cost(n_int, args.p, n_int) / n_int:.12g}")
    return 0


def _cmd_serve(args) -> int:
    from .server import default_data_dir, serve
    data_dir = args.data_dir or default_data_dir()
    try:
        serve(args.port, data_dir)
    except SystemExit as e:           # uvicorn exits 1 on bind failure
        return int(e.code or 0)
    except OSError as e:
        print(f"error: cannot bind port {args.port}: {e}", file=sys.stderr)
        return 1
    return 0


def _cmd_export(args) -> int:
    from .dsl import serialize
    from .strategy import build_mixed, get_strategy, parse_id
    sid = parse_id(args.strategy)
    strategy = (build_mixed(args.strategy) if sid.kind == "M"
                else get_strategy(args.strategy))
    text = serialize(strategy)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    else:
        print(text)
    return 0


_DISPATCH = {
    "analyze": _cmd_analyze,
    "cutoffs": _cmd_cutoffs,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "dorfman": _cmd_dorfman,
    "serve": _cmd_serve,
    "export-strategy": _cmd_export,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _DISPATCH[args.verb](args)
    except PoolTestError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
