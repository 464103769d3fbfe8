"""Command-line entry point.

Exit codes: 0 success, 1 output could not be written, 2 invalid input
(command line or scenario), 3 a regularity assumption fails, 4 numerical
failure or an internal cross-check disagreed.
"""

from __future__ import annotations

import argparse
import os
import shutil
import sys

from ..exceptions import (AssumptionViolation, DomainError, EmptyClassError,
                          IllConditionedError, InvalidParameterError, NumericalFailure)
from .figures import FIGURES, reproduce
from .output import format_value, write_summary
from .pipeline import (build_virtuals, evaluate_menu, export_solution, run_brute_force,
                       run_sweep, single_class_benchmark, solve)
from .scenario import ScenarioError, load_scenario

EXIT_OK, EXIT_IO, EXIT_INPUT, EXIT_ASSUMPTION, EXIT_NUMERICAL = 0, 1, 2, 3, 4


def _common(parser):
    parser.add_argument("--scenario", metavar="PATH", help="scenario file")
    parser.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    parser.add_argument("--svg", action="store_true", help="also write SVG charts")
    parser.add_argument("--payg", action="store_true", help="pay-as-you-go pricing")
    parser.add_argument("--set", metavar="SECTION.KEY=VALUE", action="append", default=[],
                        dest="overrides", help="override a scenario setting (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="servicediff",
        description="Optimal differentiated-service pricing for a congested network.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("solve-fixed", help="optimal menu for a fixed capacity")
    p.add_argument("--capacity", type=float, help="network capacity C_M")
    _common(p)

    p = sub.add_parser("solve-variable", help="optimal menu when capacity can be bought")
    p.add_argument("--t", type=float, dest="t", help="expansion cost scale")
    _common(p)

    p = sub.add_parser("menu-eval", help="demand split of the scenario's [menu]")
    _common(p)

    p = sub.add_parser("single-class", help="best single-class offer")
    p.add_argument("--capacity", type=float, help="network capacity C_M")
    _common(p)

    p = sub.add_parser("brute-force", help="grid search over K-class menus")
    p.add_argument("--capacity", type=float, help="network capacity C_M")
    p.add_argument("--classes", type=int, help="number of classes K (1 to 8)")
    _common(p)

    p = sub.add_parser("sweep", help="solve over the scenario's [sweep] values")
    _common(p)

    p = sub.add_parser("reproduce", help="regenerate a figure preset")
    p.add_argument("figure", choices=sorted(FIGURES))
    p.add_argument("--regold", action="store_true",
                   help="copy the CSV outputs into the golden directory")
    p.add_argument("--golden-dir", default=os.path.join("tests", "golden"),
                   help="golden directory (default: tests/golden)")
    _common(p)
    return parser


def _print_summary(summary: dict, stream):
    width = max(len(k) for k in summary)
    for key, value in summary.items():
        stream.write(f"{key:<{width}}  {format_value(value)}\n")


def _scenario(args):
    overrides = list(args.overrides)
    if args.payg:
        overrides.append("pricing.mode=payg")
    for flag, setting in (("capacity", "regime.capacity"), ("t", "regime.t"),
                          ("classes", "menu.classes")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides.append(f"{setting}={value}")
    sc = load_scenario(args.scenario, overrides)
    if args.command == "solve-fixed":
        sc = sc.with_(regime="fixed")
    elif args.command == "solve-variable":
        sc = sc.with_(regime="variable")
    return sc


def run(args, stdout=None) -> int:
    stdout = stdout or sys.stdout
    sc = _scenario(args)
    out = args.out
    os.makedirs(out, exist_ok=True)
    files = []
    cmd = args.command
    if cmd in ("solve-fixed", "solve-variable"):
        sol = solve(sc)
        summary = sol.summary()
        if "benchmark" in sc.artifacts:
            summary.update(single_class_benchmark(sol.virtuals, sol.schedule.W_total
                                                  if cmd == "solve-variable" else sc.capacity))
        files += export_solution(sol, out, sc.artifacts, args.svg)
    elif cmd == "menu-eval":
        if not sc.menu_prices:
            raise ScenarioError("menu-eval needs [menu] prices and congestion",
                                source=args.scenario or "<defaults>")
        summary, more = evaluate_menu(sc, build_virtuals(sc), out)
        files += more
    elif cmd == "single-class":
        vf = build_virtuals(sc)
        summary = {"capacity": sc.capacity, **single_class_benchmark(vf, sc.capacity)}
    elif cmd == "brute-force":
        summary, more = run_brute_force(sc, build_virtuals(sc), out)
        files += more
    elif cmd == "sweep":
        rows, report, more = run_sweep(sc, out, args.svg)
        files += more
        summary = {"parameter": sc.sweep_parameter, "points": len(rows)}
        for line in report:
            stdout.write(line + "\n")
    else:
        target = os.path.join(out, args.figure)
        more, report = reproduce(args.figure, sc, target, args.svg)
        files += more
        summary = {"figure": args.figure, "files": len(more)}
        for line in report:
            stdout.write(line + "\n")
        if args.regold:
            golden = os.path.join(args.golden_dir, args.figure)
            os.makedirs(golden, exist_ok=True)
            for path in more:
                if path.endswith(".csv"):
                    shutil.copyfile(path, os.path.join(golden, os.path.basename(path)))
    files.append(write_summary(os.path.join(out, "summary.csv"), summary))
    _print_summary(summary, stdout)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return run(args)
    except (ScenarioError, InvalidParameterError, EmptyClassError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AssumptionViolation as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (NumericalFailure, IllConditionedError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
