"""``sp-solve`` command line: ``run`` an experiment or ``analyze`` an instance."""
from __future__ import annotations

import argparse
import logging
import sys

from .harness.experiment import (
    AllTrialsDivergedError,
    ConfigError,
    ExperimentConfig,
    analysis_report,
    make_problem,
    run_experiment,
    write_json,
)
from .selection import SEQUENTIAL_RULES

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_problem_args(p):
    p.add_argument("--problem", required=True, choices=["circles", "phase", "linear", "grp"])
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--m", type=int, default=400)
    p.add_argument("--nv", type=int, default=None, help="number of points (grp)")
    p.add_argument("--d", type=int, default=None, help="point dimension (grp)")
    p.add_argument("--edges", type=int, default=None, help="number of distance constraints (grp)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="sp-out")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sp-solve", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a seeded experiment and write CSV, SVG and JSON")
    _add_problem_args(run)
    run.add_argument("--variants", default=",".join(r.value for r in SEQUENTIAL_RULES))
    run.add_argument("--trials", type=int, default=30)
    run.add_argument("--tol", type=float, default=1e-10)
    run.add_argument("--max-cycles", type=int, default=200)
    run.add_argument("--init-radius", type=float, default=0.5)

    ana = sub.add_parser("analyze", help="write the theoretical rate report only")
    _add_problem_args(ana)
    return parser


def _config(args, **extra) -> ExperimentConfig:
    return ExperimentConfig(
        problem=args.problem,
        n=args.n,
        m=args.m,
        n_v=args.nv,
        d=args.d,
        edges=args.edges,
        seed=args.seed,
        out=args.out,
        **extra,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            variants = [v.strip() for v in args.variants.split(",") if v.strip()]
            config = _config(
                args,
                variants=variants,
                trials=args.trials,
                tol=args.tol,
                max_cycles=args.max_cycles,
                init_radius=args.init_radius,
            )
        else:
            # no solves happen, so the trial-count rule for random variants does not apply
            config = _config(args, variants=["cp"])
    except ConfigError as exc:
        print(f"sp-solve: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"sp-solve: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "analyze":
        problem = make_problem(config)
        config.out.mkdir(parents=True, exist_ok=True)
        write_json(config.out / "report.json", analysis_report(problem))
        print(config.out / "report.json")
        return EXIT_OK

    try:
        result = run_experiment(config)
    except AllTrialsDivergedError as exc:
        print(f"sp-solve: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    for note in result.report.get("notes", []):
        print(f"note: {note}")
    for variant, rate in result.report.get("empirical", {}).items():
        print(f"{variant}: empirical rate {rate:.6f}, diverged {result.report['diverged'][variant]}")
    print(f"wrote {len(result.csv_paths)} CSV files, {result.svg_path.name}, {result.report_path.name} to {config.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
