"""Command line entry point: ``histavg run`` and ``histavg verify``."""

from __future__ import annotations

import argparse
import sys

from .core import ConfigError
from .harness import ADVERSARIES, ALGOS, ExperimentConfig, load_config_file, run_experiment
from .verify import SUITES, format_table, verify_all


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="histavg", description="Online learning with history-averaged costs.")
    sub = parser.add_subparsers(dest="command", required=True)

    # defaults are None so that config-file values survive unless a flag is given
    run = sub.add_parser("run", help="run a Monte Carlo experiment and write CSVs")
    run.add_argument("--config", help="file of key=value lines (flags override it)")
    run.add_argument("--algo", choices=ALGOS)
    run.add_argument("--adversary", choices=ADVERSARIES)
    run.add_argument("--n", type=int)
    run.add_argument("--T", type=int)
    run.add_argument("--H", type=int)
    run.add_argument("--L", type=int, help="hold period of the cyclic adversary")
    run.add_argument("--runs", type=int)
    run.add_argument("--block", type=int, help="LSA block length (default ceil(sqrt(T H)))")
    run.add_argument("--epsilon", type=float)
    run.add_argument("--delta", type=float)
    run.add_argument("--theta", type=int, help="upper bound on H; switches to the H-agnostic schedule")
    run.add_argument("--M", type=float, help="bound on the sup-norm of the costs")
    run.add_argument("--seed", type=_u64)
    run.add_argument("--raw-sign", dest="raw_sign", action="store_const", const=True,
                     help="use [0, 1] stochastic costs instead of [-1, 0]")
    run.add_argument("--costs", help="cost file for --adversary csv (columns t,g_1,...,g_n)")
    run.add_argument("--workers", type=int, help="worker processes (capped by HISTAVG_THREADS)")
    run.add_argument("--svg", action="store_const", const=True, help="also write regret.svg")
    run.add_argument("--out", help="output directory")

    ver = sub.add_parser("verify", help="run the identity and bound check suites")
    ver.add_argument("--suite", action="append", choices=list(SUITES), help="run only this suite (repeatable)")
    ver.add_argument("--seed", type=_u64, default=0)
    return parser


def _run(args) -> int:
    values = load_config_file(args.config) if args.config else {}
    for key, value in vars(args).items():
        if key not in ("command", "config") and value is not None:
            values[key] = value
    if not values.get("out"):
        raise ConfigError("--out PATH is required (directory for runs.csv and aggregate.csv)")
    config = ExperimentConfig(**values)
    report = run_experiment(config)
    print(report.summary(config))
    return 0


def _verify(args) -> int:
    results = verify_all(args.seed, args.suite)
    print(format_table(results))
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args) if args.command == "run" else _verify(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"histavg: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
