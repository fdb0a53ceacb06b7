"""Command-line entry point.

    bruf <subcommand> [--config PATH] [--seed U64] [--out DIR] [--threads N]

Subcommands: theorem-check, range-demo, tracking, lorenz96. Without
--config the built-in default for the subcommand is used. BRUF_THREADS in
the environment overrides the config's thread count; --threads overrides
both. Exit codes: 0 success, 1 theorem-check tolerance breach, 2 config
error, 3 every run of some configuration diverged.
"""

import argparse
import os
import sys

from bruf.exceptions import ConfigError
from bruf.harness.config import SCENARIOS, default_config, parse_config

EXIT_OK = 0
EXIT_THRESHOLD = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

THREADS_ENV_VAR = "BRUF_THREADS"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bruf",
        description="Recursive-update filtering experiment harness",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SCENARIOS:
        cmd = sub.add_parser(name, help=f"run the {name} campaign")
        cmd.add_argument("--config", help="experiment config file (INI-style)")
        cmd.add_argument("--seed", type=int, help="override the experiment seed")
        cmd.add_argument("--out", help="override the output directory")
        cmd.add_argument("--threads", type=int, help="worker process count")
    return parser


def _load_config(args):
    if args.config:
        config = parse_config(args.config)
        if config.scenario != args.subcommand:
            raise ConfigError(
                f"config scenario {config.scenario!r} does not match "
                f"subcommand {args.subcommand!r}"
            )
    else:
        config = default_config(args.subcommand)
    if args.seed is not None:
        config.seed = int(args.seed)
    if args.out is not None:
        config.output_dir = args.out
    env_threads = os.environ.get(THREADS_ENV_VAR)
    if env_threads is not None:
        try:
            config.threads = int(env_threads)
        except ValueError as err:
            raise ConfigError(f"bad {THREADS_ENV_VAR}: {env_threads!r}") from err
    if args.threads is not None:
        config.threads = int(args.threads)
    if config.threads < 1:
        raise ConfigError("threads must be >= 1")
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    out = config.output_dir
    try:
        if args.subcommand == "theorem-check":
            from bruf.harness.theorem import emit_theorem_artifacts, run_theorem_check

            report = run_theorem_check(config)
            emit_theorem_artifacts(report, config, out)
            print(
                f"theorem-check: max relative deviation {report.max_deviation:.3e} "
                f"(tolerance {report.tolerance:.1e})"
            )
            if not report.passed:
                print("theorem-check FAILED; worst case written for replay", file=sys.stderr)
                return EXIT_THRESHOLD
            return EXIT_OK

        if args.subcommand == "range-demo":
            from bruf.harness.range_demo import emit_range_artifacts, run_range_demo

            results = run_range_demo(config)
            files = emit_range_artifacts(results, config, out)
            print(f"range-demo: wrote {len(files)} files to {out}")
            return EXIT_OK

        if args.subcommand == "tracking":
            from bruf.harness.tracking_run import emit_tracking_artifacts, run_tracking

            results = run_tracking(config)
            files = emit_tracking_artifacts(results, config, out)
            print(f"tracking: {config.n_runs} runs, wrote {len(files)} files to {out}")
            return EXIT_OK

        if args.subcommand == "lorenz96":
            from bruf.harness.lorenz_run import emit_lorenz_artifacts, run_lorenz96

            results = run_lorenz96(config)
            files = emit_lorenz_artifacts(results, config, out)
            print(f"lorenz96: wrote {len(files)} files to {out}")
            if results.all_diverged:
                print(
                    f"lorenz96: every run diverged for {results.all_diverged}",
                    file=sys.stderr,
                )
                return EXIT_DIVERGED
            return EXIT_OK
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    raise AssertionError(f"unhandled subcommand {args.subcommand!r}")


if __name__ == "__main__":
    sys.exit(main())
