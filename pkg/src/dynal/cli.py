"""Command-line entry point: ``dynal run`` and ``dynal validate``.

Exit codes: 0 success, 1 partial results grid, 2 configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .experiment import (
    ConfigError,
    load_config,
    run_experiment,
    validate_config,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynal",
        description="Active-learning experiment runner with a dynamic "
                    "exploration-exploitation trade-off.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute the experiment grid")
    run_p.add_argument("config", help="YAML experiment config")
    run_p.add_argument("--jobs", type=int, default=1,
                       help="parallel worker processes (default 1)")
    run_p.add_argument("--out", default=None,
                       help="output directory (default $DYNAL_OUT or ./out)")

    val_p = sub.add_parser("validate", help="check a config without running")
    val_p.add_argument("config", help="YAML experiment config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "validate":
        diags = validate_config(args.config)
        for d in diags:
            print(f"error: {d}", file=sys.stderr)
        if diags:
            return 2
        print("config ok")
        return 0

    try:
        config = load_config(args.config)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out_dir = args.out or os.environ.get("DYNAL_OUT", "out")
    code = run_experiment(config, out_dir, jobs=max(1, args.jobs))
    if code != 0:
        print("warning: some runs failed; see manifest.json",
              file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
