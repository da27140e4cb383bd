"""Run every shipped scenario config and print one summary line per run.

    python scripts/run_catalog.py [--out DIR] [NAME ...]

Traces land in DIR (default ``runs/``). Exits with the worst exit code.
"""

import argparse
import os
import sys
from pathlib import Path

from ricci_pinch import cli_runner as cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help="config names without .cfg (default: all)")
    ap.add_argument("--out", default="runs")
    args = ap.parse_args(argv)

    os.environ[cli.OUTPUT_DIR_ENV] = args.out
    names = args.names or sorted(p.stem for p in CONFIGS.glob("*.cfg"))
    worst = 0
    for name in names:
        try:
            code = cli.execute(cli.load_config(CONFIGS / f"{name}.cfg"))
        except cli.UsageError as exc:
            print(f"{name}: usage error: {exc}", file=sys.stderr)
            code = cli.EXIT_USAGE
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
