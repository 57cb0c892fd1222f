"""Run every experiment in configs/default and print the summary.

    python scripts/run_default_suite.py --out runs/default [--only hexagon-scan,pal-area]

The torsion landscape dominates the runtime (about three minutes).
"""

import argparse
import shutil
import sys
import tempfile
from pathlib import Path

from minwidth_lab.cli import run_all

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config-dir", type=Path, default=ROOT / "configs" / "default")
    p.add_argument("--out", type=Path, default=ROOT / "runs" / "default")
    p.add_argument("--only", default="", help="comma-separated experiment names")
    args = p.parse_args()

    config_dir = args.config_dir
    tmp = None
    if args.only:
        tmp = tempfile.TemporaryDirectory()
        config_dir = Path(tmp.name)
        for name in args.only.split(","):
            shutil.copy(args.config_dir / f"{name}.json", config_dir)

    code, summary = run_all(config_dir, args.out)
    width = max((len(row["experiment"]) for row in summary), default=0)
    for row in summary:
        failed = ", ".join(row["failed_checks"]) or row["error"]
        print(f"{row['experiment']:<{width}}  {row['status']:<5}  {failed}".rstrip())
    print(f"summary written to {args.out / 'summary.json'}")
    if tmp is not None:
        tmp.cleanup()
    return code


if __name__ == "__main__":
    sys.exit(main())
