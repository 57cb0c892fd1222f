"""Command line entry point.

    minwidth-lab <experiment> [--config FILE] --out DIR [--h-mesh F] [--n-arc N] [--seed N]
    minwidth-lab run-all --config-dir DIR --out DIR

Exit codes: 0 all checks pass, 1 a verification failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import traceback
from pathlib import Path

from .errors import ConfigInvalid, MinWidthError, UnknownExperiment
from .experiments import EXPERIMENTS, ExperimentReport, get_experiment, run

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

log = logging.getLogger("minwidth_lab")

OVERRIDES = {"h_mesh": "--h-mesh", "n_arc": "--n-arc", "seed": "--seed"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="minwidth-lab",
        description="Numerical verification experiments for shapes of prescribed minimal width.",
        epilog="experiments: " + ", ".join(EXPERIMENTS) + ", run-all",
    )
    p.add_argument("experiment", help="experiment name, or run-all")
    p.add_argument("--config", type=Path, help="JSON config (defaults when omitted)")
    p.add_argument("--config-dir", type=Path, help="directory of <experiment>.json files for run-all")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--h-mesh", type=float, dest="h_mesh")
    p.add_argument("--n-arc", type=int, dest="n_arc")
    p.add_argument("--seed", type=int)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(name: str, path: Path | None, overrides: dict):
    exp = get_experiment(name)
    data = json.loads(path.read_text()) if path is not None else {}
    if path is not None and not isinstance(data, dict):
        raise ConfigInvalid([f"{path}: configuration must be a JSON object"])
    fields = exp.config.__dataclass_fields__
    problems = []
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in fields:
            problems.append(f"{OVERRIDES[key]} does not apply to {name}")
        else:
            data[key] = value
    if problems:
        raise ConfigInvalid(problems)
    return exp.config.from_dict(data)


def _print_report(rep: ExperimentReport, out=None) -> None:
    out = out or sys.stdout
    for c in rep.checks:
        status = "PASS" if c.passed else "FAIL"
        extra = ""
        if c.value is not None:
            extra = f" value={c.value:.6g}"
            if c.threshold is not None:
                extra += f" threshold={c.threshold:.6g}"
        print(f"[{status}] {rep.experiment}: {c.name}{extra}", file=out)
    for note in rep.notes:
        print(f"       {rep.experiment}: {note}", file=out)


def run_all(config_dir: str | Path, out_dir: str | Path) -> tuple[int, list[dict]]:
    """Run every ``<experiment>.json`` in ``config_dir``; one failure does not stop the others.

    Writes ``summary.json`` and ``summary.csv`` to ``out_dir`` and returns
    (exit code, summary rows).
    """
    config_dir, out_dir = Path(config_dir), Path(out_dir)
    if not config_dir.is_dir():
        raise ConfigInvalid([f"{config_dir}: not a directory"])
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = []
    code = EXIT_PASS
    for path in sorted(config_dir.glob("*.json")):
        name = path.stem
        row = {"experiment": name, "config": path.name, "status": "", "failed_checks": [], "error": ""}
        try:
            cfg = get_experiment(name).config.load(path)
            rep = run(name, cfg, out_dir / name)
            row["status"] = "pass" if rep.passed else "fail"
            row["failed_checks"] = [c.name for c in rep.checks if not c.passed]
            if not rep.passed:
                code = max(code, EXIT_FAIL)
        except (ConfigInvalid, UnknownExperiment) as exc:
            row["status"] = "error"
            row["error"] = str(exc)
            code = EXIT_USAGE
        except MinWidthError as exc:
            row["status"] = "fail"
            row["error"] = f"{type(exc).__name__}: {exc}"
            code = max(code, EXIT_FAIL)
        summary.append(row)
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["experiment", "status", "failed_checks", "error"])
        for row in summary:
            w.writerow([row["experiment"], row["status"], ";".join(row["failed_checks"]), row["error"]])
    return code, summary


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.experiment == "run-all":
            if args.config_dir is None:
                parser.print_usage(sys.stderr)
                print("minwidth-lab: run-all needs --config-dir", file=sys.stderr)
                return EXIT_USAGE
            code, summary = run_all(args.config_dir, args.out)
            for row in summary:
                print(f"[{row['status'].upper()}] {row['experiment']} {row['error']}".rstrip())
            return code
        cfg = load_config(args.experiment, args.config,
                          {"h_mesh": args.h_mesh, "n_arc": args.n_arc, "seed": args.seed})
        rep = run(args.experiment, cfg, args.out)
    except (UnknownExperiment, ConfigInvalid) as exc:
        print(f"minwidth-lab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"minwidth-lab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MinWidthError as exc:
        if args.verbose:
            traceback.print_exc()
        print(f"minwidth-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _print_report(rep)
    return EXIT_PASS if rep.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
