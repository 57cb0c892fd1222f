"""Plots from the CSV outputs of a suite run (see run_default_suite.py).

    python scripts/figures.py runs/default --out runs/default/figures

Missing experiment directories are skipped.
"""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def read(path: Path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    cols = {}
    for key in rows[0]:
        try:
            cols[key] = np.array([float(r[key]) for r in rows])
        except ValueError:
            cols[key] = np.array([r[key] for r in rows])
    return cols


def cheeger(run: Path, ax):
    d = read(run / "cheeger-scan" / "cheeger.csv")
    ax.plot(d["r"], d["h_closed_form"], label="closed form")
    ax.plot(d["r"], d["h_bisection"], "o", ms=3, label="bisection")
    ax.set(xlabel="inradius r", ylabel="h(T_ABC)", title="Cheeger constant")
    ax.legend()


def hexagon(run: Path, ax):
    d = read(run / "hexagon-scan" / "hexagon.csv")
    ax.errorbar(d["r"], d["T_hexagon"], yerr=d["error"], fmt="o-", ms=3, label="T(H_r)")
    ax.plot(d["r"], d["T_six_slices"], "x", label="6 x slice energy")
    ax.set(xlabel="r", ylabel="torsion", title="hexagons H_r")
    ax.legend()


def landscape(run: Path, ax):
    d = read(run / "torsion-landscape" / "landscape.csv")
    sc = ax.scatter(d["gap_AB_deg"], d["gap_BC_deg"], c=d["T"], cmap="viridis", s=30)
    k = int(np.argmin(d["T"]))
    ax.plot(d["gap_AB_deg"][k], d["gap_BC_deg"][k], "r*", ms=12)
    ax.set(xlabel="gap AB (deg)", ylabel="gap BC (deg)", title="T at r = 0.4")
    plt.colorbar(sc, ax=ax)


def slide(run: Path, ax):
    d = read(run / "slide-monotonicity" / "slide.csv")
    ax.plot(d["r"], d["difference"])
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set(xlabel="r", ylabel="u_theta - u_theta'", title="sliding arc, t = %.2f" % d["t"][0])


PANELS = {"cheeger": cheeger, "hexagon": hexagon, "landscape": landscape, "slide": slide}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("run", type=Path)
    p.add_argument("--out", type=Path)
    args = p.parse_args()
    out = args.out or args.run / "figures"
    out.mkdir(parents=True, exist_ok=True)
    for name, draw in PANELS.items():
        fig, ax = plt.subplots(figsize=(5, 4))
        try:
            draw(args.run, ax)
        except FileNotFoundError as exc:
            print(f"skip {name}: {exc.filename} missing")
            plt.close(fig)
            continue
        fig.tight_layout()
        fig.savefig(out / f"{name}.png", dpi=120)
        plt.close(fig)
        print(out / f"{name}.png")


if __name__ == "__main__":
    main()
