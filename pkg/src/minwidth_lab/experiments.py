"""Experiment registry: JSON-configurable runners that write CSV and a pass/fail report."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import time
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import halfdisk as hd
from . import shape_analysis as sa
from .cheeger import cheeger_bisection, cheeger_three_cap
from .errors import ConfigInvalid, UnknownExperiment
from .fem import mesh_polygon, solve_torsion
from .formats import emit_geometry_svg
from .geometry import (
    R_MAX,
    R_MIN,
    ConvexPolygon,
    ThreeCapParams,
    build_hexagon,
    build_three_cap,
    cap_area_f,
    cap_half_angle,
    equilateral_triangle,
    regular_polygon,
)

# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    """Base class; subclasses list their parameters as dataclass fields."""

    def problems(self) -> list[str]:
        return []

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigInvalid(["configuration must be a JSON object"])
        hints = typing.get_type_hints(cls)
        names = {f.name for f in dataclasses.fields(cls)}
        problems = [f"unknown key '{k}'" for k in sorted(data) if k not in names]
        kwargs = {}
        for key in sorted(set(data) & names):
            value, err = _coerce(data[key], hints[key])
            if err:
                problems.append(f"{key}: {err}")
            else:
                kwargs[key] = value
        if problems:
            raise ConfigInvalid(problems)
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigInvalid([f"{path}: invalid JSON ({exc})"]) from exc
        except OSError as exc:
            raise ConfigInvalid([f"{path}: {exc}"]) from exc
        return cls.from_dict(data)

    def validate(self) -> None:
        problems = self.problems()
        if problems:
            raise ConfigInvalid(problems)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(value, hint):
    origin = typing.get_origin(hint)
    if hint is bool:
        return (value, None) if isinstance(value, bool) else (None, "expected true/false")
    if hint is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
        return (value, None) if ok else (None, "expected an integer")
    if hint is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        return (float(value), None) if ok else (None, "expected a number")
    if hint is str:
        return (value, None) if isinstance(value, str) else (None, "expected a string")
    if origin is list:
        if not isinstance(value, list):
            return None, "expected a list"
        (inner,) = typing.get_args(hint)
        out = []
        for v in value:
            c, err = _coerce(v, inner)
            if err:
                return None, f"list entry: {err}"
            out.append(c)
        return out, None
    return None, f"unsupported type {hint}"


def _positive(name, value, out):
    if not value > 0:
        out.append(f"{name}: must be positive")


def _inradius(name, value, out, open_interval=False):
    lo_ok = value > R_MIN if open_interval else value >= R_MIN - 1e-12
    hi_ok = value < R_MAX if open_interval else value <= R_MAX + 1e-12
    if not (lo_ok and hi_ok):
        interval = "(1/3, 1/2)" if open_interval else "[1/3, 1/2]"
        out.append(f"{name}: inradius must lie in {interval}")


def _at_least(name, value, lo, out):
    if value < lo:
        out.append(f"{name}: must be at least {lo}")


@dataclass
class CheegerScanConfig(ExperimentConfig):
    r_points: int = 17
    monotone_points: int = 129
    n_arc: int = 512
    tol: float = 1e-10
    phi: list[float] = field(default_factory=lambda: [0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0])
    max_abs_diff: float = 2e-3

    def problems(self):
        out = []
        _at_least("r_points", self.r_points, 2, out)
        _at_least("monotone_points", self.monotone_points, 2, out)
        _at_least("n_arc", self.n_arc, 1, out)
        if not 0 < self.tol <= 1e-3:
            out.append("tol: must lie in (0, 1e-3]")
        if len(self.phi) != 3:
            out.append("phi: expected three vertex angles")
        return out


@dataclass
class PalAreaConfig(ExperimentConfig):
    n_points: int = 1000
    identity_tol: float = 1e-12

    def problems(self):
        out = []
        _at_least("n_points", self.n_points, 2, out)
        return out


@dataclass
class LandscapeConfig(ExperimentConfig):
    r: float = 0.4
    grid_step_deg: int = 5
    h_mesh: float = 0.04
    levels: int = 4
    n_arc: int = sa.LANDSCAPE_N_ARC
    margin_factor: float = 2.0

    def problems(self):
        out = []
        _inradius("r", self.r, out, open_interval=True)
        if self.grid_step_deg <= 0 or 360 % self.grid_step_deg:
            out.append("grid_step_deg: must be a positive divisor of 360")
        _positive("h_mesh", self.h_mesh, out)
        _at_least("levels", self.levels, 3, out)
        _at_least("n_arc", self.n_arc, 1, out)
        return out


@dataclass
class VertexDerivativeConfig(ExperimentConfig):
    r: float = 0.4
    phi: list[float] = field(default_factory=lambda: [0.0, 2.0, -2.2])
    vertex: str = "A"
    h_mesh: float = 0.02
    n_arc: int = 128
    fd_step: float = 1e-3
    rel_tol: float = 0.05
    symmetric_tol: float = 5e-3

    def problems(self):
        out = []
        _inradius("r", self.r, out)
        if len(self.phi) != 3:
            out.append("phi: expected three vertex angles")
        if self.vertex not in sa.LABELS:
            out.append("vertex: must be A, B or C")
        _positive("h_mesh", self.h_mesh, out)
        _positive("fd_step", self.fd_step, out)
        _at_least("n_arc", self.n_arc, 1, out)
        return out


@dataclass
class TraceCompareConfig(ExperimentConfig):
    r: float = 0.4
    gap_AB_extra: float = 0.05
    gap_CA_extra: float = 0.6
    samples: int = 50
    central: int = 30
    h_mesh: float = 0.02
    levels: int = 3
    n_arc: int = 128

    def problems(self):
        out = []
        _inradius("r", self.r, out, open_interval=True)
        if not 0 < self.gap_AB_extra < self.gap_CA_extra:
            out.append("gap_AB_extra, gap_CA_extra: need 0 < gap_AB_extra < gap_CA_extra")
        _at_least("samples", self.samples, 3, out)
        if not 0 < self.central <= self.samples:
            out.append("central: must lie in [1, samples]")
        _positive("h_mesh", self.h_mesh, out)
        _at_least("levels", self.levels, 2, out)
        _at_least("n_arc", self.n_arc, 1, out)
        return out


@dataclass
class HexagonScanConfig(ExperimentConfig):
    r_points: int = 17
    h_mesh: float = 0.04
    levels: int = 4
    margin_factor: float = 2.0
    slice_rel_tol: float = 0.01

    def problems(self):
        out = []
        _at_least("r_points", self.r_points, 2, out)
        _positive("h_mesh", self.h_mesh, out)
        _at_least("levels", self.levels, 3, out)
        return out


@dataclass
class SliceSymmetryConfig(ExperimentConfig):
    r: float = 0.4
    r_symmetric: float = 0.5
    samples: int = 20
    h_mesh: float = 0.02
    levels: int = 3
    cone_fraction: float = 0.99

    def problems(self):
        out = []
        _inradius("r", self.r, out, open_interval=True)
        _inradius("r_symmetric", self.r_symmetric, out)
        _at_least("samples", self.samples, 1, out)
        _positive("h_mesh", self.h_mesh, out)
        _at_least("levels", self.levels, 2, out)
        return out


@dataclass
class KernelCubicConfig(ExperimentConfig):
    seed: int = 20240101
    n_identity: int = 100
    n_kernel: int = 10000
    n_grid: int = 2000
    identity_tol: float = 1e-12
    r_limit: float = 0.999
    t_limit: float = math.pi / 4.0
    limit_tol: float = 0.01
    unimodal_cases: list[list[float]] = field(
        default_factory=lambda: [[0.5, 1.0], [0.9, 0.4], [0.3, 2.5], [0.99, 1.5], [0.7, 0.05], [0.999, math.pi / 4.0]]
    )

    def problems(self):
        out = []
        for name in ("n_identity", "n_kernel", "n_grid"):
            _at_least(name, getattr(self, name), 1, out)
        if not 0 < self.r_limit < 1:
            out.append("r_limit: must lie in (0, 1)")
        for case in self.unimodal_cases:
            if len(case) != 2 or not (0 < case[0] < 1 and 0 < case[1] < math.pi):
                out.append(f"unimodal_cases: bad entry {case}")
        return out


@dataclass
class SlideMonotonicityConfig(ExperimentConfig):
    t: float = 0.3
    theta: float = 0.8
    theta_prime: float = 1.2
    delta: float = 0.3
    r_min: float = 0.05
    r_max: float = 0.999
    r_points: int = 200
    with_psi: bool = True
    h_mesh: float = 0.02
    cross_check_tol: float = 1e-3

    def problems(self):
        out = []
        if not 0 < self.t < self.theta < self.theta_prime <= math.pi - self.delta:
            out.append("t, theta, theta_prime, delta: need 0 < t < theta < theta_prime <= pi - delta")
        if not 0 < self.r_min < self.r_max <= hd.R_CAP:
            out.append(f"r_min, r_max: need 0 < r_min < r_max <= {hd.R_CAP}")
        _at_least("r_points", self.r_points, 2, out)
        _positive("h_mesh", self.h_mesh, out)
        return out


@dataclass
class ConvhullSlideConfig(ExperimentConfig):
    z_A: float = 2.0
    theta: float = 1.3
    theta_prime: float = 1.6
    delta: float = 0.3
    h_mesh: float = 0.02
    n_arc: int = hd.N_ARC

    def problems(self):
        out = []
        if not self.z_A > 1:
            out.append("z_A: must exceed 1")
        elif not math.acos(1.0 / self.z_A) < self.theta:
            out.append("theta: must exceed the tangency angle arccos(1/z_A)")
        if not self.theta < self.theta_prime <= math.pi - self.delta:
            out.append("theta_prime: need theta < theta_prime <= pi - delta")
        _positive("delta", self.delta, out)
        _positive("h_mesh", self.h_mesh, out)
        _at_least("n_arc", self.n_arc, 1, out)
        return out


@dataclass
class ConvergenceConfig(ExperimentConfig):
    h_values: list[float] = field(default_factory=lambda: [0.08, 0.04, 0.02, 0.01])
    disk_radius: float = 0.5
    disk_check_h: float = 0.02
    triangle_h: float = 0.01
    rel_tol: float = 0.01
    order_min: float = 1.8
    order_max: float = 2.2

    def problems(self):
        out = []
        if len(self.h_values) < 2 or any(h <= 0 for h in self.h_values):
            out.append("h_values: need at least two positive mesh sizes")
        if self.disk_check_h not in self.h_values:
            out.append("disk_check_h: must be one of h_values")
        _positive("disk_radius", self.disk_radius, out)
        _positive("triangle_h", self.triangle_h, out)
        return out


# ---------------------------------------------------------------------------
# reports


@dataclass
class Check:
    name: str
    passed: bool
    value: float | None = None
    threshold: float | None = None
    detail: str = ""


@dataclass
class ExperimentReport:
    experiment: str
    verifies: str
    checks: list[Check] = field(default_factory=list)
    files: list[str] = field(default_factory=list)
    wall_time: float = 0.0
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str, passed, value=None, threshold=None, detail: str = "") -> Check:
        c = Check(name, bool(passed), _plain(value), _plain(threshold), detail)
        self.checks.append(c)
        return c

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "experiment": self.experiment,
            "verifies": self.verifies,
            "status": "pass" if self.passed else "fail",
            "checks": [dataclasses.asdict(c) for c in self.checks],
            "files": list(self.files),
            "notes": list(self.notes),
        }
        if timing:
            d["wall_time"] = round(self.wall_time, 3)
        return d


def _plain(x):
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    return float(x)


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


class Output:
    """Writes files into one experiment directory and records them on the report."""

    def __init__(self, out_dir: Path, report: ExperimentReport):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.report = report

    def csv(self, name: str, header: list[str], rows) -> Path:
        path = self.dir / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.report.files.append(name)
        return path

    def svg(self, name: str, polygons, points=()) -> Path:
        path = self.dir / name
        emit_geometry_svg(polygons, path, points=points)
        self.report.files.append(name)
        return path


# ---------------------------------------------------------------------------
# runners


def run_cheeger_scan(cfg: CheegerScanConfig, out: Output) -> None:
    rep = out.report
    rows = []
    for r in np.linspace(R_MIN, R_MAX, cfg.r_points):
        params = ThreeCapParams(float(r), *cfg.phi, n_arc=cfg.n_arc)
        P = build_three_cap(params)
        hc = cheeger_three_cap(r).h
        hb = cheeger_bisection(P, cfg.tol).h
        rows.append((r, P.area, hc, hb, abs(hc - hb)))
    out.csv("cheeger.csv", ["r", "area", "h_closed_form", "h_bisection", "abs_diff"], rows)
    worst = max(row[4] for row in rows)
    rep.check("bisection matches closed form", worst <= cfg.max_abs_diff, worst, cfg.max_abs_diff)
    h = [cheeger_three_cap(r).h for r in np.linspace(R_MIN, R_MAX, cfg.monotone_points)]
    step = float(np.max(np.diff(h)))
    rep.check("h strictly decreasing in r", step < 0, step, 0.0)
    rep.check("h closed form at r=1/3", abs(h[0] - (3 + math.sqrt(math.pi * math.sqrt(3)))) <= 1e-9,
              h[0], 3 + math.sqrt(math.pi * math.sqrt(3)))
    rep.check("h closed form at r=1/2", abs(h[-1] - 4.0) <= 1e-12, h[-1], 4.0)
    square = ConvexPolygon(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))
    hs = cheeger_bisection(square, cfg.tol).h
    rep.check("unit square h = 2 + sqrt(pi)", abs(hs - (2 + math.sqrt(math.pi))) <= 1e-6, hs, 2 + math.sqrt(math.pi))
    out.svg("three_cap_r0.4.svg", build_three_cap(ThreeCapParams(0.4, *cfg.phi, n_arc=64)))


def run_pal_area(cfg: PalAreaConfig, out: Output) -> None:
    rep = out.report
    grid = np.linspace(R_MIN, R_MAX, cfg.n_points + 2)
    scan = sa.pal_area_scan(grid)
    out.csv("pal_area.csv", ["r", "f", "fprime"], zip(scan.r, scan.f, scan.fprime))
    f0, f1 = scan.f[0], scan.f[-1]
    rep.check("f(1/3) = sqrt(3)/3", abs(f0 - math.sqrt(3) / 3) <= cfg.identity_tol, f0, math.sqrt(3) / 3)
    rep.check("f(1/2) = pi/4", abs(f1 - math.pi / 4) <= cfg.identity_tol, f1, math.pi / 4)
    interior = scan.fprime[1:-1]
    rep.check("f' > 0 on interior grid", np.all(interior > 0), interior.min(), 0.0)
    rep.check("argmin at r = 1/3", scan.argmin == grid[0], scan.argmin, R_MIN)


def run_landscape(cfg: LandscapeConfig, out: Output) -> None:
    rep = out.report
    land = sa.fixed_inradius_landscape(cfg.r, cfg.grid_step_deg, cfg.h_mesh, cfg.levels, cfg.n_arc)
    eq = land.row((120, 120, 120)) if (120, 120, 120) in [r.gaps_deg for r in land.rows] else None
    rows = []
    worst_ratio = math.inf
    for row in land.rows:
        excess = row.T - eq.T if eq else math.nan
        rows.append((*row.gaps_deg, row.phi_B, row.phi_C, row.T, row.error, excess))
        if eq and row is not eq:
            need = cfg.margin_factor * max(row.error, eq.error)
            worst_ratio = min(worst_ratio, excess / need)
    out.csv("landscape.csv",
            ["gap_AB_deg", "gap_BC_deg", "gap_CA_deg", "phi_B", "phi_C", "T", "error", "excess_over_equilateral"],
            rows)
    if land.skipped:
        out.csv("landscape_skipped.csv", ["gap_AB_deg", "gap_BC_deg", "gap_CA_deg"], land.skipped)
    rep.check("equilateral on grid", eq is not None)
    amin = land.argmin
    rep.check("argmin is equilateral", amin.gaps_deg == (120, 120, 120), detail=str(amin.gaps_deg))
    rep.check("every other point exceeds equilateral by margin", worst_ratio > 1.0, worst_ratio, 1.0,
              f"excess / ({cfg.margin_factor} x error)")
    lo, hi = sa.inclusion_bounds(cfg.r)
    Ts = [row.T for row in land.rows]
    rep.check("T between disks of radius r and 1-r", lo <= min(Ts) and max(Ts) <= hi)
    spread = max((s - cfg.margin_factor * e for _, s, e in land.symmetry_spread()), default=0.0)
    rep.check("T invariant under gap permutations", spread <= 0.0, spread, 0.0, "spread - factor x error")
    rep.notes.append("observed: the equilateral configuration minimizes T at fixed inradius")
    out.svg("landscape_argmin.svg",
            build_three_cap(ThreeCapParams(cfg.r, 0.0, amin.phi_B, amin.phi_C, n_arc=32)))


def run_vertex_derivative(cfg: VertexDerivativeConfig, out: Output) -> None:
    rep = out.report
    params = ThreeCapParams(cfg.r, *cfg.phi, n_arc=cfg.n_arc)
    eq = ThreeCapParams.equilateral(cfg.r, cfg.n_arc)
    vd = sa.vertex_shape_derivative(params, cfg.vertex, cfg.h_mesh, cfg.fd_step)
    ve = sa.vertex_shape_derivative(eq, cfg.vertex, cfg.h_mesh, cfg.fd_step)
    header = ["configuration", "vertex", "T", "dT_dphi_flux", "dT_dphi_fd", "dT_dphi_fd_double_step",
              "relative_disagreement", "dT_toward_far_neighbour"]
    out.csv("vertex_derivative.csv", header, [
        (name, v.vertex, v.T, v.dT_dphi_flux, v.dT_dphi_fd, v.dT_dphi_fd_double_step,
         v.relative_disagreement, v.toward_far_neighbour)
        for name, v in (("test", vd), ("equilateral", ve))
    ])
    rep.check("flux and FD agree", vd.relative_disagreement <= cfg.rel_tol, vd.relative_disagreement, cfg.rel_tol)
    rep.check("moving toward the farther neighbour decreases T", vd.toward_far_neighbour < 0,
              vd.toward_far_neighbour, 0.0)
    rep.check("equilateral derivative vanishes", abs(ve.dT_dphi_flux) <= cfg.symmetric_tol * ve.T,
              abs(ve.dT_dphi_flux), cfg.symmetric_tol * ve.T)
    out.svg("vertex_derivative.svg", build_three_cap(ThreeCapParams(cfg.r, *cfg.phi, n_arc=32)))


def trace_params(cfg: TraceCompareConfig) -> ThreeCapParams:
    a = cap_half_angle(cfg.r)
    return ThreeCapParams(cfg.r, 0.0, 2 * a + cfg.gap_AB_extra, -(2 * a + cfg.gap_CA_extra), n_arc=cfg.n_arc)


def run_trace_compare(cfg: TraceCompareConfig, out: Output) -> None:
    rep = out.report
    tab = sa.trace_compare_BC(trace_params(cfg), cfg.samples, cfg.h_mesh, cfg.levels)
    sym = sa.trace_compare_BC(ThreeCapParams.equilateral(cfg.r, cfg.n_arc), cfg.samples, cfg.h_mesh, cfg.levels)
    rows = [("test", *row) for row in tab.rows()] + [("equilateral", *row) for row in sym.rows()]
    out.csv("trace_compare.csv", ["configuration", "t", "u_B", "u_C", "difference", "eps_disc"], rows)
    d, eps = tab.difference, tab.error[0]
    lo = (cfg.samples - cfg.central) // 2
    central = d[lo : lo + cfg.central]
    rep.check("difference >= -eps at all samples", np.all(d >= -eps), d.min(), -eps)
    rep.check("difference >= +eps at central samples", np.all(central >= eps), central.min(), eps)
    ds, es = sym.difference, sym.error[0]
    rep.check("equilateral differences within 2 eps", np.all(np.abs(ds) <= 2 * es), np.abs(ds).max(), 2 * es)
    out.svg("trace_compare.svg", build_three_cap(sa.normalize_abc(trace_params(cfg))), points=tab.points)


def run_hexagon_scan(cfg: HexagonScanConfig, out: Output) -> None:
    rep = out.report
    rows = sa.hexagon_scan(np.linspace(R_MIN, R_MAX, cfg.r_points), cfg.h_mesh, cfg.levels)
    out.csv("hexagon.csv", ["r", "T_hexagon", "error", "T_six_slices", "slice_error", "relative_gap"],
            [(x.r, x.T, x.error, x.slice_T, x.slice_error, x.slice_relative_gap) for x in rows])
    ratios = [(b.T - a.T) / (cfg.margin_factor * max(a.error, b.error)) for a, b in zip(rows, rows[1:])]
    rep.check("T(H_r) strictly increasing with margin", min(ratios) > 1.0, min(ratios), 1.0,
              f"step / ({cfg.margin_factor} x error)")
    gap = max(x.slice_relative_gap for x in rows)
    rep.check("six slices reproduce the hexagon", gap <= cfg.slice_rel_tol, gap, cfg.slice_rel_tol)
    out.svg("hexagon_in_three_cap.svg",
            [build_three_cap(ThreeCapParams.equilateral(0.4, n_arc=32)), build_hexagon(0.4)])


def run_slice_symmetry(cfg: SliceSymmetryConfig, out: Output) -> None:
    rep = out.report
    tab = sa.slice_flux_symmetry(cfg.r, cfg.samples, cfg.h_mesh, cfg.levels)
    sym = sa.slice_flux_symmetry(cfg.r_symmetric, cfg.samples, cfg.h_mesh, cfg.levels)
    rows = [(cfg.r, *row) for row in tab.rows()] + [(cfg.r_symmetric, *row) for row in sym.rows()]
    out.csv("slice_symmetry.csv", ["r", "distance_to_midpoint", "flux2_U", "flux2_V", "difference", "error"], rows)
    rep.check(f"differences positive beyond error at r={cfg.r:g}", tab.positive_beyond_error(),
              float(np.min(tab.difference - tab.error)), 0.0, "min(difference - error)")
    rep.check(f"differences within error at r={cfg.r_symmetric:g}",
              cfg.r_symmetric < R_MAX - 1e-12 or sym.zero_within_error(),
              float(np.max(np.abs(sym.difference))), float(sym.error[0]))
    frac = sa.gradient_cone_fraction(cfg.r, cfg.h_mesh)
    rep.notes.append(f"diagnostic: gradient-cone fraction {frac:.4f} (target {cfg.cone_fraction})")


def kernel_cubic_checks(cfg: KernelCubicConfig, rep: ExperimentReport):
    rng = np.random.default_rng(cfg.seed)
    rows = []
    worst = 0.0
    sign_changes_ok = True
    for _ in range(cfg.n_identity):
        C = float(rng.uniform(1.0, 10.0))
        t = float(rng.uniform(1e-3, math.pi - 1e-3))
        c = math.cos(t)
        res = (
            abs(hd.critical_cubic(-1.0, C, t) - (C + c) ** 2),
            abs(hd.critical_cubic(1.0, C, t) + (C - c) ** 2),
            abs(hd.critical_cubic(c, C, t) + c * (C - 1.0) ** 2),
        )
        worst = max(worst, max(res))
        X0, s0 = hd.cubic_root_X0(C, t)
        grid = np.linspace(-1.0, 1.0, 2001)
        signs = np.sign(hd.critical_cubic(grid, C, t))
        changes = np.count_nonzero(np.diff(signs[signs != 0]))
        sign_changes_ok &= changes == 1
        rows.append((C, t, X0, s0, math.cos(t), max(res)))
    rep.check("endpoint identities", worst <= cfg.identity_tol, worst, cfg.identity_tol)
    rep.check("unique sign change in [-1, 1]", sign_changes_ok)

    r = cfg.r_limit
    _, s0 = hd.cubic_root_X0((1 + r * r) / (2 * r), cfg.t_limit)
    rep.check("s0 -> t as r -> 1", abs(s0 - cfg.t_limit) <= cfg.limit_tol, abs(s0 - cfg.t_limit), cfg.limit_tol)

    rr = rng.uniform(0.0, 0.9999, cfg.n_kernel)
    tt = rng.uniform(0.0, math.pi, cfg.n_kernel)
    ss = rng.uniform(0.0, math.pi, cfg.n_kernel)
    q = hd.kernel_values(rr, tt, ss)
    qc = hd.kernel_Q_complex(rr, tt, ss)
    tol = hd.form_agreement_tol(rr, tt, ss)
    rep.check("Q >= 0 on random samples", np.all(q >= 0.0), float(np.min(q)), 0.0)
    rep.check("algebraic forms agree", np.all(np.abs(q - qc) <= tol), float(np.max(np.abs(q - qc) / tol)), 1.0,
              "gap / conditioning-aware tolerance")
    rep.check("odd under reflection s -> -s", np.all(hd.kernel_values(rr, tt, -ss) == -q))

    uni_rows = []
    all_uni = True
    for r, t in cfg.unimodal_cases:
        ok, s0, idx = unimodal(r, t, cfg.n_grid)
        all_uni &= ok
        uni_rows.append((r, t, s0, idx, ok))
    rep.check("s -> Q unimodal about s0", all_uni)
    return rows, uni_rows


def unimodal(r: float, t: float, n_grid: int) -> tuple[bool, float, int]:
    """Centered differences of s -> Q(r,t,s) are positive before s0 and negative after it."""
    C = (1 + r * r) / (2 * r)
    _, s0 = hd.cubic_root_X0(C, t)
    s = np.linspace(0.0, math.pi, n_grid)
    q = hd.kernel_values(r, t, s)
    dq = (q[2:] - q[:-2])
    mid = s[1:-1]
    h = s[1] - s[0]
    before = mid < s0 - h
    after = mid > s0 + h
    ok = bool(np.all(dq[before] > 0) and np.all(dq[after] < 0))
    return ok, s0, int(np.argmax(q))


def run_kernel_cubic(cfg: KernelCubicConfig, out: Output) -> None:
    rows, uni = kernel_cubic_checks(cfg, out.report)
    out.csv("kernel_cubic.csv", ["C", "t", "X0", "s0", "cos_t", "identity_residual"], rows)
    out.csv("kernel_unimodal.csv", ["r", "t", "s0", "argmax_index", "unimodal"], uni)


def run_slide_monotonicity(cfg: SlideMonotonicityConfig, out: Output) -> None:
    rep = out.report
    grid = np.linspace(cfg.r_min, cfg.r_max, cfg.r_points)
    header = ["r", "t", "u_theta", "u_theta_prime", "difference"]
    base = hd.slide_monotonicity(cfg.t, cfg.theta, cfg.theta_prime, cfg.delta, r_grid=grid)
    out.csv("slide.csv", header, base.rows())
    thr = base.threshold
    rep.check("u_theta' < u_theta above a threshold < 1", thr is not None and thr < 1.0,
              thr if thr is not None else math.nan, 1.0)
    rep.notes += base.notes
    rep.notes.append(f"threshold r_t = {thr} at t = {cfg.t}")
    if cfg.with_psi:
        t = cfg.t
        extra = hd.slide_monotonicity(t, cfg.theta, cfg.theta_prime, cfg.delta, r_grid=grid,
                                      psi=lambda x: x * (t - x))
        out.csv("slide_psi.csv", header, extra.rows())
        rep.check("same threshold behaviour with extra data psi", extra.threshold is not None and extra.threshold < 1.0,
                  extra.threshold if extra.threshold is not None else math.nan, 1.0)
    same = hd.slide_monotonicity(cfg.t, cfg.theta, cfg.theta, cfg.delta, r_grid=grid[:10])
    rep.check("theta' = theta gives zero difference", np.all(same.difference == 0.0))
    cc = hd.fem_cross_check(hd.SlidingArcProblem(cfg.theta, cfg.delta), h_mesh=cfg.h_mesh)
    out.csv("slide_fem_cross_check.csv", ["r", "t", "u_quadrature", "u_fem", "abs_diff"],
            [(p[0], p[1], a, b, abs(a - b)) for p, a, b in zip(cc.points, cc.quadrature, cc.fem)])
    rep.check("quadrature matches FEM", cc.max_abs_diff <= cfg.cross_check_tol, cc.max_abs_diff, cfg.cross_check_tol)


def run_convhull_slide(cfg: ConvhullSlideConfig, out: Output) -> None:
    rep = out.report
    res = hd.convhull_slide_experiment(cfg.z_A, cfg.theta, cfg.theta_prime, cfg.delta, h_mesh=cfg.h_mesh,
                                       n_arc=cfg.n_arc)
    cap, flux = res.cap, res.flux
    out.csv("convhull_cap.csv", ["index", "x", "y", "u_theta", "u_theta_prime", "difference", "error"],
            [(int(p), *xy, a, b, d, e) for (p, a, b, d, e), xy in zip(cap.rows(), cap.points)])
    out.csv("convhull_flux.csv", ["fraction", "x", "y", "flux2_theta", "flux2_theta_prime", "difference", "error"],
            [(p, *xy, a, b, d, e) for (p, a, b, d, e), xy in zip(flux.rows(), flux.points)])
    rep.check("cap differences positive beyond error", cap.positive_beyond_error(),
              float(np.min(cap.difference - cap.error)), 0.0, "min(difference - error)")
    rep.check("squared flux on AT larger for theta", flux.positive_beyond_error(),
              float(np.min(flux.difference - flux.error)), 0.0, "min(difference - error)")
    out.svg("convhull.svg", hd.convhull_polygon(cfg.z_A, 64), points=cap.points)


def disk_polygon(radius: float, h: float) -> ConvexPolygon:
    """Inscribed regular polygon with chords close to h, so geometric and FEM errors match."""
    return regular_polygon(max(8, math.ceil(2 * math.pi * radius / h)), radius)


def convergence_rows(cfg: ConvergenceConfig):
    exact = math.pi * cfg.disk_radius**4 / 8.0
    rows = []
    for h in cfg.h_values:
        mesh = mesh_polygon(disk_polygon(cfg.disk_radius, h), h)
        T = solve_torsion(mesh).T
        rows.append(("disk", h, mesh.n_nodes, T, exact, abs(T - exact) / exact))
    tri_exact = 1.0 / (60.0 * math.sqrt(3.0))
    mesh = mesh_polygon(equilateral_triangle(1.0), cfg.triangle_h)
    T = solve_torsion(mesh).T
    rows.append(("triangle", cfg.triangle_h, mesh.n_nodes, T, tri_exact, abs(T - tri_exact) / tri_exact))
    return rows


def fitted_order(h, err) -> float:
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


def run_convergence(cfg: ConvergenceConfig, out: Output) -> None:
    rep = out.report
    rows = convergence_rows(cfg)
    out.csv("convergence.csv", ["domain", "h", "n_nodes", "T", "exact", "rel_error"], rows)
    disk = [row for row in rows if row[0] == "disk"]
    at = next(row for row in disk if row[1] == cfg.disk_check_h)
    rep.check(f"disk within {cfg.rel_tol:g} at h={cfg.disk_check_h:g}", at[5] <= cfg.rel_tol, at[5], cfg.rel_tol)
    order = fitted_order([row[1] for row in disk], [row[5] for row in disk])
    rep.check("observed order", cfg.order_min <= order <= cfg.order_max, order, cfg.order_min,
              f"expected in [{cfg.order_min}, {cfg.order_max}]")
    tri = rows[-1]
    rep.check(f"equilateral triangle within {cfg.rel_tol:g}", tri[5] <= cfg.rel_tol, tri[5], cfg.rel_tol)


@dataclass(frozen=True)
class Experiment:
    config: type[ExperimentConfig]
    runner: Callable[[ExperimentConfig, Output], None]
    verifies: str


EXPERIMENTS: dict[str, Experiment] = {
    "cheeger-scan": Experiment(CheegerScanConfig, run_cheeger_scan,
                               "Cheeger constant of three-cap sets is strictly decreasing in r"),
    "pal-area": Experiment(PalAreaConfig, run_pal_area,
                           "area of three-cap sets is strictly increasing in r"),
    "torsion-landscape": Experiment(LandscapeConfig, run_landscape,
                                    "equilateral three-cap set is optimal for torsion at fixed inradius"),
    "vertex-derivative": Experiment(VertexDerivativeConfig, run_vertex_derivative,
                                    "vertex-rotation shape derivative and cap comparison"),
    "trace-compare": Experiment(TraceCompareConfig, run_trace_compare,
                                "torsion function is larger on the nearer cap arc"),
    "hexagon-scan": Experiment(HexagonScanConfig, run_hexagon_scan,
                               "r -> T(H_r) is strictly increasing"),
    "slice-symmetry": Experiment(SliceSymmetryConfig, run_slice_symmetry,
                                 "squared flux on YZ is larger on the side of Y"),
    "kernel-cubic": Experiment(KernelCubicConfig, run_kernel_cubic,
                               "half-disk kernel sign, critical cubic and unimodality"),
    "slide-monotonicity": Experiment(SlideMonotonicityConfig, run_slide_monotonicity,
                                     "sliding the data arc away lowers u near the boundary"),
    "convhull-slide": Experiment(ConvhullSlideConfig, run_convhull_slide,
                                 "sliding comparison on conv(D+, A): cap values and flux on AT"),
    "convergence-study": Experiment(ConvergenceConfig, run_convergence,
                                    "P1 torsion converges at second order to exact values"),
}


def get_experiment(name: str) -> Experiment:
    try:
        return EXPERIMENTS[name]
    except KeyError:
        raise UnknownExperiment(f"unknown experiment '{name}'; choose from {', '.join(EXPERIMENTS)}") from None


def run(name: str, config: ExperimentConfig | dict | None, out_dir: str | os.PathLike) -> ExperimentReport:
    exp = get_experiment(name)
    if config is None:
        config = exp.config()
    elif isinstance(config, dict):
        config = exp.config.from_dict(config)
    elif not isinstance(config, exp.config):
        raise ConfigInvalid([f"config for {name} must be {exp.config.__name__}"])
    else:
        config.validate()
    report = ExperimentReport(name, exp.verifies)
    out = Output(Path(out_dir), report)
    start = time.perf_counter()
    exp.runner(config, out)
    report.wall_time = time.perf_counter() - start
    (out.dir / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    (out.dir / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return report
