"""Torsion experiments on three-cap sets, hexagons and slice triangles.

Most margin tests use nested uniform refinement: torsion values at
successive levels are Richardson-extrapolated pairwise (second order), and
the error of the finest extrapolate is estimated as twice its change from
the previous one.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .fem import (
    TriMesh,
    boundary_flux,
    map_mesh,
    mesh_polygon,
    refine_uniform,
    solve_mixed,
    solve_torsion,
)
from .geometry import (
    R_MAX,
    R_MIN,
    TWO_PI,
    ConvexPolygon,
    ThreeCapParams,
    build_hexagon,
    build_slice_triangle,
    build_three_cap,
    cap_area_f,
    check_inradius,
)
from .tables import ComparisonTable

LABELS = ("A", "B", "C")
LANDSCAPE_N_ARC = 128


# ---------------------------------------------------------------------------
# nested refinement


@dataclass(frozen=True)
class NestedEstimate:
    """Values on nested meshes h, h/2, ...; ``value`` is the finest extrapolate."""

    raw: np.ndarray
    extrapolated: np.ndarray

    @property
    def value(self) -> float:
        return float(self.extrapolated[-1])

    @property
    def error(self) -> float:
        if len(self.extrapolated) < 2:
            return float(2.0 * abs(self.raw[-1] - self.raw[-2]))
        return float(2.0 * abs(self.extrapolated[-1] - self.extrapolated[-2]))


def nested_values(mesh: TriMesh, levels: int, solve: Callable[[TriMesh], float]) -> NestedEstimate:
    if levels < 2:
        raise ValueError("need at least two levels")
    raw = []
    for k in range(levels):
        raw.append(solve(mesh))
        if k < levels - 1:
            mesh = refine_uniform(mesh)
    raw = np.array(raw)
    return NestedEstimate(raw, (4.0 * raw[1:] - raw[:-1]) / 3.0)


def torsion_estimate(P: ConvexPolygon, h_mesh: float, levels: int = 4) -> NestedEstimate:
    return nested_values(mesh_polygon(P, h_mesh), levels, lambda m: solve_torsion(m).T)


def slice_energy_estimate(r: float, h_mesh: float, levels: int = 4) -> NestedEstimate:
    P = build_slice_triangle(r)
    return nested_values(mesh_polygon(P, h_mesh), levels, lambda m: solve_mixed(m).energy)


# ---------------------------------------------------------------------------
# vertex rotation


@dataclass(frozen=True)
class VertexDerivative:
    """Derivative of torsion as one vertex rotates counterclockwise about the incenter."""

    vertex: str
    dT_dphi_flux: float
    dT_dphi_fd: float
    step: float
    dT_dphi_fd_double_step: float
    T: float
    far_side: int  # +1 if the farther neighbour lies counterclockwise

    def __post_init__(self):
        for name in ("dT_dphi_flux", "dT_dphi_fd", "T"):
            if not math.isfinite(getattr(self, name)):
                raise ArithmeticError(f"{name} is not finite")

    @property
    def relative_disagreement(self) -> float:
        return abs(self.dT_dphi_flux - self.dT_dphi_fd) / abs(self.dT_dphi_fd)

    @property
    def toward_far_neighbour(self) -> float:
        """Flux derivative for motion toward the farther neighbouring vertex."""
        return self.far_side * self.dT_dphi_flux


def _sector_weight(params: ThreeCapParams, label: str, psi: np.ndarray) -> np.ndarray:
    """1 on the cap sector of ``label``, linear to 0 across the two adjacent free arcs."""
    a = params.alpha
    ang = params.angles()
    phi = ang[label]
    order = [lab for lab, _ in params.ordered()]
    k = order.index(label)
    up = (ang[order[(k + 1) % 3]] - phi) % TWO_PI
    down = (phi - ang[order[(k - 1) % 3]]) % TWO_PI
    x = (psi - phi + math.pi) % TWO_PI - math.pi
    w = np.zeros_like(x)
    w[np.abs(x) <= a] = 1.0
    s = (x > a) & (x < up - a)
    w[s] = 1.0 - (x[s] - a) / (up - 2.0 * a)
    s = (x < -a) & (x > -(down - a))
    w[s] = 1.0 - (-x[s] - a) / (down - 2.0 * a)
    return w


def rotation_morph(params: ThreeCapParams, label: str, eps: float) -> Callable[[np.ndarray], np.ndarray]:
    """Node map that rotates the cap at ``label`` by ``eps`` and stretches the adjacent arcs.

    Radii are preserved, so the disk arcs stay on the circle and the map sends
    the polygon onto the rotated configuration.  The angular shift fades to
    zero toward the incenter.
    """
    r = params.r

    def fn(p: np.ndarray) -> np.ndarray:
        rho = np.hypot(p[:, 0], p[:, 1])
        psi = np.arctan2(p[:, 1], p[:, 0])
        fade = np.clip(rho / (0.5 * r), 0.0, 1.0)
        ang = psi + eps * _sector_weight(params, label, psi) * fade
        return np.column_stack([rho * np.cos(ang), rho * np.sin(ang)])

    return fn


def vertex_shape_derivative(
    params: ThreeCapParams,
    vertex: str = "A",
    h_mesh: float = 0.02,
    fd_step: float = 1e-3,
) -> VertexDerivative:
    """dT/dphi for a counterclockwise rotation of one vertex.

    Flux side: int_{VT} |x - T| (d_n u)^2 - int_{VS} |x - S| (d_n u)^2, with
    T the leading tangency point.  FD side: central difference of torsion on
    the same mesh moved by ``rotation_morph``.
    """
    if vertex not in LABELS:
        raise DomainError(f"vertex must be one of {LABELS}")
    params.check_disjoint(margin=2.0 * fd_step)
    mesh = mesh_polygon(build_three_cap(params), h_mesh)
    res = solve_torsion(mesh)
    flux = boundary_flux(mesh, res.u, source=1.0)
    S, T = params.tangent_points(vertex)
    pts, w, q = flux.gauss_points(flux.select(f"segment:{vertex}T"))
    lead = np.sum(w * np.linalg.norm(pts - T, axis=1) * q**2)
    pts, w, q = flux.gauss_points(flux.select(f"segment:{vertex}S"))
    trail = np.sum(w * np.linalg.norm(pts - S, axis=1) * q**2)

    def central(step: float) -> float:
        plus = solve_torsion(map_mesh(mesh, rotation_morph(params, vertex, step))).T
        minus = solve_torsion(map_mesh(mesh, rotation_morph(params, vertex, -step))).T
        return (plus - minus) / (2.0 * step)

    gaps = params.gaps()
    order = [lab for lab, _ in params.ordered()]
    before = order[(order.index(vertex) - 1) % 3]
    far_side = 1 if gaps[vertex] > gaps[before] else -1
    return VertexDerivative(
        vertex, float(lead - trail), central(fd_step), fd_step, central(2.0 * fd_step), res.T, far_side
    )


# ---------------------------------------------------------------------------
# trace comparison


def normalize_abc(params: ThreeCapParams) -> ThreeCapParams:
    """Rotate A to angle 0 and relabel/reflect so B is the nearer neighbour counterclockwise."""
    ang = params.angles()
    rel = {k: (v - ang["A"]) % TWO_PI for k, v in ang.items()}
    ccw, cw = sorted(("B", "C"), key=lambda k: rel[k])
    g_ccw = rel[ccw]
    g_cw = TWO_PI - rel[cw]
    if g_ccw <= g_cw:
        phi_B, phi_C = rel[ccw], rel[cw]
    else:
        phi_B, phi_C = TWO_PI - rel[cw], TWO_PI - rel[ccw]
    return ThreeCapParams(params.r, 0.0, phi_B, phi_C, n_arc=params.n_arc)


def cap_arc(params: ThreeCapParams, label: str, t: np.ndarray) -> np.ndarray:
    """Point gamma(t) on the disk arc cut by the cap at ``label``, t in [0, 2 alpha]."""
    phi = params.angles()[label]
    s = phi - params.alpha + np.asarray(t)
    return params.r * np.column_stack([np.cos(s), np.sin(s)])


def trace_compare_BC(
    params: ThreeCapParams,
    samples: int = 50,
    h_mesh: float = 0.02,
    levels: int = 3,
) -> ComparisonTable:
    """u(gamma_B(t)) against u(gamma_C(2 alpha - t)) on the normalized configuration.

    Sample points are inserted as mesh nodes.  The error column is the
    sup-norm bound 2 max |u_h - u_{h/2}| over all samples of both arcs at the
    two finest levels.
    """
    p = normalize_abc(params)
    t = np.linspace(0.0, 2.0 * p.alpha, samples)
    gB = cap_arc(p, "B", t)
    gC = cap_arc(p, "C", 2.0 * p.alpha - t)
    mesh = mesh_polygon(build_three_cap(p), h_mesh, interior_points=np.concatenate([gB, gC]))
    vals = []
    for k in range(levels):
        u = solve_torsion(mesh).u
        vals.append((u(gB), u(gC)))
        if k < levels - 1:
            mesh = refine_uniform(mesh)
    (b0, c0), (b1, c1) = vals[-2], vals[-1]
    eps = 2.0 * max(np.abs(b1 - b0).max(), np.abs(c1 - c0).max())
    g = p.gaps()
    meta = {
        "relation": "u(gamma_B(t)) >= u(gamma_C(2 alpha - t))",
        "r": p.r,
        "phi_B": p.phi_B,
        "phi_C": p.phi_C,
        "gap_AB": g["A"],
        "gap_CA": g["C"],
        "h_finest": h_mesh / 2 ** (levels - 1),
        "eps_disc": eps,
    }
    return ComparisonTable(t, b1, c1, eps, meta, points=gB)


# ---------------------------------------------------------------------------
# landscape at fixed inradius


@dataclass
class LandscapeRow:
    gaps_deg: tuple[int, int, int]
    phi_B: float
    phi_C: float
    T: float
    error: float


@dataclass
class Landscape:
    r: float
    rows: list[LandscapeRow]
    skipped: list[tuple[int, int, int]] = field(default_factory=list)

    @property
    def argmin(self) -> LandscapeRow:
        return min(self.rows, key=lambda row: row.T)

    def row(self, gaps_deg: Sequence[int]) -> LandscapeRow:
        key = tuple(gaps_deg)
        for row in self.rows:
            if row.gaps_deg == key:
                return row
        raise KeyError(key)

    def symmetry_spread(self) -> list[tuple[tuple[int, ...], float, float]]:
        """Per gap multiset: (sorted gaps, spread of T, largest error estimate)."""
        groups: dict[tuple[int, ...], list[LandscapeRow]] = {}
        for row in self.rows:
            groups.setdefault(tuple(sorted(row.gaps_deg)), []).append(row)
        out = []
        for key, rows in sorted(groups.items()):
            T = [row.T for row in rows]
            out.append((key, max(T) - min(T), max(row.error for row in rows)))
        return out


def landscape_grid(r: float, step_deg: int) -> tuple[list[tuple[int, int, int]], list[tuple[int, int, int]]]:
    """Gap triples (AB, BC, CA) in whole degrees, multiples of ``step_deg`` summing to 360.

    Returns (admissible, skipped); a triple is skipped when caps would touch.
    """
    if 360 % step_deg:
        raise DomainError("grid step must divide 360 degrees")
    two_alpha = math.degrees(2.0 * math.acos(r / (1.0 - r)))
    ok, skipped = [], []
    for g1 in range(step_deg, 360, step_deg):
        for g2 in range(step_deg, 360 - g1, step_deg):
            g3 = 360 - g1 - g2
            gaps = (g1, g2, g3)
            (ok if min(gaps) > two_alpha + 1e-9 else skipped).append(gaps)
    return ok, skipped


def fixed_inradius_landscape(
    r: float = 0.4,
    grid_step_deg: int = 5,
    h_mesh: float = 0.04,
    levels: int = 4,
    n_arc: int = LANDSCAPE_N_ARC,
    progress: Callable[[LandscapeRow], None] | None = None,
) -> Landscape:
    """Torsion over the admissible grid with phi_A = 0, phi_B = gap AB, phi_C = gap AB + gap BC."""
    r = check_inradius(r)
    if not R_MIN < r < R_MAX:
        raise DomainError("landscape needs r strictly between 1/3 and 1/2")
    grid, skipped = landscape_grid(r, grid_step_deg)
    rows = []
    for gaps in grid:
        phi_B = math.radians(gaps[0])
        phi_C = math.radians(gaps[0] + gaps[1])
        est = torsion_estimate(build_three_cap(ThreeCapParams(r, 0.0, phi_B, phi_C, n_arc=n_arc)), h_mesh, levels)
        row = LandscapeRow(gaps, phi_B, phi_C, est.value, est.error)
        rows.append(row)
        if progress is not None:
            progress(row)
    return Landscape(r, rows, skipped)


# ---------------------------------------------------------------------------
# hexagons and slices


@dataclass
class HexagonRow:
    r: float
    T: float
    error: float
    slice_T: float
    slice_error: float

    @property
    def slice_relative_gap(self) -> float:
        return abs(self.T - self.slice_T) / self.T


def hexagon_scan(r_grid: Sequence[float], h_mesh: float = 0.04, levels: int = 4) -> list[HexagonRow]:
    """T(H_r) with six times the slice energy as an independent cross-check."""
    rows = []
    for r in r_grid:
        r = check_inradius(r)
        hexa = torsion_estimate(build_hexagon(r), h_mesh, levels)
        sl = slice_energy_estimate(r, h_mesh, levels)
        rows.append(HexagonRow(r, hexa.value, hexa.error, 6.0 * sl.value, 6.0 * sl.error))
    return rows


def _yz_flux(P: ConvexPolygon, mesh: TriMesh, positions: np.ndarray) -> np.ndarray:
    """Recovered d_n w on YZ at arc-length positions measured from Y."""
    w = solve_mixed(mesh).w
    flux = boundary_flux(mesh, w, source=1.0)
    pts, _, q = flux.gauss_points(flux.select("dirichlet"))
    Y, Z = P.vertices[1], P.vertices[2]
    tvec = (Z - Y) / np.linalg.norm(Z - Y)
    s = (pts - Y) @ tvec
    order = np.argsort(s)
    return np.interp(positions, s[order], q[order])


def slice_flux_symmetry(
    r: float = 0.4,
    samples: int = 20,
    h_mesh: float = 0.02,
    levels: int = 3,
) -> ComparisonTable:
    """(d_n w)^2(U) - (d_n w)^2(V) for pairs U, V symmetric about the midpoint M of YZ.

    U lies on MY (the side of the shorter radial edge XY).  The parameter is
    the distance to M; the error column is 2 max |D_h - D_{h/2}| over pairs.
    """
    r = check_inradius(r)
    P = build_slice_triangle(r)
    L = float(np.linalg.norm(P.vertices[2] - P.vertices[1]))
    d = np.arange(1, samples + 1) * (L / 2.0) / (samples + 1)
    mesh = mesh_polygon(P, h_mesh)
    vals = []
    for k in range(levels):
        q = _yz_flux(P, mesh, np.concatenate([L / 2.0 - d, L / 2.0 + d]))
        vals.append((q[:samples] ** 2, q[samples:] ** 2))
        if k < levels - 1:
            mesh = refine_uniform(mesh)
    (u0, v0), (u1, v1) = vals[-2], vals[-1]
    eps = 2.0 * float(np.max(np.abs((u1 - v1) - (u0 - v0))))
    meta = {"relation": "(d_n w)^2(U) > (d_n w)^2(V)", "r": r, "h_finest": h_mesh / 2 ** (levels - 1)}
    return ComparisonTable(d, u1, v1, eps, meta)


def gradient_cone_fraction(r: float, h_mesh: float = 0.02, tol: float = 1e-2) -> float:
    """Share of slice elements whose gradient lies in the cone spanned by X - Y and X - Z.

    Cone coefficients may dip to -tol times the largest gradient; the
    violations form a one-element layer along the Neumann sides.
    """
    P = build_slice_triangle(r)
    mesh = mesh_polygon(P, h_mesh)
    g = solve_mixed(mesh).w.element_gradients()
    B = np.column_stack([-P.vertices[1], -P.vertices[2]])  # X is the origin
    coef = np.linalg.solve(B, g.T)
    scale = np.linalg.norm(g, axis=1).max()
    return float(np.mean(np.all(coef >= -tol * scale, axis=0)))


# ---------------------------------------------------------------------------
# area


@dataclass
class AreaScan:
    r: np.ndarray
    f: np.ndarray
    fprime: np.ndarray

    @property
    def argmin(self) -> float:
        return float(self.r[int(np.argmin(self.f))])


def pal_area_scan(r_grid: Sequence[float]) -> AreaScan:
    vals = [cap_area_f(r) for r in r_grid]
    return AreaScan(np.asarray(r_grid, dtype=float), np.array([v[0] for v in vals]), np.array([v[1] for v in vals]))


def inclusion_bounds(r: float) -> tuple[float, float]:
    """Torsion of the disks of radius r and 1 - r, which bracket every three-cap set."""
    return math.pi * r**4 / 8.0, math.pi * (1.0 - r) ** 4 / 8.0


def permuted_gaps(gaps: Sequence[int]) -> list[tuple[int, ...]]:
    return sorted(set(itertools.permutations(gaps)))

