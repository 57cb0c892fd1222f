"""Harmonic functions on the upper half disk with sliding boundary data.

A function harmonic in D+ = {|z| < 1, Im z > 0} and vanishing on the
diameter is the restriction of the odd (in Im z) harmonic extension of its
arc data, so

    u(r e^{it}) = (1 - r^2) / (2 pi) * int_0^pi f(s) Q(r, t, s) ds

with the reflected kernel Q below.  The kernel is unimodal in s; its peak
``s0`` solves a cubic in cos s that has exactly one root in [-1, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateEndpoint, DomainError, QuadratureNotConverged
from .fem import BoundaryData, boundary_flux, mesh_polygon, refine_uniform, solve_harmonic
from .geometry import ConvexPolygon
from .tables import ComparisonTable

Profile = Callable[[np.ndarray], np.ndarray]

QUAD_POINTS = 32
QUAD_RTOL = 1e-10
MAX_PANEL_LEVEL = 14
R_CAP = 0.9999
N_ARC = 256
CROSS_CHECK_POINTS = ((0.5, 1.0), (0.7, 0.9), (0.3, 2.0), (0.6, 0.4), (0.8, 1.5))


@dataclass(frozen=True)
class KernelPoint:
    r: float
    t: float
    s: float

    def __post_init__(self):
        if not 0.0 < self.r < 1.0:
            raise DomainError(f"radius {self.r} outside (0, 1)")
        if not 0.0 < self.t < math.pi:
            raise DomainError(f"argument t={self.t} outside (0, pi)")
        if not 0.0 <= self.s <= math.pi:
            raise DomainError(f"boundary argument s={self.s} outside [0, pi]")

    @property
    def C(self) -> float:
        return (1.0 + self.r**2) / (2.0 * self.r)


def _dist2(r, x):
    # |r e^{ix} - 1|^2 = 1 + r^2 - 2r cos x, written without cancellation near x = 0, r = 1
    return (1.0 - r) ** 2 + 4.0 * r * np.sin(0.5 * x) ** 2


def kernel_values(r, t, s) -> np.ndarray:
    """Reflected kernel 1/(1+r^2-2r cos(s-t)) - 1/(1+r^2-2r cos(s+t)), vectorized."""
    r, t, s = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (r, t, s)))
    if np.any(r >= 1.0) or np.any(r < 0.0):
        raise DomainError("kernel is defined for 0 <= r < 1")
    return 1.0 / _dist2(r, s - t) - 1.0 / _dist2(r, s + t)


def kernel_Q_complex(r, t, s) -> np.ndarray:
    """The same kernel through complex moduli 1/|re^{it}-e^{is}|^2 - 1/|re^{-it}-e^{is}|^2."""
    r, t, s = (np.asarray(x, dtype=float) for x in (r, t, s))
    z = np.exp(1j * s)
    return 1.0 / np.abs(r * np.exp(1j * t) - z) ** 2 - 1.0 / np.abs(r * np.exp(-1j * t) - z) ** 2


def form_agreement_tol(r, t, s) -> np.ndarray:
    """Admissible gap between the two forms: 1e-12 relative, widened by the conditioning eps/|re^{it}-e^{is}|."""
    d2 = _dist2(np.asarray(r, dtype=float), np.asarray(s) - np.asarray(t))
    scale = 1.0 / d2 + 1.0 / _dist2(np.asarray(r, dtype=float), np.asarray(s) + np.asarray(t))
    return scale * np.maximum(1e-12, 16.0 * np.finfo(float).eps / np.sqrt(d2))


def kernel_Q(p: KernelPoint) -> float:
    """Kernel at one point; both algebraic forms are evaluated and must agree."""
    q = float(kernel_values(p.r, p.t, p.s))
    q2 = float(kernel_Q_complex(p.r, p.t, p.s))
    if abs(q - q2) > form_agreement_tol(p.r, p.t, p.s):
        raise ArithmeticError(f"kernel forms disagree: {q!r} vs {q2!r}")
    return q


def critical_cubic(X, C: float, t: float):
    """X^3 + 2C cos t - (1 + cos^2 t + C^2) X; its root in [-1, 1] is cos of the kernel peak."""
    c = math.cos(t)
    return X**3 + 2.0 * C * c - (1.0 + c * c + C * C) * X


def cubic_root_X0(C: float, t: float) -> tuple[float, float]:
    """Unique root X0 of the critical cubic in [-1, 1] by bisection, and s0 = arccos X0."""
    if C < 1.0:
        raise DomainError("C = (1 + r^2) / (2r) is at least 1")
    c = math.cos(t)
    h_lo = (C + c) ** 2
    h_hi = -((C - c) ** 2)
    if h_lo == 0.0 or h_hi == 0.0:
        raise DegenerateEndpoint(f"cubic vanishes at an endpoint (C={C}, t={t})")
    lo, hi = -1.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if critical_cubic(mid, C, t) > 0.0:
            lo = mid
        else:
            hi = mid
    X0 = 0.5 * (lo + hi)
    # ordering relative to cos t follows from the sign of the cubic at cos t
    slack = 1e-12
    if t <= math.pi / 2 and X0 > c + slack:
        raise ArithmeticError("root above cos t for t <= pi/2")
    if t >= math.pi / 2 and X0 < c - slack:
        raise ArithmeticError("root below cos t for t >= pi/2")
    return X0, math.acos(min(1.0, max(-1.0, X0)))


def sine_bump(delta: float) -> Profile:
    return lambda x: np.sin(np.pi * np.asarray(x) / delta)


@dataclass(frozen=True)
class SlidingArcProblem:
    """Harmonic data phi(s - theta) on arguments [theta, theta + delta], zero elsewhere.

    With ``psi`` set, data ``psi(s)`` is also imposed on arguments [0, t_psi].
    """

    theta: float
    delta: float
    phi: Profile | None = None
    psi: Profile | None = None
    t_psi: float = 0.0
    quadrature_n: int = QUAD_POINTS

    def __post_init__(self):
        if self.delta <= 0:
            raise DomainError("arc length delta must be positive")
        if not (0.0 < self.theta and self.theta + self.delta <= math.pi + 1e-12):
            raise DomainError("need 0 < theta and theta + delta <= pi")
        if self.psi is not None and not 0.0 < self.t_psi <= self.theta:
            raise DomainError("psi support [0, t_psi] must end before the sliding arc")
        if self.phi is None:
            object.__setattr__(self, "phi", sine_bump(self.delta))

    def slid(self, theta: float) -> "SlidingArcProblem":
        return SlidingArcProblem(theta, self.delta, self.phi, self.psi, self.t_psi, self.quadrature_n)

    def boundary_value(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        on_arc = (s >= self.theta) & (s <= self.theta + self.delta)
        out[on_arc] = self.phi(s[on_arc] - self.theta)
        if self.psi is not None:
            low = (s >= 0.0) & (s <= self.t_psi)
            out[low] = self.psi(s[low])
        return out

    def pieces(self) -> list[tuple[float, float, Callable[[np.ndarray], np.ndarray]]]:
        out = [(self.theta, self.theta + self.delta, lambda s: self.phi(s - self.theta))]
        if self.psi is not None:
            out.append((0.0, self.t_psi, self.psi))
        return out


def _gauss_panels(fn, a: float, b: float, n: int, panels: int) -> float:
    x, w = np.polynomial.legendre.leggauss(n)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    s = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    return float(np.sum(fn(s).reshape(panels, n) * (half[:, None] * w[None, :])))


def _adaptive(fn, a: float, b: float, n: int) -> float:
    prev = _gauss_panels(fn, a, b, n, 1)
    for level in range(1, MAX_PANEL_LEVEL + 1):
        cur = _gauss_panels(fn, a, b, n, 2**level)
        if abs(cur - prev) <= QUAD_RTOL * abs(cur) or (cur == 0.0 and prev == 0.0):
            return cur
        prev = cur
    raise QuadratureNotConverged(f"panel doubling on [{a}, {b}] did not settle")


def solve_u_theta(problem: SlidingArcProblem, eval_points: Sequence[tuple[float, float]]) -> np.ndarray:
    """Evaluate the harmonic function at polar points (r, t) by the reflected Poisson formula."""
    pts = np.atleast_2d(np.asarray(eval_points, dtype=float))
    out = np.empty(len(pts))
    for k, (r, t) in enumerate(pts):
        if not (0.0 <= r <= R_CAP and 0.0 < t < math.pi):
            raise DomainError(f"evaluation point (r={r}, t={t}) not strictly inside the half disk")
        total = 0.0
        for a, b, data in problem.pieces():
            if b > a:
                total += _adaptive(lambda s: data(s) * kernel_values(r, t, s), a, b, problem.quadrature_n)
        out[k] = (1.0 - r * r) / (2.0 * math.pi) * total
    return out


@dataclass
class SlideReport:
    t: float
    theta: float
    theta_prime: float
    r: np.ndarray
    u_theta: np.ndarray
    u_theta_prime: np.ndarray
    threshold: float | None
    sign_changes: int
    notes: list[str] = field(default_factory=list)

    @property
    def difference(self) -> np.ndarray:
        return self.u_theta - self.u_theta_prime

    def rows(self):
        for r, a, b in zip(self.r, self.u_theta, self.u_theta_prime):
            yield r, self.t, a, b, a - b


def slide_monotonicity(
    t: float,
    theta: float,
    theta_prime: float,
    delta: float,
    phi: Profile | None = None,
    r_grid: Sequence[float] | None = None,
    psi: Profile | None = None,
) -> SlideReport:
    """Compare u_theta and u_theta' along the ray of argument t.

    The threshold is the smallest grid radius from which u_theta' < u_theta
    holds at every larger grid radius; None when the last grid point fails.
    """
    if not (0.0 < t < theta <= theta_prime <= math.pi - delta + 1e-12):
        raise DomainError("need 0 < t < theta <= theta' <= pi - delta")
    r_grid = np.asarray(r_grid if r_grid is not None else default_r_grid(), dtype=float)
    base = SlidingArcProblem(theta, delta, phi, psi, t if psi is not None else 0.0)
    pts = np.column_stack([r_grid, np.full(len(r_grid), t)])
    u1 = solve_u_theta(base, pts)
    u2 = solve_u_theta(base.slid(theta_prime), pts)
    diff = u1 - u2
    positive = diff > 0.0
    threshold = None
    notes = []
    if positive[-1]:
        k = len(positive) - 1
        while k > 0 and positive[k - 1]:
            k -= 1
        threshold = float(r_grid[k])
    elif theta_prime == theta:
        notes.append("identical problems: difference is zero")
    else:
        notes.append("strict inequality not observed at the largest grid radius")
    signs = np.sign(diff[diff != 0.0])
    changes = int(np.count_nonzero(np.diff(signs)))
    if changes > 1:
        notes.append(f"difference changes sign {changes} times along the grid")
    return SlideReport(t, theta, theta_prime, r_grid, u1, u2, threshold, changes, notes)


def default_r_grid() -> np.ndarray:
    return np.concatenate([np.linspace(0.05, 0.95, 91), np.linspace(0.955, 0.999, 12)])


def _arc_polygon(s_from: float, head: Sequence[Sequence[float]], head_tags: Sequence[str], n_arc: int, breaks) -> ConvexPolygon:
    """Polygon: ``head`` points, then the unit arc from ``s_from`` to pi (ending at -1)."""
    s = np.linspace(s_from, math.pi, n_arc + 1)
    extra = [b for b in breaks if s_from < b < math.pi]
    s = np.unique(np.concatenate([s, extra]))
    arc = np.column_stack([np.cos(s), np.sin(s)])[:-1]
    pts = np.concatenate([np.asarray(head, dtype=float), arc])
    tags = tuple(head_tags) + ("arc",) * len(arc)
    return ConvexPolygon(pts, tags)


def halfdisk_polygon(n_arc: int = N_ARC, breaks: Sequence[float] = ()) -> ConvexPolygon:
    """Upper half disk with edges tagged ``diameter`` and ``arc``; ``breaks`` are extra arc vertices."""
    return _arc_polygon(0.0, [[-1.0, 0.0]], ["diameter"], n_arc, breaks)


def arc_data(problem: SlidingArcProblem) -> BoundaryData:
    """Boundary data for meshed domains: the problem's data on ``arc`` nodes, zero elsewhere."""

    def data(points: np.ndarray, tags: Sequence[str]) -> np.ndarray:
        s = np.clip(np.arctan2(points[:, 1], points[:, 0]), 0.0, math.pi)
        v = problem.boundary_value(s)
        v[np.array([not t.startswith("arc") for t in tags])] = 0.0
        return v

    return data


def _breaks(problem: SlidingArcProblem) -> list[float]:
    b = [problem.theta, problem.theta + problem.delta]
    if problem.psi is not None:
        b.append(problem.t_psi)
    return b


@dataclass(frozen=True)
class CrossCheck:
    points: np.ndarray
    quadrature: np.ndarray
    fem: np.ndarray

    @property
    def max_abs_diff(self) -> float:
        return float(np.max(np.abs(self.quadrature - self.fem)))


def fem_cross_check(
    problem: SlidingArcProblem,
    eval_points: Sequence[tuple[float, float]] = CROSS_CHECK_POINTS,
    h_mesh: float = 0.02,
) -> CrossCheck:
    """Compare the quadrature evaluator with a P1 harmonic solve on a meshed half disk."""
    pts = np.asarray(eval_points, dtype=float)
    xy = np.column_stack([pts[:, 0] * np.cos(pts[:, 1]), pts[:, 0] * np.sin(pts[:, 1])])
    n_arc = max(N_ARC, math.ceil(2.0 * math.pi / h_mesh))
    mesh = mesh_polygon(halfdisk_polygon(n_arc, _breaks(problem)), h_mesh, interior_points=xy)
    u = solve_harmonic(mesh, arc_data(problem))
    return CrossCheck(pts, solve_u_theta(problem, pts), u(xy))


def convhull_polygon(z_A: float, n_arc: int = N_ARC, breaks: Sequence[float] = ()) -> ConvexPolygon:
    """conv(D+, A) for A = (z_A, 0): diameter, segment AT to the tangency point, arc from T to -1."""
    if z_A <= 1.0:
        raise DomainError("A must lie outside the unit disk")
    t0 = math.acos(1.0 / z_A)
    head = [[-1.0, 0.0], [1.0, 0.0], [z_A, 0.0]]
    return _arc_polygon(t0, head, ["diameter", "diameter", "segment:AT"], n_arc, breaks)


def cap_samples(z_A: float, n_angle: int = 5, n_radial: int = 5) -> np.ndarray:
    """Interior points of the half cap between the unit disk, segment AT and the axis."""
    t0 = math.acos(1.0 / z_A)
    out = []
    for phi in np.linspace(0.1, 0.9, n_angle) * t0:
        rho_max = 1.0 / math.cos(phi - t0)  # tangent line at T is x . T = 1
        for f in np.linspace(0.1, 0.9, n_radial):
            rho = 1.0 + f * (rho_max - 1.0)
            out.append([rho * math.cos(phi), rho * math.sin(phi)])
    return np.array(out)


@dataclass(frozen=True)
class ConvexHullSlide:
    cap: ComparisonTable
    flux: ComparisonTable


def _flux_along(flux, A: np.ndarray, T: np.ndarray, fractions: np.ndarray) -> np.ndarray:
    sel = flux.select("segment:AT")
    g, _, v = flux.gauss_points(sel)
    d = T - A
    s = (g - A) @ d / (d @ d)
    order = np.argsort(s)
    return np.interp(fractions, s[order], v[order])


def convhull_slide_experiment(
    z_A: float = 2.0,
    theta: float = 1.3,
    theta_prime: float = 1.6,
    delta: float = 0.3,
    phi: Profile | None = None,
    h_mesh: float = 0.02,
    n_arc: int = N_ARC,
    n_flux: int = 19,
) -> ConvexHullSlide:
    """Harmonic data phi(s - theta) on the arc of K = conv(D+, A), zero on the rest of dK.

    Compares u_theta and u_theta' at cap samples and the squared outward
    flux on AT.  Errors are per row: twice the change between the solves at
    h_mesh and h_mesh/2 (the values decay fast toward A, so a global bound
    would swamp them).
    """
    t0 = math.acos(1.0 / z_A) if z_A > 1.0 else math.nan
    if not (z_A > 1.0 and t0 < theta):
        raise DomainError("need z_A > 1 and the tangency angle arccos(1/z_A) below theta")
    if not theta <= theta_prime <= math.pi - delta + 1e-12:
        raise DomainError("need theta <= theta' <= pi - delta")
    p1 = SlidingArcProblem(theta, delta, phi)
    p2 = p1.slid(theta_prime)
    P = convhull_polygon(z_A, n_arc, _breaks(p1) + _breaks(p2))
    samples = cap_samples(z_A)
    A = np.array([z_A, 0.0])
    T = np.array([math.cos(t0), math.sin(t0)])
    fractions = np.linspace(0.05, 0.95, n_flux)

    mesh = mesh_polygon(P, h_mesh, interior_points=samples)
    levels = []
    for level in range(2):
        u1 = solve_harmonic(mesh, arc_data(p1))
        u2 = solve_harmonic(mesh, arc_data(p2))
        q1 = _flux_along(boundary_flux(mesh, u1), A, T, fractions) ** 2
        q2 = _flux_along(boundary_flux(mesh, u2), A, T, fractions) ** 2
        levels.append((u1(samples), u2(samples), q1, q2))
        if level == 0:
            mesh = refine_uniform(mesh)
    (a0, b0, f0, g0), (a1, b1, f1, g1) = levels
    meta = {"z_A": z_A, "theta": theta, "theta_prime": theta_prime, "delta": delta, "h_mesh": h_mesh}
    cap = ComparisonTable(
        np.arange(len(samples)), a1, b1, 2.0 * np.abs((a1 - b1) - (a0 - b0)),
        {**meta, "quantity": "u_theta - u_theta' on the half cap"}, points=samples,
    )
    flux = ComparisonTable(
        fractions, f1, g1, 2.0 * np.abs((f1 - g1) - (f0 - g0)),
        {**meta, "quantity": "squared outward flux on AT, parameter = fraction from A to T"},
        points=A + fractions[:, None] * (T - A),
    )
    return ConvexHullSlide(cap, flux)
