"""Convex polygons and the extremal shapes built from them.

All shapes are normalized to unit minimal width.  The three-cap set is the
convex hull of a disk of radius ``r`` centred at the origin and three points
at distance ``1 - r``; the hexagon and slice triangle are the equilateral
reductions used for the torsion experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from .errors import CapsOverlap, DegenerateInput, DomainError, EmptyBody

R_MIN = 1.0 / 3.0
R_MAX = 0.5
DEFAULT_N_ARC = 256
MERGE_TOL = 1e-10
COLLINEAR_TOL = 1e-12
EQUILATERAL_ANGLES = (0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0)
TWO_PI = 2.0 * math.pi


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass(frozen=True)
class ConvexPolygon:
    """Counterclockwise convex polygon; ``edge_tags[i]`` labels edge i -> i+1."""

    vertices: np.ndarray
    edge_tags: tuple[str, ...] = ()

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise DegenerateInput("a polygon needs at least 3 two-dimensional vertices")
        if not np.all(np.isfinite(v)):
            raise DegenerateInput("non-finite vertex coordinates")
        edges = np.roll(v, -1, axis=0) - v
        lengths = np.hypot(edges[:, 0], edges[:, 1])
        if np.any(lengths <= 1e-12):
            raise DegenerateInput("duplicate consecutive vertices")
        scale = float(np.max(np.abs(v - v.mean(axis=0))))
        turns = _cross(edges, np.roll(edges, -1, axis=0))
        if np.any(turns < -COLLINEAR_TOL * scale**2):
            raise DegenerateInput("vertices are not a counterclockwise convex chain")
        if 0.5 * float(np.sum(_cross(v, np.roll(v, -1, axis=0)))) <= 0.0:
            raise DegenerateInput("polygon has non-positive signed area")
        tags = tuple(self.edge_tags)
        if tags and len(tags) != len(v):
            raise ValueError(f"expected {len(v)} edge tags, got {len(tags)}")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "edge_tags", tags)

    def __len__(self) -> int:
        return len(self.vertices)

    def tag(self, i: int) -> str:
        return self.edge_tags[i] if self.edge_tags else ""

    @property
    def edges(self) -> np.ndarray:
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    @property
    def area(self) -> float:
        v = self.vertices
        return 0.5 * float(np.sum(_cross(v, np.roll(v, -1, axis=0))))

    @property
    def perimeter(self) -> float:
        e = self.edges
        return float(np.sum(np.hypot(e[:, 0], e[:, 1])))

    def outward_normals(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit outward normals and offsets, so the body is ``{x : n_i.x <= d_i}``."""
        e = self.edges
        n = np.column_stack([e[:, 1], -e[:, 0]])
        n /= np.hypot(n[:, 0], n[:, 1])[:, None]
        d = np.einsum("ij,ij->i", n, self.vertices)
        return n, d

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n, d = self.outward_normals()
        return np.all(pts @ n.T <= d + tol, axis=1)

    def width(self, theta) -> np.ndarray:
        """Width function: distance between the support lines orthogonal to direction theta."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        u = np.column_stack([np.cos(theta), np.sin(theta)])
        proj = self.vertices @ u.T
        return proj.max(axis=0) - proj.min(axis=0)

    def tagged_edges(self, prefix: str = "") -> list[int]:
        return [i for i, t in enumerate(self.edge_tags) if t.startswith(prefix)]


@dataclass(frozen=True)
class ThreeCapParams:
    r: float
    phi_A: float
    phi_B: float
    phi_C: float
    n_arc: int = DEFAULT_N_ARC

    def __post_init__(self):
        check_inradius(self.r)
        if self.n_arc < 1:
            raise DomainError("n_arc must be a positive integer")
        for name in ("phi_A", "phi_B", "phi_C"):
            object.__setattr__(self, name, float(getattr(self, name)) % TWO_PI)

    @classmethod
    def equilateral(cls, r: float, n_arc: int = DEFAULT_N_ARC) -> "ThreeCapParams":
        return cls(r, *EQUILATERAL_ANGLES, n_arc=n_arc)

    @property
    def alpha(self) -> float:
        return cap_half_angle(self.r)

    def angles(self) -> dict[str, float]:
        return {"A": self.phi_A, "B": self.phi_B, "C": self.phi_C}

    def ordered(self) -> list[tuple[str, float]]:
        """Vertex labels in counterclockwise order starting from A."""
        ang = self.angles()
        return sorted(ang.items(), key=lambda kv: (kv[1] - ang["A"]) % TWO_PI)

    def gaps(self) -> dict[str, float]:
        """Angular gap from each vertex to the next one counterclockwise."""
        order = self.ordered()
        out = {}
        for k, (label, phi) in enumerate(order):
            nxt = order[(k + 1) % 3][1]
            out[label] = (nxt - phi) % TWO_PI
        return out

    def vertex(self, label: str) -> np.ndarray:
        phi = self.angles()[label]
        return (1.0 - self.r) * np.array([math.cos(phi), math.sin(phi)])

    def tangent_points(self, label: str) -> tuple[np.ndarray, np.ndarray]:
        """Tangency points (S, T) of the cap at ``label``; S comes first counterclockwise."""
        phi, a, r = self.angles()[label], self.alpha, self.r
        S = r * np.array([math.cos(phi - a), math.sin(phi - a)])
        T = r * np.array([math.cos(phi + a), math.sin(phi + a)])
        return S, T

    def with_angle(self, label: str, phi: float) -> "ThreeCapParams":
        ang = self.angles()
        ang[label] = phi
        return ThreeCapParams(self.r, ang["A"], ang["B"], ang["C"], n_arc=self.n_arc)

    def check_disjoint(self, margin: float = 0.0) -> None:
        two_alpha = 2.0 * self.alpha
        for label, g in self.gaps().items():
            if g < two_alpha + margin - 1e-12:
                raise CapsOverlap(
                    f"gap after {label} is {g:.6g} < 2*alpha + margin = {two_alpha + margin:.6g}"
                )


@dataclass(frozen=True)
class Incircle:
    center: np.ndarray
    radius: float


def check_inradius(r: float) -> float:
    if not (R_MIN - 1e-12 <= r <= R_MAX + 1e-12):
        raise DomainError(f"inradius {r} outside [1/3, 1/2]")
    return min(max(float(r), R_MIN), R_MAX)


def cap_half_angle(r: float) -> float:
    r = check_inradius(r)
    return math.acos(min(1.0, r / (1.0 - r)))


def build_polygon(points: Iterable[Sequence[float]]) -> ConvexPolygon:
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or len(pts) < 3:
        raise DegenerateInput("need at least 3 points")
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise DegenerateInput(f"convex hull is degenerate: {exc}") from None
    # qhull lists 2D hull vertices counterclockwise
    return ConvexPolygon(pts[hull.vertices])


def min_width(P: ConvexPolygon) -> tuple[float, float]:
    """Minimal width and a minimizing direction, by rotating calipers.

    The minimum of the width of a convex polygon is attained in the normal
    direction of one of its edges, paired with the antipodal vertex.
    """
    v = P.vertices
    n = len(v)
    e = P.edges
    lengths = np.hypot(e[:, 0], e[:, 1])

    def height(i: int, j: int) -> float:
        return float(_cross(e[i], v[j % n] - v[i])) / lengths[i]

    j = int(np.argmax(_cross(e[0], v - v[0])))
    best, best_edge = math.inf, 0
    for i in range(n):
        steps = 0
        while steps < n and height(i, j + 1) >= height(i, j):
            j += 1
            steps += 1
        h = height(i, j)
        if h < best:
            best, best_edge = h, i
    ex, ey = e[best_edge]
    theta = math.atan2(-ex, ey) % math.pi
    return best, theta


def incircle(P: ConvexPolygon) -> Incircle:
    """Chebyshev center: maximize rho subject to n_i.c + rho <= d_i."""
    nrm, d = P.outward_normals()
    A = np.column_stack([nrm, np.ones(len(d))])
    res = linprog(
        c=[0.0, 0.0, -1.0],
        A_ub=A,
        b_ub=d,
        bounds=[(None, None), (None, None), (0.0, None)],
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if not res.success:
        raise DegenerateInput(f"Chebyshev center LP failed: {res.message}")
    center = np.array(res.x[:2])
    # report the clearance actually achieved by the centre
    radius = float(np.min(d - nrm @ center))
    return Incircle(center, radius)


def inner_parallel(P: ConvexPolygon, t: float, disk: Incircle | None = None) -> ConvexPolygon:
    """Points of P at distance >= t from the boundary (intersection of offset half-planes)."""
    if t < 0:
        raise DomainError("offset distance must be non-negative")
    if t == 0:
        return P
    disk = disk or incircle(P)
    if t >= disk.radius:
        raise EmptyBody(f"t={t} is not below the inradius {disk.radius}")
    pts = _offset_vertices(P, t, disk)
    if pts is None:
        raise EmptyBody(f"inner parallel body at t={t} is degenerate")
    return ConvexPolygon(pts)


def inner_parallel_area(P: ConvexPolygon, t: float, disk: Incircle | None = None) -> float:
    """Area of the inner parallel body; zero once the body degenerates."""
    if t <= 0:
        return P.area
    disk = disk or incircle(P)
    if t >= disk.radius:
        return 0.0
    pts = _offset_vertices(P, t, disk)
    if pts is None:
        return 0.0
    return 0.5 * float(np.sum(_cross(pts, np.roll(pts, -1, axis=0))))


def _offset_vertices(P: ConvexPolygon, t: float, disk: Incircle) -> np.ndarray | None:
    nrm, d = P.outward_normals()
    halfspaces = np.column_stack([nrm, -(d - t)])
    try:
        hs = HalfspaceIntersection(halfspaces, disk.center)
    except QhullError:
        return None
    pts = hs.intersections
    ang = np.arctan2(pts[:, 1] - disk.center[1], pts[:, 0] - disk.center[0])
    pts = pts[np.argsort(ang)]
    scale = max(1.0, float(np.max(np.abs(P.vertices))))
    keep = [pts[0]]
    for p in pts[1:]:
        if np.hypot(*(p - keep[-1])) > 1e-11 * scale:
            keep.append(p)
    if len(keep) > 1 and np.hypot(*(keep[0] - keep[-1])) <= 1e-11 * scale:
        keep.pop()
    if len(keep) < 3:
        return None
    out = np.array(keep)
    if 0.5 * np.sum(_cross(out, np.roll(out, -1, axis=0))) <= 0:
        return None
    return out


def _merge_chain(points: list[np.ndarray], tags: list[str]) -> tuple[np.ndarray, list[str]]:
    """Drop vertices closer than MERGE_TOL to their predecessor.

    The surviving vertex takes the outgoing tag of the dropped one, so a
    zero-length edge never appears.
    """
    out_p, out_t = [points[0]], [tags[0]]
    for p, tag in zip(points[1:], tags[1:]):
        if np.hypot(*(p - out_p[-1])) < MERGE_TOL:
            out_t[-1] = tag
        else:
            out_p.append(p)
            out_t.append(tag)
    while len(out_p) > 1 and np.hypot(*(out_p[-1] - out_p[0])) < MERGE_TOL:
        out_p.pop()
        out_t.pop()
    return np.array(out_p), out_t


def build_three_cap(params: ThreeCapParams) -> ConvexPolygon:
    """Polygonal three-cap set with tagged tangent segments and disk arcs.

    Edges are tagged ``segment:VS`` (tangency point S to vertex V),
    ``segment:VT`` (vertex V to tangency point T) and ``arc:VW`` for the
    chords of the free disk arc between the caps at V and W.
    """
    params.check_disjoint()
    r, a, n_arc = params.r, params.alpha, params.n_arc
    order = params.ordered()
    points: list[np.ndarray] = []
    tags: list[str] = []
    for k, (label, phi) in enumerate(order):
        nxt_label, nxt_phi = order[(k + 1) % 3]
        S, T = params.tangent_points(label)
        points += [S, params.vertex(label), T]
        arc_tag = f"arc:{label}{nxt_label}"
        tags += [f"segment:{label}S", f"segment:{label}T", arc_tag]
        start = phi + a
        span = (nxt_phi - a - start) % TWO_PI
        if span > TWO_PI - 1e-12:
            span = 0.0
        if span * r < MERGE_TOL:
            continue
        for s in start + span * np.arange(1, n_arc) / n_arc:
            points.append(r * np.array([math.cos(s), math.sin(s)]))
            tags.append(arc_tag)
    verts, tags = _merge_chain(points, tags)
    return ConvexPolygon(verts, tuple(tags))


def cap_area_f(r: float) -> tuple[float, float]:
    """Area of any three-cap set with inradius r, and its derivative in r."""
    r = check_inradius(r)
    a = cap_half_angle(r)
    f = 3.0 * r**2 * (math.pi / 3.0 + math.tan(a) - a)
    fprime = 6.0 * r * (math.pi / 3.0 - a) + 3.0 * (2.0 * r * math.tan(a) - math.sin(a))
    return f, fprime


def build_hexagon(r: float) -> ConvexPolygon:
    """Hexagon with vertices at angles k*pi/3 and radii alternating 1-r, r."""
    r = check_inradius(r)
    k = np.arange(6)
    rho = np.where(k % 2 == 0, 1.0 - r, r)
    ang = k * math.pi / 3.0
    pts = np.column_stack([rho * np.cos(ang), rho * np.sin(ang)])
    verts, _ = _merge_chain(list(pts), [""] * 6)
    return ConvexPolygon(verts, tuple("dirichlet" for _ in verts))


def build_slice_triangle(r: float) -> ConvexPolygon:
    """One sixth of the hexagon: X at the origin, |XY| = r, |XZ| = 1 - r, angle pi/3 at X.

    YZ carries the Dirichlet condition, the radial sides XY and ZX are Neumann.
    """
    r = check_inradius(r)
    X = np.zeros(2)
    Y = np.array([r, 0.0])
    Z = (1.0 - r) * np.array([0.5, math.sqrt(3.0) / 2.0])
    return ConvexPolygon(np.array([X, Y, Z]), ("neumann", "dirichlet", "neumann"))


def regular_polygon(n: int, radius: float, center=(0.0, 0.0), tag: str = "") -> ConvexPolygon:
    ang = 2.0 * math.pi * np.arange(n) / n
    pts = np.column_stack([radius * np.cos(ang), radius * np.sin(ang)]) + np.asarray(center)
    return ConvexPolygon(pts, tuple(tag for _ in range(n)) if tag else ())


def equilateral_triangle(height: float = 1.0) -> ConvexPolygon:
    """Equilateral triangle of the given height, incenter at the origin, apex on the +x axis."""
    R = 2.0 * height / 3.0
    ang = np.array(EQUILATERAL_ANGLES)
    return ConvexPolygon(np.column_stack([R * np.cos(ang), R * np.sin(ang)]))


def with_tags(P: ConvexPolygon, tag: str) -> ConvexPolygon:
    return ConvexPolygon(P.vertices, tuple(tag for _ in range(len(P))))
