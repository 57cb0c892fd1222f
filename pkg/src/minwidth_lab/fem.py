"""Piecewise-linear finite elements for torsion, mixed and harmonic problems.

Meshes come from the Triangle library (quality Delaunay refinement); the
linear systems are symmetric positive definite and solved by conjugate
gradients with a Jacobi preconditioner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import triangle
from scipy.sparse.linalg import cg, spsolve

from .errors import MeshFailure, NoDirichlet, SolverDiverged
from .geometry import ConvexPolygon

MIN_ANGLE_DEG = 20.0
MAX_EDGE_FACTOR = 1.5
CG_RTOL = 1e-10
CORNER_TURN = math.radians(5.0)

BoundaryData = Callable[[np.ndarray, Sequence[str]], np.ndarray]


@dataclass(frozen=True)
class Grading:
    """Geometric size grading: size h*factor**k within radius*factor**(k-1) of a point."""

    points: np.ndarray
    factor: float = 0.5
    radius: float = 0.1
    levels: int = 3

    def size(self, x: np.ndarray, h: float) -> np.ndarray:
        pts = np.atleast_2d(self.points)
        d = np.min(np.linalg.norm(x[:, None, :] - pts[None, :, :], axis=2), axis=1)
        k = np.zeros(len(x), dtype=int)
        for j in range(self.levels):
            k += d < self.radius * self.factor**j
        return h * self.factor**k


@dataclass(frozen=True, eq=False)
class TriMesh:
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: tuple[str, ...]
    h_target: float

    def __post_init__(self):
        for name in ("nodes", "triangles", "boundary_edges"):
            getattr(self, name).setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return np.linalg.norm(np.roll(p, -1, axis=1) - p, axis=2)

    def min_angle(self) -> float:
        L = self.edge_lengths
        a, b, c = L[:, 0], L[:, 1], L[:, 2]
        cosines = np.stack(
            [(a**2 + c**2 - b**2) / (2 * a * c), (a**2 + b**2 - c**2) / (2 * a * b),
             (b**2 + c**2 - a**2) / (2 * b * c)]
        )
        return float(np.degrees(np.arccos(np.clip(cosines, -1.0, 1.0))).min())

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    def nodes_with_tag(self, prefix: str) -> np.ndarray:
        mask = np.array([t.startswith(prefix) for t in self.boundary_tags], dtype=bool)
        return np.unique(self.boundary_edges[mask])

    @cached_property
    def node_tags(self) -> dict[int, str]:
        """Tag of the boundary edge leaving each boundary node."""
        return {int(a): t for (a, _), t in zip(self.boundary_edges, self.boundary_tags)}

    @cached_property
    def edge_triangle(self) -> np.ndarray:
        """Index of the triangle adjacent to each boundary edge."""
        t = self.triangles
        n = self.n_nodes
        keys = (t * n + np.roll(t, -1, axis=1)).ravel()
        owner = np.repeat(np.arange(len(t)), 3)
        order = np.argsort(keys)
        want = self.boundary_edges[:, 0] * n + self.boundary_edges[:, 1]
        pos = np.searchsorted(keys[order], want)
        if np.any(keys[order][np.minimum(pos, len(keys) - 1)] != want):
            raise MeshFailure("boundary edge without an adjacent triangle")
        return owner[order][pos]

    @cached_property
    def gradients(self) -> np.ndarray:
        """Gradients of the three hat functions on every triangle, shape (M, 3, 2)."""
        p = self.nodes[self.triangles]
        b = np.stack([p[:, 1, 1] - p[:, 2, 1], p[:, 2, 1] - p[:, 0, 1], p[:, 0, 1] - p[:, 1, 1]], 1)
        c = np.stack([p[:, 2, 0] - p[:, 1, 0], p[:, 0, 0] - p[:, 2, 0], p[:, 1, 0] - p[:, 0, 0]], 1)
        return np.stack([b, c], axis=2) / (2.0 * self.areas)[:, None, None]


def mesh_polygon(
    P: ConvexPolygon,
    h_target: float,
    grading: Grading | None = None,
    interior_points=None,
    max_rounds: int = 30,
) -> TriMesh:
    """Quality-constrained Delaunay mesh of P with tagged boundary edges.

    ``interior_points`` are inserted as mesh nodes (points on or outside the
    boundary are skipped), so fields can be read off exactly at them.
    """
    if h_target <= 0:
        raise ValueError("h_target must be positive")
    tags = list(P.edge_tags) if P.edge_tags else ["dirichlet"] * len(P)
    names = sorted(set(tags))
    marker_of = {name: k + 1 for k, name in enumerate(names)}

    pts: list[np.ndarray] = []
    seg_markers: list[int] = []
    verts = P.vertices
    for i in range(len(P)):
        a, b = verts[i], verts[(i + 1) % len(P)]
        ha = _local_size(grading, a, h_target)
        hb = _local_size(grading, b, h_target)
        m = max(1, math.ceil(np.hypot(*(b - a)) / min(ha, hb)))
        for s in np.arange(m) / m:
            pts.append(a + s * (b - a))
            seg_markers.append(marker_of[tags[i]])
    n = len(pts)
    segs = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    vertices = np.array(pts)
    if interior_points is not None:
        extra = np.atleast_2d(np.asarray(interior_points, dtype=float))
        nrm, off = P.outward_normals()
        inside = np.all(extra @ nrm.T < off - 1e-9 * max(1.0, h_target), axis=1)
        vertices = np.concatenate([vertices, extra[inside]])
    data = {
        "vertices": vertices,
        "segments": segs,
        "segment_markers": np.array(seg_markers, dtype=np.int32),
    }
    max_area = math.sqrt(3.0) / 4.0 * h_target**2
    opts = f"pq{MIN_ANGLE_DEG:g}a{max_area:.17g}Q"
    try:
        out = triangle.triangulate(data, opts)
        for _ in range(max_rounds):
            need = _refinement_areas(out, h_target, grading)
            if need is None:
                break
            out["triangle_max_area"] = need
            out = triangle.triangulate(out, f"rpq{MIN_ANGLE_DEG:g}aQ")
        else:
            raise MeshFailure(f"size targets not met after {max_rounds} refinement rounds")
    except MeshFailure:
        raise
    except Exception as exc:  # Triangle reports failures as generic errors
        raise MeshFailure(f"triangulation failed: {exc}") from exc

    mesh = _to_trimesh(out, names, h_target, P)
    angle = mesh.min_angle()
    if angle < MIN_ANGLE_DEG - 1e-6:
        raise MeshFailure(f"minimum angle {angle:.2f} deg below {MIN_ANGLE_DEG} deg")
    return mesh


def _local_size(grading: Grading | None, x: np.ndarray, h: float) -> float:
    if grading is None:
        return h
    return float(grading.size(np.atleast_2d(x), h)[0])


def _refinement_areas(out: dict, h: float, grading: Grading | None) -> np.ndarray | None:
    p = out["vertices"][out["triangles"]]
    longest = np.linalg.norm(np.roll(p, -1, axis=1) - p, axis=2).max(axis=1)
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    size = np.full(len(p), h) if grading is None else grading.size(p.mean(axis=1), h)
    target = math.sqrt(3.0) / 4.0 * size**2
    bad = (longest > MAX_EDGE_FACTOR * size) | (area > target * (1 + 1e-9))
    if not bad.any():
        return None
    need = np.full(len(p), -1.0)
    need[bad] = np.minimum(target[bad], 0.5 * area[bad])
    return need


def _to_trimesh(out: dict, names: list[str], h: float, P: ConvexPolygon) -> TriMesh:
    nodes = np.asarray(out["vertices"], dtype=float)
    tris = np.asarray(out["triangles"], dtype=np.int64)
    p = nodes[tris]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    signed = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    flip = signed < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    if np.any(np.abs(signed) <= 2e-14):
        raise MeshFailure("degenerate triangle in mesh")

    segs = np.asarray(out["segments"], dtype=np.int64)
    markers = np.asarray(out["segment_markers"]).ravel()
    # orient boundary edges counterclockwise: the interior lies to the left
    centre = P.vertices.mean(axis=0)
    a, b = nodes[segs[:, 0]], nodes[segs[:, 1]]
    d1, d2 = b - a, centre - a
    cw = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    segs[cw] = segs[cw][:, ::-1]
    order = _boundary_loop(segs)
    segs = segs[order]
    tags = tuple(names[int(m) - 1] for m in markers[order])

    used = np.zeros(len(nodes), dtype=bool)
    used[tris.ravel()] = True
    if not used.all():
        remap = -np.ones(len(nodes), dtype=np.int64)
        remap[used] = np.arange(used.sum())
        nodes, tris, segs = nodes[used], remap[tris], remap[segs]
    return TriMesh(nodes, tris, segs, tags, float(h))


def _boundary_loop(segs: np.ndarray) -> np.ndarray:
    nxt = {int(a): k for k, (a, _) in enumerate(segs)}
    if len(nxt) != len(segs):
        raise MeshFailure("boundary is not a simple closed loop")
    start = int(np.argmin(segs[:, 0]))
    order = [start]
    for _ in range(len(segs) - 1):
        k = nxt.get(int(segs[order[-1], 1]))
        if k is None or k == start:
            raise MeshFailure("boundary is not a single closed loop")
        order.append(k)
    return np.array(order)


def refine_uniform(mesh: TriMesh) -> TriMesh:
    """Split every triangle into four through its edge midpoints (nested refinement)."""
    t = mesh.triangles
    n = mesh.n_nodes
    pairs = np.stack([t, np.roll(t, -1, axis=1)], axis=2).reshape(-1, 2)
    key = np.sort(pairs, axis=1)
    uniq, inv = np.unique(key[:, 0] * n + key[:, 1], return_inverse=True)
    mid_nodes = 0.5 * (mesh.nodes[uniq // n] + mesh.nodes[uniq % n])
    mid = (n + inv).reshape(-1, 3)  # mid[k, i] sits on edge t[k,i] -> t[k,i+1]
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    ab, bc, ca = mid[:, 0], mid[:, 1], mid[:, 2]
    tris = np.concatenate(
        [np.stack(x, axis=1) for x in ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))]
    )
    E = mesh.boundary_edges
    ekey = np.sort(E, axis=1)
    emid = n + np.searchsorted(uniq, ekey[:, 0] * n + ekey[:, 1])
    edges = np.stack([np.stack([E[:, 0], emid], 1), np.stack([emid, E[:, 1]], 1)], 1).reshape(-1, 2)
    tags = tuple(tag for tag in mesh.boundary_tags for _ in range(2))
    return TriMesh(
        np.concatenate([mesh.nodes, mid_nodes]), tris, edges, tags, 0.5 * mesh.h_target
    )


def map_mesh(mesh: TriMesh, fn: Callable[[np.ndarray], np.ndarray]) -> TriMesh:
    """Same connectivity with nodes moved by ``fn``; rejects inverted elements."""
    moved = TriMesh(np.asarray(fn(mesh.nodes), dtype=float), mesh.triangles.copy(),
                    mesh.boundary_edges.copy(), mesh.boundary_tags, mesh.h_target)
    if np.any(moved.areas <= 1e-14):
        raise MeshFailure("node map inverts or collapses a triangle")
    return moved


def assemble(mesh: TriMesh) -> tuple[sp.csr_matrix, np.ndarray]:
    """Stiffness matrix and the load vector of the unit source."""
    G = mesh.gradients
    A = mesh.areas
    local = np.einsum("kid,kjd->kij", G, G) * A[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    K = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2).tocsr()
    load = np.zeros(mesh.n_nodes)
    np.add.at(load, mesh.triangles.ravel(), np.repeat(A / 3.0, 3))
    return K, load


@dataclass(frozen=True, eq=False)
class ScalarField:
    mesh: TriMesh
    values: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise SolverDiverged("non-finite nodal values")
        self.values.setflags(write=False)

    @cached_property
    def _interpolator(self):
        from matplotlib.tri import LinearTriInterpolator, Triangulation

        tri = Triangulation(self.mesh.nodes[:, 0], self.mesh.nodes[:, 1], self.mesh.triangles)
        return LinearTriInterpolator(tri, self.values)

    @cached_property
    def _node_tree(self):
        from scipy.spatial import cKDTree

        return cKDTree(self.mesh.nodes)

    def __call__(self, points) -> np.ndarray:
        """Piecewise-linear interpolation.

        Points that coincide with a node return the nodal value; points a
        rounding error outside the mesh are projected onto the nearest
        boundary edge; anything farther out gives NaN.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        vals = np.ma.filled(self._interpolator(pts[:, 0], pts[:, 1]).astype(float), np.nan)
        dist, idx = self._node_tree.query(pts)
        snap = dist < 1e-12
        vals[snap] = self.values[idx[snap]]
        for k in np.flatnonzero(np.isnan(vals)):
            vals[k] = self._boundary_value(pts[k])
        return vals

    def _boundary_value(self, x: np.ndarray, tol: float = 1e-9) -> float:
        E = self.mesh.boundary_edges
        a, b = self.mesh.nodes[E[:, 0]], self.mesh.nodes[E[:, 1]]
        d = b - a
        s = np.clip(np.einsum("kd,kd->k", x - a, d) / np.einsum("kd,kd->k", d, d), 0.0, 1.0)
        proj = a + s[:, None] * d
        dist = np.hypot(*(proj - x).T)
        k = int(np.argmin(dist))
        if dist[k] > tol:
            return math.nan
        return float((1 - s[k]) * self.values[E[k, 0]] + s[k] * self.values[E[k, 1]])

    def element_gradients(self) -> np.ndarray:
        return np.einsum("kid,ki->kd", self.mesh.gradients, self.values[self.mesh.triangles])

    def energy(self) -> float:
        g = self.element_gradients()
        return float(np.sum(self.mesh.areas * np.einsum("kd,kd->k", g, g)))

    def integral(self) -> float:
        return float(np.sum(self.mesh.areas * self.values[self.mesh.triangles].mean(axis=1)))


@dataclass(frozen=True)
class TorsionResult:
    u: ScalarField
    T: float
    T_stiffness: float

    def __iter__(self):
        return iter((self.u, self.T))


@dataclass(frozen=True)
class MixedResult:
    w: ScalarField
    energy: float

    def __iter__(self):
        return iter((self.w, self.energy))


def _pcg(A: sp.csr_matrix, b: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    if n == 0:
        return np.zeros(0)
    if not np.any(b):
        return np.zeros(n)
    maxiter = max(10, math.ceil(50 * math.sqrt(n)))
    M = sp.diags(1.0 / A.diagonal())
    x, info = cg(A, b, rtol=CG_RTOL, atol=0.0, maxiter=maxiter, M=M)
    if info != 0:
        res = np.linalg.norm(b - A @ x) / np.linalg.norm(b)
        raise SolverDiverged(f"CG stopped after {maxiter} iterations, relative residual {res:.2e}")
    return x


def _solve_dirichlet(
    mesh: TriMesh, K: sp.csr_matrix, rhs: np.ndarray, fixed: np.ndarray, fixed_values: np.ndarray
) -> np.ndarray:
    u = np.zeros(mesh.n_nodes)
    u[fixed] = fixed_values
    free = np.setdiff1d(np.arange(mesh.n_nodes), fixed)
    b = rhs[free] - K[free][:, fixed] @ fixed_values
    u[free] = _pcg(K[free][:, free].tocsr(), b)
    return u


def solve_torsion(mesh: TriMesh, source: float = 1.0) -> TorsionResult:
    """-Lap u = source with u = 0 on the whole boundary; T = int u = int |grad u|^2."""
    K, load = assemble(mesh)
    fixed = mesh.boundary_nodes
    u = _solve_dirichlet(mesh, K, source * load, fixed, np.zeros(len(fixed)))
    field = ScalarField(mesh, u)
    T_load = float(load @ u) * source
    T_stiff = float(u @ (K @ u))
    return TorsionResult(field, T_load, T_stiff)


def solve_mixed(mesh: TriMesh, source: float = 1.0) -> MixedResult:
    """-Lap w = source, w = 0 on 'dirichlet' edges, natural Neumann elsewhere."""
    fixed = mesh.nodes_with_tag("dirichlet")
    if len(fixed) == 0:
        raise NoDirichlet("no boundary edge is tagged 'dirichlet'")
    K, load = assemble(mesh)
    w = _solve_dirichlet(mesh, K, source * load, fixed, np.zeros(len(fixed)))
    return MixedResult(ScalarField(mesh, w), float(w @ (K @ w)))


def solve_harmonic(mesh: TriMesh, boundary_data: BoundaryData) -> ScalarField:
    """Discrete harmonic extension of Dirichlet data given on every boundary node.

    ``boundary_data(points, tags)`` receives the boundary node coordinates and
    the tag of the boundary edge leaving each node.
    """
    K, _ = assemble(mesh)
    fixed = mesh.boundary_nodes
    tags = [mesh.node_tags[int(i)] for i in fixed]
    values = np.asarray(boundary_data(mesh.nodes[fixed], tags), dtype=float)
    if values.shape != (len(fixed),):
        raise ValueError("boundary_data must return one value per boundary node")
    u = _solve_dirichlet(mesh, K, np.zeros(mesh.n_nodes), fixed, values)
    return ScalarField(mesh, u)


@dataclass(frozen=True, eq=False)
class BoundaryFlux:
    """Outward normal derivative on the boundary edges, listed counterclockwise.

    ``start`` and ``end`` hold the recovered flux at the two ends of each edge
    (the recovered flux is linear per edge and may jump at corners);
    ``element`` is the gradient of the adjacent triangle dotted with the normal.
    """

    edges: np.ndarray
    tags: tuple[str, ...]
    midpoints: np.ndarray
    lengths: np.ndarray
    normals: np.ndarray
    start: np.ndarray
    end: np.ndarray
    element: np.ndarray

    @property
    def flux(self) -> np.ndarray:
        return 0.5 * (self.start + self.end)

    def select(self, prefix: str) -> np.ndarray:
        return np.array([t.startswith(prefix) for t in self.tags], dtype=bool)

    def gauss_points(self, mask=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Two-point Gauss rule per edge: points, weights, flux values."""
        mask = np.ones(len(self.tags), bool) if mask is None else np.asarray(mask)
        g = 0.5 / math.sqrt(3.0)
        s = np.array([0.5 - g, 0.5 + g])
        a = self.midpoints[mask] - 0.5 * self.lengths[mask, None] * _tangents(self.normals[mask])
        tang = _tangents(self.normals[mask])
        pts = a[:, None, :] + s[None, :, None] * self.lengths[mask, None, None] * tang[:, None, :]
        vals = self.start[mask, None] + s[None, :] * (self.end[mask] - self.start[mask])[:, None]
        w = np.repeat(0.5 * self.lengths[mask, None], 2, axis=1)
        return pts.reshape(-1, 2), w.ravel(), vals.ravel()


def _tangents(normals: np.ndarray) -> np.ndarray:
    # counterclockwise boundary: tangent = normal rotated by +90 degrees
    return np.column_stack([-normals[:, 1], normals[:, 0]])


def boundary_flux(mesh: TriMesh, field: ScalarField, source: float = 0.0) -> BoundaryFlux:
    """Recover the outward normal derivative by testing the weak form with boundary hats.

    The residual ``R_i = a(u, phi_i) - (f, phi_i)`` equals ``int (d_n u) phi_i``
    over the boundary; a consistent boundary mass solve on each smooth run of
    edges turns these moments into a piecewise-linear flux.  At corners the
    nodal residual is split between the two runs using the element-gradient
    flux, with the remainder shared in proportion to edge length.
    """
    K, load = assemble(mesh)
    u = field.values
    R = K @ u - source * load

    E = mesh.boundary_edges
    a, b = mesh.nodes[E[:, 0]], mesh.nodes[E[:, 1]]
    d = b - a
    L = np.hypot(d[:, 0], d[:, 1])
    tang = d / L[:, None]
    normals = np.column_stack([tang[:, 1], -tang[:, 0]])
    grads = field.element_gradients()[mesh.edge_triangle]
    elem = np.einsum("kd,kd->k", grads, normals)

    nE = len(E)
    prev = np.roll(np.arange(nE), 1)
    turn = np.arctan2(
        tang[prev, 0] * tang[:, 1] - tang[prev, 1] * tang[:, 0],
        np.einsum("kd,kd->k", tang[prev], tang),
    )
    corner = np.abs(turn) > CORNER_TURN  # corner at the start node of edge k

    start = np.zeros(nE)
    end = np.zeros(nE)
    if not corner.any():
        runs = [np.arange(nE)]
        closed = True
    else:
        first = int(np.argmax(corner))
        order = np.roll(np.arange(nE), -first)
        cuts = [i for i, k in enumerate(order) if corner[k]] + [nE]
        runs = [order[cuts[j]:cuts[j + 1]] for j in range(len(cuts) - 1)]
        closed = False

    # residual shares of each run's end nodes
    share_start = {}
    share_end = {}
    if not closed:
        for k in np.flatnonzero(corner):
            kp = prev[k]
            node = E[k, 0]
            g_in = elem[kp] * L[kp] / 2.0
            g_out = elem[k] * L[k] / 2.0
            rest = R[node] - g_in - g_out
            share_end[kp] = g_in + rest * L[kp] / (L[kp] + L[k])
            share_start[k] = g_out + rest * L[k] / (L[kp] + L[k])

    for run in runs:
        m = len(run)
        n_nodes = m if closed else m + 1
        diag = np.zeros(n_nodes)
        off = L[run] / 6.0
        diag[:m] += L[run] / 3.0
        if closed:
            diag += np.roll(L[run], 1) / 3.0
            M = sp.diags([diag, off[:-1], off[:-1]], [0, 1, -1], shape=(m, m), format="lil")
            M[m - 1, 0] = off[-1]
            M[0, m - 1] = off[-1]
            rhs = R[E[run, 0]]
        else:
            diag[1:] += L[run] / 3.0
            M = sp.diags([diag, off, off], [0, 1, -1], shape=(n_nodes, n_nodes), format="lil")
            rhs = np.concatenate([R[E[run, 0]], [0.0]])
            rhs[0] = share_start[run[0]]
            rhs[-1] = share_end[run[-1]]
        q = spsolve(M.tocsc(), rhs)
        start[run] = q[:m]
        end[run] = np.roll(q, -1)[:m] if closed else q[1:]

    return BoundaryFlux(
        edges=E,
        tags=mesh.boundary_tags,
        midpoints=0.5 * (a + b),
        lengths=L,
        normals=normals,
        start=start,
        end=end,
        element=elem,
    )
