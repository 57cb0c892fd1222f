"""Plain-text exchange formats and SVG outlines.

Polygon:  line 1 ``n``, then ``x y tag`` per vertex (tag of the edge leaving it).
Mesh:     line 1 ``n_nodes n_triangles n_boundary_edges``, then ``x y`` per node,
          ``i j k`` per triangle and ``i j tag`` per boundary edge.
Field:    one nodal value per line, in node order.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateInput
from .fem import ScalarField, TriMesh
from .geometry import ConvexPolygon

UNTAGGED = "-"

# colour per tag family; anything else falls back to grey
TAG_COLOURS = {
    "segment": "#d62728",
    "arc": "#1f77b4",
    "dirichlet": "#2ca02c",
    "neumann": "#ff7f0e",
    "diameter": "#9467bd",
}
DEFAULT_COLOUR = "#555555"


def _num(x: float) -> str:
    return repr(float(x))


def write_polygon(P: ConvexPolygon, path: str | os.PathLike) -> None:
    lines = [str(len(P))]
    for i, (x, y) in enumerate(P.vertices):
        tag = P.tag(i) or UNTAGGED
        lines.append(f"{_num(x)} {_num(y)} {tag}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_polygon(path: str | os.PathLike) -> ConvexPolygon:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows:
        raise DegenerateInput("empty polygon file")
    n = int(rows[0][0])
    if len(rows) - 1 != n:
        raise DegenerateInput(f"header announces {n} vertices, file has {len(rows) - 1}")
    pts = np.array([[float(r[0]), float(r[1])] for r in rows[1:]])
    tags = [r[2] if len(r) > 2 else UNTAGGED for r in rows[1:]]
    if all(t == UNTAGGED for t in tags):
        return ConvexPolygon(pts)
    return ConvexPolygon(pts, tuple("" if t == UNTAGGED else t for t in tags))


def write_mesh(mesh: TriMesh, path: str | os.PathLike) -> None:
    E = mesh.boundary_edges
    lines = [f"{mesh.n_nodes} {len(mesh.triangles)} {len(E)}"]
    lines += [f"{_num(x)} {_num(y)}" for x, y in mesh.nodes]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    lines += [f"{i} {j} {t}" for (i, j), t in zip(E, mesh.boundary_tags)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path: str | os.PathLike, h_target: float = float("nan")) -> TriMesh:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    n, m, b = (int(v) for v in rows[0])
    if len(rows) != 1 + n + m + b:
        raise DegenerateInput("mesh file length does not match its header")
    nodes = np.array([[float(v) for v in r] for r in rows[1 : 1 + n]])
    tris = np.array([[int(v) for v in r] for r in rows[1 + n : 1 + n + m]], dtype=np.int64)
    brows = rows[1 + n + m :]
    edges = np.array([[int(r[0]), int(r[1])] for r in brows], dtype=np.int64).reshape(-1, 2)
    tags = tuple(r[2] for r in brows)
    return TriMesh(nodes, tris, edges, tags, h_target)


def write_field(field: ScalarField | np.ndarray, path: str | os.PathLike) -> None:
    values = field.values if isinstance(field, ScalarField) else np.asarray(field)
    Path(path).write_text("".join(_num(v) + "\n" for v in values))


def read_field(path: str | os.PathLike) -> np.ndarray:
    return np.array([float(ln) for ln in Path(path).read_text().split()])


def tag_colour(tag: str) -> str:
    return TAG_COLOURS.get(tag.split(":")[0], DEFAULT_COLOUR)


def emit_geometry_svg(
    polygons: ConvexPolygon | Sequence[ConvexPolygon],
    path: str | os.PathLike,
    size: int = 480,
    points: Iterable[Sequence[float]] = (),
) -> None:
    """Outline figure with edges coloured by tag family; byte-identical for identical input."""
    if isinstance(polygons, ConvexPolygon):
        polygons = [polygons]
    if not str(path):
        raise FileNotFoundError("empty output path")
    allv = np.concatenate([P.vertices for P in polygons])
    lo, hi = allv.min(axis=0), allv.max(axis=0)
    span = float(max(hi - lo))
    pad = 0.05 * span
    scale = size / (span + 2 * pad)

    def xy(p):
        return (p[0] - lo[0] + pad) * scale, (hi[1] - p[1] + pad) * scale

    w = (hi[0] - lo[0] + 2 * pad) * scale
    h = (hi[1] - lo[1] + 2 * pad) * scale
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.2f}" height="{h:.2f}" '
        f'viewBox="0 0 {w:.2f} {h:.2f}">',
        f'<rect width="{w:.2f}" height="{h:.2f}" fill="white"/>',
    ]
    for k, P in enumerate(polygons):
        out.append(f'<g id="polygon{k}" stroke-width="1.5" fill="none" stroke-linecap="round">')
        V = P.vertices
        for i in range(len(P)):
            (x1, y1), (x2, y2) = xy(V[i]), xy(V[(i + 1) % len(P)])
            tag = P.tag(i)
            out.append(
                f'<line x1="{x1:.3f}" y1="{y1:.3f}" x2="{x2:.3f}" y2="{y2:.3f}" '
                f'stroke="{tag_colour(tag)}"><title>{tag or "untagged"}</title></line>'
            )
        out.append("</g>")
    for p in points:
        x, y = xy(p)
        out.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="2" fill="black"/>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
