import math

import numpy as np
import pytest
import shapely
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from minwidth_lab.errors import CapsOverlap, DegenerateInput, DomainError, EmptyBody
from minwidth_lab.geometry import (
    EQUILATERAL_ANGLES,
    ConvexPolygon,
    ThreeCapParams,
    build_hexagon,
    build_polygon,
    build_slice_triangle,
    build_three_cap,
    cap_area_f,
    cap_half_angle,
    equilateral_triangle,
    incircle,
    inner_parallel,
    inner_parallel_area,
    min_width,
    regular_polygon,
)


def sampled_width(P: ConvexPolygon, n: int = 10_000) -> float:
    """Dense sampling of the width function, polished by a bounded scalar search (an upper bound)."""
    theta = np.linspace(0.0, math.pi, n, endpoint=False)
    w = P.width(theta)
    k = int(np.argmin(w))
    res = minimize_scalar(lambda t: float(P.width(t)[0]),
                          bounds=(theta[k] - math.pi / n, theta[k] + math.pi / n),
                          method="bounded", options={"xatol": 1e-13})
    return min(float(res.fun), float(w.min()))


def edge_normal_width(P: ConvexPolygon) -> float:
    """Exhaustive O(n^2) width over every edge-normal direction."""
    e = P.edges
    normals = np.column_stack([e[:, 1], -e[:, 0]]) / np.hypot(e[:, 0], e[:, 1])[:, None]
    proj = P.vertices @ normals.T
    return float(np.min(proj.max(axis=0) - proj.min(axis=0)))


def brute_width(P: ConvexPolygon) -> float:
    return min(sampled_width(P), edge_normal_width(P))


def shapely_poly(P: ConvexPolygon):
    return shapely.Polygon(P.vertices)


# ---------------------------------------------------------------------------
# polygons


def test_build_polygon_triangle_is_ccw():
    P = build_polygon([(0, 0), (1, 0), (0, 1)])
    assert len(P) == 3
    assert P.area == pytest.approx(0.5)


def test_build_polygon_drops_interior_point():
    P = build_polygon([(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0.5)])
    assert len(P) == 4
    assert P.area == pytest.approx(1.0)


def test_build_polygon_rejects_collinear():
    with pytest.raises(DegenerateInput):
        build_polygon([(0, 0), (1, 0), (2, 0)])


def test_polygon_rejects_clockwise_and_duplicates():
    with pytest.raises(DegenerateInput):
        ConvexPolygon(np.array([[0, 0], [0, 1], [1, 0]], dtype=float))
    with pytest.raises(DegenerateInput):
        ConvexPolygon(np.array([[0, 0], [0, 0], [1, 0], [0, 1]], dtype=float))
    with pytest.raises(DegenerateInput):
        ConvexPolygon(np.array([[0, 0], [1, 0]], dtype=float))


def test_polygon_rejects_reflex_vertex():
    with pytest.raises(DegenerateInput):
        ConvexPolygon(np.array([[0, 0], [2, 0], [1, 0.2], [2, 2], [0, 2]], dtype=float))


def test_polygon_vertices_are_read_only(unit_square):
    with pytest.raises(ValueError):
        unit_square.vertices[0, 0] = 5.0


def test_tag_count_must_match():
    with pytest.raises(ValueError):
        ConvexPolygon(np.array([[0, 0], [1, 0], [0, 1]], dtype=float), ("a", "b"))


# ---------------------------------------------------------------------------
# width


def test_min_width_triangle_is_its_height():
    w, _ = min_width(equilateral_triangle(1.0))
    assert w == pytest.approx(1.0, abs=1e-12)


def test_min_width_fine_disk_polygon():
    w, _ = min_width(regular_polygon(720, 0.5))
    assert w == pytest.approx(1.0, abs=1e-4)


def test_min_width_direction_attains_minimum():
    P = build_polygon(np.random.default_rng(3).normal(size=(30, 2)))
    w, theta = min_width(P)
    assert float(P.width(theta)[0]) == pytest.approx(w, abs=1e-12)


def test_min_width_three_cap_with_free_direction():
    # caps leave a direction whose both support lines touch the incircle, so the width is 2r
    P = build_three_cap(ThreeCapParams(0.45, 0.0, 1.3, 3.8))
    w, _ = min_width(P)
    assert w == pytest.approx(brute_width(P), abs=1e-12)
    assert w <= sampled_width(P) + 1e-12
    assert w == pytest.approx(0.9, abs=1e-5)


def test_three_cap_clustered_angles_overlap():
    with pytest.raises(CapsOverlap):
        build_three_cap(ThreeCapParams(0.4, 0.0, 0.9, 1.8))


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=3, max_size=25))
def test_min_width_matches_brute_force(points):
    try:
        P = build_polygon(points)
    except DegenerateInput:
        assume(False)
    assume(P.area > 1e-3)
    w, _ = min_width(P)
    assert w == pytest.approx(brute_width(P), abs=1e-9 * max(1.0, w))


@given(st.floats(0.0, 2 * math.pi), st.floats(-3, 3), st.floats(-3, 3))
def test_min_width_is_rigid_motion_invariant(angle, dx, dy):
    P = build_polygon(np.random.default_rng(11).uniform(-1, 1, size=(15, 2)))
    c, s = math.cos(angle), math.sin(angle)
    Q = ConvexPolygon(P.vertices @ np.array([[c, s], [-s, c]]) + [dx, dy])
    assert min_width(Q)[0] == pytest.approx(min_width(P)[0], abs=1e-10)


@given(st.floats(0.05, 0.95))
def test_width_monotone_under_inclusion(t):
    Q = build_polygon(np.random.default_rng(5).uniform(-1, 1, size=(20, 2)))
    P = inner_parallel(Q, t * incircle(Q).radius)
    assert np.all(Q.contains(P.vertices, 1e-9))
    assert min_width(P)[0] <= min_width(Q)[0] + 1e-12


# ---------------------------------------------------------------------------
# incircle


def test_incircle_square(unit_square):
    d = incircle(unit_square)
    assert np.allclose(d.center, [0.5, 0.5], atol=1e-9)
    assert d.radius == pytest.approx(0.5, abs=1e-9)


def test_incircle_triangle():
    assert incircle(equilateral_triangle(1.0)).radius == pytest.approx(1 / 3, abs=1e-9)


def test_incircle_three_cap_matches_shapely_oracle():
    P = build_three_cap(ThreeCapParams.equilateral(0.4))
    d = incircle(P)
    assert d.radius == pytest.approx(0.4, abs=1e-5)  # chords sit inside the circle
    line = shapely.maximum_inscribed_circle(shapely_poly(P), tolerance=1e-7)
    assert d.radius == pytest.approx(line.length, abs=1e-6)


@given(st.integers(0, 10_000))
def test_incircle_disk_is_inside(seed):
    P = build_polygon(np.random.default_rng(seed).normal(size=(12, 2)))
    d = incircle(P)
    n, off = P.outward_normals()
    assert np.all(off - n @ d.center >= d.radius - 1e-9)
    oracle = shapely.maximum_inscribed_circle(shapely_poly(P), tolerance=1e-8).length
    assert d.radius == pytest.approx(oracle, abs=1e-6)


# ---------------------------------------------------------------------------
# inner parallel bodies


def test_inner_parallel_square(unit_square):
    Q = inner_parallel(unit_square, 0.1)
    assert Q.area == pytest.approx(0.64, abs=1e-12)


def test_inner_parallel_zero_offset_is_identity(unit_square):
    assert inner_parallel(unit_square, 0.0) is unit_square


def test_inner_parallel_triangle_is_homothetic():
    T = equilateral_triangle(1.0)
    Q = inner_parallel(T, 1 / 6)
    assert Q.area == pytest.approx(0.25 * math.sqrt(3) / 3, abs=1e-12)
    oracle = shapely_poly(T).buffer(-1 / 6, join_style="mitre").area
    assert Q.area == pytest.approx(oracle, abs=1e-10)


def test_inner_parallel_empty_beyond_inradius(unit_square):
    with pytest.raises(EmptyBody):
        inner_parallel(unit_square, 0.5)
    assert inner_parallel_area(unit_square, 0.6) == 0.0


@given(st.integers(0, 10_000), st.floats(0.01, 0.95))
def test_inner_parallel_matches_buffer_oracle(seed, frac):
    P = build_polygon(np.random.default_rng(seed).normal(size=(10, 2)))
    t = frac * incircle(P).radius
    oracle = shapely_poly(P).buffer(-t, join_style="mitre").area
    assert inner_parallel_area(P, t) == pytest.approx(oracle, rel=1e-9, abs=1e-12)


@given(st.integers(3, 12), st.floats(0.0, 0.99))
def test_tangential_polygon_inner_body_is_homothetic(n, frac):
    P = regular_polygon(n, 1.0)
    rho = incircle(P).radius
    t = frac * rho
    assert inner_parallel_area(P, t) == pytest.approx(P.area * (rho - t) ** 2 / rho**2, rel=1e-9)


@given(st.floats(0.34, 0.5), st.floats(0.0, 0.9))
def test_three_cap_inner_body_is_nearly_homothetic(r, frac):
    # arc chords sit slightly inside the incircle, so homothety holds up to chord error
    P = build_three_cap(ThreeCapParams.equilateral(r, n_arc=256))
    rho = incircle(P).radius
    t = frac * rho
    assert inner_parallel_area(P, t) == pytest.approx(P.area * (rho - t) ** 2 / rho**2, rel=1e-3)


def test_inner_parallel_area_strictly_decreasing():
    P = build_three_cap(ThreeCapParams(0.4, 0.0, 2.0, 4.0, n_arc=32))
    rho = incircle(P).radius
    areas = [inner_parallel_area(P, t) for t in np.linspace(0, 0.999 * rho, 50)]
    assert np.all(np.diff(areas) < 0)


# ---------------------------------------------------------------------------
# three-cap sets


def test_three_cap_at_one_third_is_the_triangle():
    P = build_three_cap(ThreeCapParams.equilateral(1 / 3))
    assert len(P) == 6  # each vertex plus a merged tangency point per side
    assert P.area == pytest.approx(math.sqrt(3) / 3, abs=1e-12)
    assert min_width(P)[0] == pytest.approx(1.0, abs=1e-12)


def test_three_cap_at_one_half_is_a_disk():
    P = build_three_cap(ThreeCapParams(0.5, 0.3, 1.0, 4.0, n_arc=400))
    assert np.allclose(np.hypot(*P.vertices.T), 0.5, atol=1e-12)


def test_three_cap_area_matches_closed_form():
    P = build_three_cap(ThreeCapParams.equilateral(0.4))
    assert P.area == pytest.approx(cap_area_f(0.4)[0], abs=2e-4)


def test_three_cap_area_error_is_second_order():
    f = cap_area_f(0.42)[0]
    err = [f - build_three_cap(ThreeCapParams.equilateral(0.42, n_arc=n)).area for n in (16, 32, 64)]
    assert err[0] / err[1] == pytest.approx(4.0, rel=0.02)
    assert err[1] / err[2] == pytest.approx(4.0, rel=0.02)


def test_three_cap_vertices_and_tags():
    p = ThreeCapParams(0.4, 0.0, 2.0, -2.2, n_arc=8)
    P = build_three_cap(p)
    for label in "ABC":
        assert np.linalg.norm(p.vertex(label)) == pytest.approx(0.6, abs=1e-15)
        assert len(P.tagged_edges(f"segment:{label}S")) == 1
        assert len(P.tagged_edges(f"segment:{label}T")) == 1
    assert len(P.tagged_edges("arc:")) == 24


def test_cap_half_angle_range():
    assert cap_half_angle(1 / 3) == pytest.approx(math.pi / 3)
    assert cap_half_angle(0.5) == 0.0
    with pytest.raises(DomainError):
        cap_half_angle(0.3)


@given(st.floats(0.34, 0.49), st.floats(0, 2 * math.pi), st.floats(0, 1), st.floats(0, 1))
def test_any_admissible_three_cap_has_same_area_and_width_at_most_one(r, phi0, u, v):
    # disjoint caps fix the area; the width can drop below 1 when two caps nearly touch
    a = cap_half_angle(r)
    slack = 2 * math.pi - 6 * a
    g1 = 2 * a + slack * u / 2
    g2 = 2 * a + (slack - (g1 - 2 * a)) * v
    P = build_three_cap(ThreeCapParams(r, phi0, phi0 + g1, phi0 + g1 + g2, n_arc=256))
    assert P.area == pytest.approx(cap_area_f(r)[0], abs=3e-4)
    w = min_width(P)[0]
    assert w == pytest.approx(edge_normal_width(P), abs=1e-12)
    assert 2 * r - 1e-4 <= w <= 1.0 + 1e-12


def support_width_equilateral(r: float) -> float:
    """Minimal width of the exact equilateral three-cap set from its support function."""
    theta = np.linspace(0.0, math.pi / 3, 200_001)
    h = lambda x: np.maximum(r, (1 - r) * np.cos(x))
    return float(np.min(h(theta) + h(math.pi / 3 - theta)))


@pytest.mark.parametrize("r", [1 / 3, 0.36, 0.4, 0.45, 0.49])
def test_equilateral_three_cap_width_matches_support_function(r):
    P = build_three_cap(ThreeCapParams.equilateral(r, n_arc=1024))
    assert min_width(P)[0] == pytest.approx(support_width_equilateral(r), abs=1e-5)
    assert min_width(P)[0] <= 1.0 + 1e-12


def test_gaps_sum_to_full_turn():
    p = ThreeCapParams(0.4, 5.0, 1.0, 3.0)
    assert sum(p.gaps().values()) == pytest.approx(2 * math.pi)


# ---------------------------------------------------------------------------
# area function


def test_cap_area_endpoints():
    assert cap_area_f(1 / 3)[0] == pytest.approx(math.sqrt(3) / 3, abs=1e-12)
    assert cap_area_f(0.5)[0] == pytest.approx(math.pi / 4, abs=1e-12)
    assert cap_area_f(0.4)[1] > 0
    with pytest.raises(DomainError):
        cap_area_f(0.6)


def test_cap_area_triangle_shoelace_oracle():
    V = equilateral_triangle(1.0).vertices
    x, y = V.T
    shoelace = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    assert cap_area_f(1 / 3)[0] == pytest.approx(shoelace, abs=1e-12)


@given(st.floats(0.34, 0.49))
def test_cap_area_derivative_matches_difference_quotient(r):
    h = 1e-6
    fd = (cap_area_f(r + h)[0] - cap_area_f(r - h)[0]) / (2 * h)
    assert cap_area_f(r)[1] == pytest.approx(fd, rel=1e-6)


# ---------------------------------------------------------------------------
# hexagon and slice


def test_hexagon_at_one_half_is_regular():
    H = build_hexagon(0.5)
    assert np.allclose(np.hypot(*H.vertices.T), 0.5)
    assert H.area == pytest.approx(regular_polygon(6, 0.5).area, abs=1e-14)


def test_hexagon_at_one_third_radii():
    rho = np.hypot(*build_hexagon(1 / 3).vertices.T)
    assert np.allclose(rho, [2 / 3, 1 / 3] * 3)


@given(st.floats(1 / 3, 0.5))
def test_hexagon_inside_three_cap(r):
    P = build_three_cap(ThreeCapParams.equilateral(r, n_arc=64))
    assert np.all(P.contains(build_hexagon(r).vertices, 1e-12))


def test_slice_triangle_sides():
    S = build_slice_triangle(1 / 3)
    X, Y, Z = S.vertices
    assert np.linalg.norm(Y - X) == pytest.approx(1 / 3)
    assert np.linalg.norm(Z - X) == pytest.approx(2 / 3)
    # law of cosines: YZ^2 = 1/9 + 4/9 - 2 (1/3)(2/3) cos(pi/3)
    assert np.sum((Z - Y) ** 2) == pytest.approx(1 / 3, abs=1e-14)
    assert S.edge_tags == ("neumann", "dirichlet", "neumann")


def test_slice_triangle_symmetric_at_one_half():
    X, Y, Z = build_slice_triangle(0.5).vertices
    assert np.linalg.norm(Y - X) == pytest.approx(np.linalg.norm(Z - X))


@given(st.floats(1 / 3, 0.5))
def test_six_slices_tile_the_hexagon(r):
    assert 6 * build_slice_triangle(r).area == pytest.approx(build_hexagon(r).area, abs=1e-12)


def test_equilateral_angles_constant():
    assert EQUILATERAL_ANGLES[1] == pytest.approx(2 * math.pi / 3)
