import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from minwidth_lab.errors import CapsOverlap, DomainError
from minwidth_lab.fem import mesh_polygon, solve_torsion
from minwidth_lab.geometry import (
    ThreeCapParams,
    build_three_cap,
    cap_area_f,
    cap_half_angle,
    equilateral_triangle,
    regular_polygon,
)
from minwidth_lab.shape_analysis import (
    Landscape,
    LandscapeRow,
    cap_arc,
    fixed_inradius_landscape,
    gradient_cone_fraction,
    hexagon_scan,
    inclusion_bounds,
    landscape_grid,
    nested_values,
    normalize_abc,
    pal_area_scan,
    permuted_gaps,
    rotation_morph,
    slice_flux_symmetry,
    torsion_estimate,
    trace_compare_BC,
    vertex_shape_derivative,
)
from minwidth_lab.tables import ComparisonTable

# ---------------------------------------------------------------------------
# comparison tables


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=30, unique=True), st.integers(0, 1000))
def test_table_rows_sorted_and_difference_exact(params, seed):
    rng = np.random.default_rng(seed)
    lhs, rhs = rng.normal(size=len(params)), rng.normal(size=len(params))
    tab = ComparisonTable(params, lhs, rhs, 0.1)
    assert np.all(np.diff(tab.parameter) > 0)
    order = np.argsort(params)
    assert np.array_equal(tab.lhs, lhs[order])
    assert np.array_equal(tab.difference, lhs[order] - rhs[order])
    assert np.all(tab.error == 0.1) and len(tab) == len(params)
    assert [row[3] for row in tab.rows()] == list(tab.difference)


def test_table_columns_are_read_only():
    tab = ComparisonTable([2.0, 1.0], [1.0, 2.0], [0.0, 0.0], [0.1, 0.2], points=[[0, 2], [0, 1]])
    with pytest.raises(ValueError):
        tab.lhs[0] = 5.0
    assert np.array_equal(tab.points, [[0, 1], [0, 2]])
    assert np.array_equal(tab.error, [0.2, 0.1])


def test_table_sign_checks():
    tab = ComparisonTable([0, 1, 2], [1.0, 0.05, 0.0], [0.0, 0.0, 0.01], [0.1, 0.1, 0.1])
    assert not tab.positive_beyond_error()
    assert tab.positive_beyond_error(mask=np.array([True, False, False]))
    assert tab.nonnegative_within_error()
    assert not tab.zero_within_error()


# ---------------------------------------------------------------------------
# nested refinement


def test_extrapolation_is_exact_for_quadratic_error(unit_square):
    est = nested_values(mesh_polygon(unit_square, 0.2), 3, lambda m: 1.0 + 5.0 * m.h_target**2)
    assert est.value == pytest.approx(1.0, abs=1e-14)
    assert est.error < 1e-13
    assert len(est.raw) == 3 and len(est.extrapolated) == 2


def test_nested_values_need_two_levels(unit_square):
    with pytest.raises(ValueError):
        nested_values(mesh_polygon(unit_square, 0.2), 1, lambda m: 0.0)


def test_error_estimate_bounds_true_error_on_triangle():
    est = torsion_estimate(equilateral_triangle(1.0), 0.08, levels=3)
    exact = math.sqrt(3) / 180
    assert abs(est.value - exact) <= est.error
    assert abs(est.value - exact) < 0.1 * abs(est.raw[-1] - exact)


# ---------------------------------------------------------------------------
# vertex rotation


def test_rotation_morph_moves_only_the_chosen_cap():
    p = ThreeCapParams(0.4, 0.0, 2.0, -2.2, n_arc=64)
    eps = 0.01
    fn = rotation_morph(p, "A", eps)
    q = p.with_angle("A", eps)
    assert np.allclose(fn(p.vertex("A")[None]), q.vertex("A"), atol=1e-12)
    for a, b in zip(p.tangent_points("A"), q.tangent_points("A")):
        assert np.allclose(fn(a[None]), b, atol=1e-12)
    fixed = np.array([[0.0, 0.0], p.vertex("B"), p.vertex("C")])
    assert np.allclose(fn(fixed), fixed, atol=1e-12)


def test_equilateral_vertex_derivative_is_negligible():
    d = vertex_shape_derivative(ThreeCapParams.equilateral(0.4), "A", h_mesh=0.03)
    assert abs(d.dT_dphi_flux) <= 5e-3 * d.T
    assert abs(d.dT_dphi_fd) <= 5e-3 * d.T


def test_vertex_derivative_requires_cap_margin():
    a = cap_half_angle(0.4)
    p = ThreeCapParams(0.4, 0.0, 2 * a + 1e-4, math.pi + 1.0)
    with pytest.raises(CapsOverlap):
        vertex_shape_derivative(p, "A", h_mesh=0.05, fd_step=1e-3)


# ---------------------------------------------------------------------------
# trace comparison


@given(st.floats(0.34, 0.49), st.floats(0, 2 * math.pi), st.floats(0, 1), st.floats(0, 1), st.booleans())
def test_normalize_abc_puts_nearer_neighbour_first(r, phi0, u, v, mirror):
    a = cap_half_angle(r)
    slack = 2 * math.pi - 6 * a - 1e-6
    g1 = 2 * a + 1e-6 / 3 + slack * u / 2
    g2 = 2 * a + 1e-6 / 3 + (slack - slack * u / 2) * v
    sign = -1 if mirror else 1
    p = ThreeCapParams(r, phi0, phi0 + sign * g1, phi0 + sign * (g1 + g2), n_arc=32)
    q = normalize_abc(p)
    assert q.phi_A == 0.0
    assert 0 < q.phi_B < q.phi_C < 2 * math.pi
    gaps = q.gaps()
    assert gaps["A"] <= gaps["C"] + 1e-12
    assert sorted(gaps.values()) == pytest.approx(sorted(p.gaps().values()), abs=1e-9)
    again = normalize_abc(q)
    assert (again.phi_B, again.phi_C) == pytest.approx((q.phi_B, q.phi_C), abs=1e-12)


def test_cap_arc_runs_between_tangent_points():
    p = ThreeCapParams(0.4, 0.0, 2.0, 4.0)
    pts = cap_arc(p, "B", np.array([0.0, p.alpha, 2 * p.alpha]))
    assert np.allclose(np.hypot(*pts.T), 0.4)
    ends = {tuple(np.round(x, 12)) for x in p.tangent_points("B")}
    assert {tuple(np.round(pts[0], 12)), tuple(np.round(pts[2], 12))} == ends
    assert np.allclose(pts[1] / 0.4, [math.cos(2.0), math.sin(2.0)])


def test_symmetric_configuration_trace_difference_vanishes():
    a = cap_half_angle(0.4)
    g = 2 * a + 0.3
    p = ThreeCapParams(0.4, 0.0, g, 2 * math.pi - g)
    tab = trace_compare_BC(p, samples=11, h_mesh=0.04, levels=2)
    assert tab.zero_within_error()
    assert tab.metadata["gap_AB"] == pytest.approx(tab.metadata["gap_CA"])


# ---------------------------------------------------------------------------
# landscape


def test_landscape_grid_partitions_triples():
    ok, skipped = landscape_grid(0.4, 5)
    assert (120, 120, 120) in ok
    two_alpha = math.degrees(2 * cap_half_angle(0.4))
    assert all(sum(g) == 360 for g in ok + skipped)
    assert all(min(g) > two_alpha for g in ok)
    assert all(min(g) <= two_alpha for g in skipped)
    assert len(ok) + len(skipped) == 70 * 71 // 2
    with pytest.raises(DomainError):
        landscape_grid(0.4, 7)


def test_landscape_helpers():
    rows = [
        LandscapeRow((120, 120, 120), 0, 0, 1.0, 0.01),
        LandscapeRow((90, 120, 150), 0, 0, 1.2, 0.01),
        LandscapeRow((150, 120, 90), 0, 0, 1.25, 0.02),
    ]
    land = Landscape(0.4, rows)
    assert land.argmin.gaps_deg == (120, 120, 120)
    assert land.row((90, 120, 150)).T == 1.2
    with pytest.raises(KeyError):
        land.row((100, 100, 160))
    spread = dict((k, (s, e)) for k, s, e in land.symmetry_spread())
    assert spread[(90, 120, 150)] == pytest.approx((0.05, 0.02))
    assert spread[(120, 120, 120)] == (0.0, 0.01)
    assert len(permuted_gaps((90, 120, 150))) == 6
    assert permuted_gaps((120, 120, 120)) == [(120, 120, 120)]


def test_coarse_landscape_minimized_by_equilateral():
    land = fixed_inradius_landscape(0.45, grid_step_deg=30, h_mesh=0.08, levels=2, n_arc=64)
    assert len(land.rows) == 10
    assert land.argmin.gaps_deg == (120, 120, 120)
    lo, hi = inclusion_bounds(0.45)
    assert all(lo <= row.T <= hi for row in land.rows)
    for _, spread, err in land.symmetry_spread():
        assert spread <= 2 * err + 1e-6


def test_landscape_needs_open_inradius_range():
    with pytest.raises(DomainError):
        fixed_inradius_landscape(0.5)


# ---------------------------------------------------------------------------
# hexagons and slices


def test_half_hexagon_matches_regular_hexagon_oracle():
    (row,) = hexagon_scan([0.5], h_mesh=0.04, levels=3)
    oracle = solve_torsion(mesh_polygon(regular_polygon(6, 0.5), 0.01)).T
    assert row.T == pytest.approx(oracle, rel=2e-3)
    assert row.slice_relative_gap <= 1e-2


def test_symmetric_slice_flux_difference_vanishes():
    tab = slice_flux_symmetry(0.5, samples=8, h_mesh=0.04, levels=2)
    assert tab.zero_within_error()


def test_flux_difference_shrinks_toward_midpoint():
    tab = slice_flux_symmetry(0.4, samples=10, h_mesh=0.04, levels=2)
    d = tab.difference
    assert abs(d[0]) < abs(d).max() / 3
    assert np.all(d > 0)


def test_slice_gradients_lie_in_cone():
    assert gradient_cone_fraction(0.4, h_mesh=0.03) >= 0.99


# ---------------------------------------------------------------------------
# area


def test_area_scan_minimized_by_triangle():
    scan = pal_area_scan(np.linspace(1 / 3, 0.5, 65))
    assert scan.argmin == pytest.approx(1 / 3)
    assert scan.f[0] == pytest.approx(math.sqrt(3) / 3, abs=1e-12)
    assert scan.f[-1] == pytest.approx(math.pi / 4, abs=1e-12)
    assert np.all(np.diff(scan.f) > 0)
    assert np.all(scan.fprime[1:-1] > 0)


@given(st.floats(1 / 3, 0.5))
def test_area_lies_between_inclusion_disks(r):
    f, _ = cap_area_f(r)
    assert math.pi * r * r <= f + 1e-12 <= math.pi * (1 - r) ** 2 + 2e-12
    lo, hi = inclusion_bounds(r)
    assert lo == pytest.approx(math.pi * r**4 / 8) and hi == pytest.approx(math.pi * (1 - r) ** 4 / 8)


def test_three_cap_torsion_between_inclusion_disks():
    T = solve_torsion(mesh_polygon(build_three_cap(ThreeCapParams(0.42, 0.0, 2.0, 4.2, n_arc=64)), 0.04)).T
    lo, hi = inclusion_bounds(0.42)
    assert lo < T < hi
