import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from minwidth_lab.cheeger import CheegerMethod, cheeger_bisection, cheeger_three_cap
from minwidth_lab.errors import DomainError
from minwidth_lab.geometry import (
    ConvexPolygon,
    ThreeCapParams,
    build_polygon,
    build_three_cap,
    equilateral_triangle,
    incircle,
    inner_parallel_area,
    regular_polygon,
)

TRIANGLE_H = 3.0 + math.sqrt(math.pi * math.sqrt(3.0))


def test_unit_square_matches_quadratic_root(unit_square):
    # (1 - 2t)^2 = pi t^2  =>  t = 1 / (2 + sqrt(pi))
    res = cheeger_bisection(unit_square)
    assert res.h == pytest.approx(2.0 + math.sqrt(math.pi), abs=1e-6)
    assert res.method is CheegerMethod.BISECTION
    assert res.h * res.t_star == pytest.approx(1.0, abs=1e-15)


def test_fine_polygon_approaches_disk():
    assert cheeger_bisection(regular_polygon(720, 0.5)).h == pytest.approx(4.0, abs=1e-3)


def test_equilateral_triangle_bisection():
    assert cheeger_bisection(equilateral_triangle(1.0)).h == pytest.approx(TRIANGLE_H, abs=1e-8)


def test_closed_form_endpoints():
    assert cheeger_three_cap(1 / 3).h == pytest.approx(TRIANGLE_H, abs=1e-12)
    assert cheeger_three_cap(0.5).h == pytest.approx(4.0, abs=1e-12)
    assert cheeger_three_cap(0.4).method is CheegerMethod.CLOSED_FORM


def test_closed_form_rejects_out_of_range():
    with pytest.raises(DomainError):
        cheeger_three_cap(0.3)
    with pytest.raises(DomainError):
        cheeger_three_cap(0.51)


def test_tol_range_is_enforced(unit_square):
    with pytest.raises(ValueError):
        cheeger_bisection(unit_square, tol=0.0)
    with pytest.raises(ValueError):
        cheeger_bisection(unit_square, tol=1e-2)


@pytest.mark.parametrize("r", [0.35, 0.4, 0.45, 0.49])
def test_bisection_agrees_with_closed_form(r):
    P = build_three_cap(ThreeCapParams.equilateral(r, n_arc=512))
    assert abs(cheeger_bisection(P).h - cheeger_three_cap(r).h) <= 2e-3


def test_closed_form_strictly_decreasing():
    h = [cheeger_three_cap(r).h for r in np.linspace(1 / 3, 0.5, 129)]
    assert np.all(np.diff(h) < 0)


@given(st.floats(1 / 3, 0.5))
def test_t_star_within_inradius(r):
    res = cheeger_three_cap(r)
    assert 0 < res.t_star <= r


@given(st.integers(0, 10_000))
def test_root_balances_inner_area(seed):
    P = build_polygon(np.random.default_rng(seed).normal(size=(12, 2)))
    res = cheeger_bisection(P)
    assert 0 < res.t_star < incircle(P).radius
    lhs = inner_parallel_area(P, res.t_star)
    assert lhs == pytest.approx(math.pi * res.t_star**2, rel=1e-8)


@given(st.integers(0, 10_000), st.floats(0.3, 0.95))
def test_monotone_under_inclusion(seed, shrink):
    Q = build_polygon(np.random.default_rng(seed).normal(size=(15, 2)))
    c = Q.vertices.mean(axis=0)
    P = ConvexPolygon(c + shrink * (Q.vertices - c))
    # scaling gives an exact oracle as well as the inclusion ordering
    assert cheeger_bisection(P).h == pytest.approx(cheeger_bisection(Q).h / shrink, rel=1e-8)
    assert cheeger_bisection(P).h >= cheeger_bisection(Q).h


def test_clipped_polygon_has_larger_constant(unit_square):
    clipped = ConvexPolygon(np.array([[0, 0], [1, 0], [1, 0.6], [0.6, 1], [0, 1]], dtype=float))
    assert cheeger_bisection(clipped).h > cheeger_bisection(unit_square).h
