"""Cheeger constants of convex polygons.

For a convex body K the Cheeger constant is 1/t where t solves
``|K_{-t}| = pi t^2``.  The inner parallel area is
strictly decreasing in t while pi t^2 increases, so bisection on
(0, inradius) finds the unique root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import NumericalFailure
from .geometry import ConvexPolygon, cap_area_f, incircle, inner_parallel_area

MAX_BISECTION_ITER = 80


class CheegerMethod(str, Enum):
    BISECTION = "bisection"
    CLOSED_FORM = "closed_form"


@dataclass(frozen=True)
class CheegerResult:
    h: float
    t_star: float
    method: CheegerMethod


def cheeger_bisection(P: ConvexPolygon, tol: float = 1e-10) -> CheegerResult:
    if not (0.0 < tol <= 1e-3):
        raise ValueError("tol must lie in (0, 1e-3]")
    disk = incircle(P)

    def gap(t: float) -> float:
        return inner_parallel_area(P, t, disk) - math.pi * t * t

    lo, hi = 0.0, disk.radius
    if not (gap(lo) > 0.0 and gap(hi) < 0.0):
        raise NumericalFailure("bracket (0, inradius) does not change sign")
    for _ in range(MAX_BISECTION_ITER):
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    t = 0.5 * (lo + hi)
    return CheegerResult(1.0 / t, t, CheegerMethod.BISECTION)


def cheeger_three_cap(r: float) -> CheegerResult:
    """Closed form for three-cap sets, whose inner parallel bodies are homothetic copies."""
    f, _ = cap_area_f(r)
    h = 1.0 / r + math.sqrt(math.pi / f)
    return CheegerResult(h, 1.0 / h, CheegerMethod.CLOSED_FORM)
