"""Sampled-inequality tables shared by the comparison experiments."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class ComparisonTable:
    """Rows (parameter, lhs, rhs, difference) sorted by parameter.

    ``error`` is an a posteriori discretization bound per row (twice the
    change of the difference between mesh sizes h and h/2); ``points`` holds
    optional sample coordinates aligned with the rows.
    """

    parameter: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    error: np.ndarray
    metadata: dict = field(default_factory=dict)
    points: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.parameter, dtype=float)
        order = np.argsort(p, kind="stable")
        cols = {}
        for name in ("parameter", "lhs", "rhs", "error"):
            col = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), p.shape)[order]
            col = np.array(col)
            col.setflags(write=False)
            cols[name] = col
        for name, col in cols.items():
            object.__setattr__(self, name, col)
        if self.points is not None:
            pts = np.array(np.asarray(self.points, dtype=float)[order])
            pts.setflags(write=False)
            object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.parameter)

    @property
    def difference(self) -> np.ndarray:
        return self.lhs - self.rhs

    def rows(self):
        for p, a, b, e in zip(self.parameter, self.lhs, self.rhs, self.error):
            yield p, a, b, a - b, e

    def positive_beyond_error(self, mask=None) -> bool:
        d, e = self.difference, self.error
        if mask is not None:
            d, e = d[mask], e[mask]
        return bool(np.all(d > e))

    def nonnegative_within_error(self) -> bool:
        return bool(np.all(self.difference >= -self.error))

    def zero_within_error(self) -> bool:
        return bool(np.all(np.abs(self.difference) <= self.error))
