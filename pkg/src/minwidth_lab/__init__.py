"""Numerical laboratory for shape optimization under a minimal width constraint."""

__version__ = "0.1.0"
