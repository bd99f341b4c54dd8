"""Coefficient fields evaluated cell by cell at quadrature points.

Assembly routines call ``field(cell, pts)`` with an (n, 2) array of points
inside that cell.  Wrappers below adapt constants, functions of (x, y), and
piecewise-constant cell data to this protocol.
"""

from __future__ import annotations

import numpy as np


class CellField:
    """Base class; subclasses implement __call__(cell, pts) -> (n,) array."""

    def __call__(self, cell, pts):
        raise NotImplementedError


class ConstField(CellField):
    def __init__(self, value):
        self.value = float(value)

    def __call__(self, cell, pts):
        return np.full(len(pts), self.value)


class FuncField(CellField):
    """Wraps a vectorized f(x, y)."""

    def __init__(self, func):
        self.func = func

    def __call__(self, cell, pts):
        return np.asarray(self.func(pts[:, 0], pts[:, 1]), dtype=float)


class CellwiseField(CellField):
    """Constant value per cell, zero where unspecified."""

    def __init__(self, values):
        self.values = dict(values)

    def __call__(self, cell, pts):
        return np.full(len(pts), self.values.get(cell, 0.0))


def as_field(f):
    """Coerce a constant, an f(x, y) callable, or a CellField to a CellField."""
    if isinstance(f, CellField):
        return f
    if callable(f):
        return FuncField(f)
    return ConstField(f)
