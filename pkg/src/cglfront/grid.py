"""Uniform 1D grids."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("need at least 3 nodes")
        if not self.x_max > self.x_min:
            raise ValueError("need x_max > x_min")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @cached_property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n)

    def refine(self, factor: int = 2) -> "Grid1D":
        """Grid with the same span and (n-1)*factor + 1 nodes."""
        return Grid1D(self.x_min, self.x_max, (self.n - 1) * factor + 1)

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w


def deriv1(v: np.ndarray, h: float) -> np.ndarray:
    """Central first derivative, one-sided second order at the ends.

    Differentiates along axis 0 of v.
    """
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
    out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    return out
