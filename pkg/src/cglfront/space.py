"""Exponentially weighted spaces and the extended phase space.

The weight is eta(x) = exp(mu sqrt(x^2+1)) and the template function
vhat(x) = (tanh(muhat x) + 1)/2 interpolates between the two far fields.  An
extended state is a pair (v, rho) with v a 2-component grid function and
rho in R^2 the far-field variable; the pair belongs to the weighted space
when the shifted part v - rho*vhat is weighted-square-integrable.

Inner product (trapezoidal quadrature):

    ((u, rho), (v, zeta)) = rho.zeta + int eta^2 (u - rho*vhat).(v - zeta*vhat)

and the first-order norm adds int eta^2 |v_x|^2 with v_x by central
differences of the v part itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid1D, deriv1


def eta(x, mu: float):
    return np.exp(mu * np.sqrt(np.asarray(x) ** 2 + 1.0))


def vhat(x, mu_hat: float):
    return 0.5 * np.tanh(mu_hat * np.asarray(x)) + 0.5


def vhat_x(x, mu_hat: float):
    t = np.cosh(mu_hat * np.asarray(x))
    return 0.5 * mu_hat / t**2


def vhat_xx(x, mu_hat: float):
    xa = np.asarray(x)
    return -mu_hat**2 * np.tanh(mu_hat * xa) / np.cosh(mu_hat * xa) ** 2


@dataclass(frozen=True)
class WeightSpec:
    """Weight exponent mu and template rate mu_hat.

    For mu > 0 the template must decay strictly faster than the weight grows,
    mu < 2*mu_hat.  The profile-dependent part of the constraint
    (2*mu_hat <= mu_star) is checked where a profile is available.
    """

    mu: float
    mu_hat: float

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if self.mu_hat <= 0:
            raise ValueError("mu_hat must be > 0")
        if self.mu > 0 and not self.mu < 2 * self.mu_hat:
            raise ValueError(f"need mu < 2*mu_hat, got mu={self.mu}, mu_hat={self.mu_hat}")


@dataclass
class ExtendedState:
    """Pair (v, rho): grid samples of the field and the far-field vector."""

    v: np.ndarray   # (n, 2)
    rho: np.ndarray  # (2,)

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        if self.v.ndim != 2 or self.v.shape[1] != 2 or self.rho.shape != (2,):
            raise ValueError("v must be (n, 2), rho must be (2,)")

    @property
    def n(self) -> int:
        return self.v.shape[0]

    def copy(self) -> "ExtendedState":
        return ExtendedState(self.v.copy(), self.rho.copy())

    def __add__(self, other):
        return ExtendedState(self.v + other.v, self.rho + other.rho)

    def __sub__(self, other):
        return ExtendedState(self.v - other.v, self.rho - other.rho)

    def __mul__(self, a: float):
        return ExtendedState(a * self.v, a * self.rho)

    __rmul__ = __mul__

    @classmethod
    def zero(cls, n: int) -> "ExtendedState":
        return cls(np.zeros((n, 2)), np.zeros(2))


def shifted_part(state: ExtendedState, weight: WeightSpec, grid: Grid1D) -> np.ndarray:
    """u = v - rho*vhat, the weighted-integrable representative."""
    return state.v - np.outer(vhat(grid.x, weight.mu_hat), state.rho)


def from_shifted(u: np.ndarray, rho: np.ndarray, weight: WeightSpec, grid: Grid1D) -> ExtendedState:
    return ExtendedState(u + np.outer(vhat(grid.x, weight.mu_hat), rho), np.asarray(rho, float))


def pack(u: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Flatten shifted coordinates (u, rho) into a single vector of length 2n+2."""
    return np.concatenate([np.asarray(u).ravel(), np.asarray(rho)])


def unpack(x: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    return x[: 2 * n].reshape(n, 2), x[2 * n:]


def state_to_packed(state: ExtendedState, weight: WeightSpec, grid: Grid1D) -> np.ndarray:
    return pack(shifted_part(state, weight, grid), state.rho)


def packed_to_state(x: np.ndarray, weight: WeightSpec, grid: Grid1D) -> ExtendedState:
    u, rho = unpack(x, grid.n)
    return from_shifted(u, rho, weight, grid)


def quad_weights(weight: WeightSpec, grid: Grid1D) -> np.ndarray:
    """Trapezoidal weights times eta^2 at the nodes."""
    return grid.trapezoid_weights * eta(grid.x, weight.mu) ** 2


def gram_diagonal(weight: WeightSpec, grid: Grid1D) -> np.ndarray:
    """Diagonal of the Gram matrix in packed shifted coordinates."""
    qw = np.repeat(quad_weights(weight, grid), 2)
    return np.concatenate([qw, np.ones(2)])


def weighted_inner(weight: WeightSpec, grid: Grid1D, a: ExtendedState,
                   b: ExtendedState, order: int = 0) -> float:
    """X_eta inner product of two extended states; order=1 adds (a_x, b_x).

    The derivative term differentiates the v parts themselves (the template
    contribution survives), matching the first-order norm of the space.
    """
    if a.n != grid.n or b.n != grid.n:
        raise ValueError("state/grid size mismatch")
    qw = quad_weights(weight, grid)
    ua = shifted_part(a, weight, grid)
    ub = shifted_part(b, weight, grid)
    val = float(a.rho @ b.rho) + float(np.sum(qw * np.sum(ua * ub, axis=1)))
    if order == 1:
        da = deriv1(a.v, grid.h)
        db = deriv1(b.v, grid.h)
        val += float(np.sum(qw * np.sum(da * db, axis=1)))
    elif order != 0:
        raise ValueError("order must be 0 or 1")
    return val


def norm(weight: WeightSpec, grid: Grid1D, a: ExtendedState, order: int = 0) -> float:
    return math.sqrt(max(weighted_inner(weight, grid, a, a, order), 0.0))
