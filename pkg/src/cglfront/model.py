"""Equation family u_t = A u_xx + f(u) with f(u) = g(|u|^2) u.

The complex scalar equation U_t = alpha U_xx + G(|U|^2) U is represented as a
real 2-component system.  A complex number a + ib acts on R^2 through the
matrix [[a, -b], [b, a]]; the nonlinearity G is an odd-power complex
polynomial G(y) = sum_k beta_{2k+1} y^k in y = |U|^2, so all derivatives up to
third order are exact.

The module also locates the nonzero rest state (y_inf with g1(y_inf) = 0 on
the branch g1'(y_inf) < 0, frequency omega = -g2(y_inf)) and evaluates the
structural assumptions on (alpha, g) that the rest of the package relies on,
in particular the spectral condition

    alpha_2 g2'(y_inf) + alpha_1 g1'(y_inf) < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionError

# rotation generator: R_theta = exp(theta * S1)
S1 = np.array([[0.0, -1.0], [1.0, 0.0]])
I2 = np.eye(2)


def rot(theta: float) -> np.ndarray:
    """Rotation matrix R_theta acting on R^2."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def s_omega(omega: float) -> np.ndarray:
    """Frame rotation matrix S_omega = omega * S1."""
    return omega * S1


@dataclass(frozen=True)
class Complex2:
    """A complex scalar stored as (re, im), with its 2x2 real representation."""

    re: float
    im: float

    @property
    def z(self) -> complex:
        return complex(self.re, self.im)

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.re, -self.im], [self.im, self.re]])

    @classmethod
    def from_complex(cls, z: complex) -> "Complex2":
        return cls(float(np.real(z)), float(np.imag(z)))


@dataclass(frozen=True)
class CglParams:
    """Diffusion coefficient alpha and polynomial nonlinearity coefficients.

    poly lists [beta1, beta3, beta5, ...] so that G(y) = sum_k poly[k] * y^k.
    Construction only checks structural sanity (finite values, nonempty
    polynomial); the analytic assumptions are reported by check_assumptions,
    which must be able to describe violating parameter sets.
    """

    alpha: Complex2
    poly: tuple[Complex2, ...]

    def __post_init__(self):
        if len(self.poly) == 0:
            raise ValueError("polynomial nonlinearity needs at least beta1")
        vals = [self.alpha.re, self.alpha.im]
        for b in self.poly:
            vals += [b.re, b.im]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("non-finite parameter value")

    @property
    def A(self) -> np.ndarray:
        return self.alpha.as_matrix()

    @property
    def degree(self) -> int:
        return len(self.poly) - 1

    def beta_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Coefficients as (re, im) arrays, ascending powers of y."""
        re = np.array([b.re for b in self.poly])
        im = np.array([b.im for b in self.poly])
        return re, im

    @classmethod
    def from_complex(cls, alpha: complex, betas) -> "CglParams":
        return cls(Complex2.from_complex(alpha),
                   tuple(Complex2.from_complex(b) for b in betas))


# the two parameter sets used throughout as running examples: the quintic
# equation with a real diffusion coefficient (stability example) and the one
# with alpha = 1 + i/2 (front simulation example, violates the spectral
# condition)
def params_quintic_real() -> CglParams:
    return CglParams.from_complex(1.0, [-0.125, 1 + 1j, -1 + 1j])


def params_quintic_complex() -> CglParams:
    return CglParams.from_complex(1 + 0.5j, [-0.1, 1 + 1j, -1 + 1j])


@dataclass(frozen=True)
class RestState:
    """Nonzero far-field rest state: y_inf = |v_inf|^2, v_inf = (sqrt(y_inf), 0)."""

    y_inf: float
    omega: float
    v_inf: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.v_inf is None:
            object.__setattr__(self, "v_inf", np.array([math.sqrt(self.y_inf), 0.0]))

    @property
    def r_inf(self) -> float:
        return math.sqrt(self.y_inf)


@dataclass(frozen=True)
class Frame:
    """Co-moving/co-rotating frame data (speed c, frequency omega, rest vector)."""

    c: float
    omega: float
    v_inf: np.ndarray = field(repr=False, default=None)

    @classmethod
    def lab(cls) -> "Frame":
        return cls(0.0, 0.0, None)

    @property
    def y_inf(self) -> float:
        return float(self.v_inf @ self.v_inf)


@dataclass(frozen=True)
class AssumptionReport:
    a1_ok: bool
    a2_ok: bool
    a4_ok: bool
    a4_value: float
    notes: str = ""

    @property
    def all_ok(self) -> bool:
        return self.a1_ok and self.a2_ok and self.a4_ok


def g_eval(params: CglParams, y: float, order: int = 0) -> Complex2:
    """k-th derivative of G at y, as a Complex2 (g1^(k), g2^(k)).

    Horner evaluation of the exact polynomial derivative; order > 3 is
    rejected because only C^3 smoothness is part of the model contract.
    """
    if order < 0 or order > 3:
        raise ValueError(f"unsupported derivative order {order} (need 0..3)")
    if y < 0:
        raise ValueError("y = |u|^2 must be nonnegative")
    acc = 0j
    # d^k/dy^k sum_m b_m y^m = sum_{m>=k} b_m m!/(m-k)! y^(m-k), by Horner
    for m in range(params.degree, order - 1, -1):
        fac = 1.0
        for j in range(m, m - order, -1):
            fac *= j
        acc = acc * y + fac * params.poly[m].z
    return Complex2.from_complex(acc)


def g_matrix(params: CglParams, y: float, order: int = 0) -> np.ndarray:
    """2x2 real representation of the k-th derivative of G at y."""
    return g_eval(params, y, order).as_matrix()


def f_eval(params: CglParams, u: np.ndarray) -> np.ndarray:
    """Nonlinearity f(u) = g(|u|^2) u."""
    u = np.asarray(u, dtype=float)
    y = float(u @ u)
    return g_matrix(params, y) @ u


def df_jac(params: CglParams, u: np.ndarray) -> np.ndarray:
    """Jacobian Df(u) = g(|u|^2) + 2 g'(|u|^2) [[u1^2, u1 u2], [u1 u2, u2^2]]."""
    u = np.asarray(u, dtype=float)
    y = float(u @ u)
    outer = np.outer(u, u)
    return g_matrix(params, y) + 2.0 * g_matrix(params, y, 1) @ outer


def _g1_real_roots(params: CglParams) -> list[float]:
    """Positive roots of g1(y) = Re G(y)."""
    re, _ = params.beta_arrays()
    coeffs = re[::-1]  # descending for np.roots
    if params.degree == 0:
        return []
    roots = np.roots(coeffs)
    out = []
    for r in roots:
        if abs(r.imag) < 1e-10 and r.real > 0:
            out.append(float(r.real))
    # Newton polish against round-off in np.roots
    polished = []
    for y in sorted(out):
        for _ in range(3):
            g1 = g_eval(params, y, 0).re
            d1 = g_eval(params, y, 1).re
            if d1 != 0.0:
                y = y - g1 / d1
        if y > 0:
            polished.append(y)
    return polished


def rest_state(params: CglParams) -> RestState:
    """Select the rest state: root of g1 with g1' < 0, omega = -g2 there.

    Raises AssumptionError when no positive root with g1' < 0 exists, or when
    several admissible roots exist (all are reported; no silent choice).
    """
    roots = _g1_real_roots(params)
    admissible = [y for y in roots if g_eval(params, y, 1).re < 0]
    if not admissible:
        raise AssumptionError(
            f"no admissible rest state: positive roots of g1 are {roots} "
            "but none has g1' < 0")
    if len(admissible) > 1:
        raise AssumptionError(
            f"ambiguous rest state: admissible roots {admissible}; "
            "select one explicitly")
    y_inf = admissible[0]
    omega = -g_eval(params, y_inf, 0).im
    return RestState(y_inf=y_inf, omega=omega)


def check_assumptions(params: CglParams, rest: RestState) -> AssumptionReport:
    """Report on the structural assumptions for (params, rest).

    a4_value is alpha_2 g2'(y_inf) + alpha_1 g1'(y_inf); the essential
    spectrum has negative quadratic contact with the imaginary axis iff it is
    negative.
    """
    notes = []
    a1_ok = params.alpha.re > 0 and g_eval(params, 0.0, 0).re < 0
    if not a1_ok:
        notes.append("A1 fails: need alpha_1 > 0 and g1(0) < 0")
    gp = g_eval(params, rest.y_inf, 1)
    a2_ok = (abs(g_eval(params, rest.y_inf, 0).re) < 1e-10
             and rest.y_inf > 0 and gp.re < 0)
    if not a2_ok:
        notes.append("A2 fails: rest state inconsistent or g1'(y_inf) >= 0")
    a4_value = params.alpha.im * gp.im + params.alpha.re * gp.re
    a4_ok = a4_value < 0
    if not a4_ok:
        notes.append(f"spectral condition fails: a4_value = {a4_value:.7g} >= 0")
    return AssumptionReport(a1_ok=a1_ok, a2_ok=a2_ok, a4_ok=a4_ok,
                            a4_value=float(a4_value), notes="; ".join(notes))


def rho_pair(params: CglParams, y_inf: float) -> tuple[float, float]:
    """(rho_1, rho_2) = (g1'(y_inf) y_inf, g2'(y_inf) y_inf)."""
    gp = g_eval(params, y_inf, 1)
    return gp.re * y_inf, gp.im * y_inf


def e_omega(params: CglParams, rest: RestState) -> np.ndarray:
    """E_omega = S_omega + Df(v_inf) = 2 [[rho1, 0], [rho2, 0]]."""
    r1, r2 = rho_pair(params, rest.y_inf)
    return 2.0 * np.array([[r1, 0.0], [r2, 0.0]])
