"""Front profiles: connecting-orbit BVP solve and decay-rate analysis.

The profile v(x) and speed c satisfy the stationary co-moving system

    0 = A v_xx + c v_x + S_omega v + f(v),    v(-inf) = 0, v(+inf) = v_inf.

As x -> -inf the orbit lies in the 2D unstable manifold of the origin of the
first-order system w' = H(w); as x -> +inf it lies (in polar variables
(r, q, kappa) = (|v|, phase', r'/r)) in the 2D stable manifold of the
equilibrium (r_inf, 0, 0).  The discrete problem uses second-order central
differences, projection boundary conditions built from the endpoint
linearizations, and two phase conditions pinning translation and rotation;
Newton iterates on (v at nodes, c) with a sparse Jacobian.

Decay rates: rate_minus is the slowest unstable rate at -inf, rate_plus the
slowest stable rate of the polar equilibrium; mu_star = min of the two
bounds the exponential approach of the profile and its derivatives.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline

from .errors import NewtonError, NonHyperbolicError, NumericalError
from .evolve import TimeSeries, estimate_rates
from .grid import Grid1D, deriv1
from .kernels import f_field
from .model import (CglParams, Frame, I2, RestState, df_jac, g_eval, rot,
                    s_omega)

TOL_HYP = 1e-8


@dataclass(frozen=True)
class PolarState:
    r: float
    q: float       # local wavenumber phi'
    kappa: float   # logarithmic derivative r'/r


@dataclass(frozen=True)
class EndpointData:
    """Linearization at one asymptotic end: matrix, spectrum, and rate."""

    matrix: np.ndarray
    eigenvalues: np.ndarray
    stable_dim: int
    unstable_dim: int
    rate: float


@dataclass
class Profile:
    grid: Grid1D
    v: np.ndarray          # (n, 2)
    dv: np.ndarray         # (n, 2)
    frame: Frame
    mu_star: float
    newton_iters: int = 0
    residual: float = 0.0

    @property
    def rest_vector(self) -> np.ndarray:
        return self.frame.v_inf


def _classify(eigenvalues: np.ndarray, tol: float = TOL_HYP):
    re = eigenvalues.real
    if np.any(np.abs(re) < tol):
        raise NonHyperbolicError(
            f"eigenvalue with |Re| < {tol:g}: {eigenvalues[np.abs(re) < tol]}")
    return int(np.sum(re < 0)), int(np.sum(re > 0))


def minus_linearization(params: CglParams, frame: Frame) -> EndpointData:
    """DH(0) for the first-order system at the zero rest state.

    Eigenvalues come in two pairs solving alpha l^2 + c l + (i omega + G(0))
    and the conjugate-coefficient quadratic.  rate is the smallest positive
    real part among the unstable eigenvalues (the decay rate of the profile
    as x -> -inf).
    """
    A = params.A
    Ainv = np.linalg.inv(A)
    g0 = g_eval(params, 0.0).as_matrix()
    DH = np.zeros((4, 4))
    DH[:2, 2:] = I2
    DH[2:, :2] = -Ainv @ (s_omega(frame.omega) + g0)
    DH[2:, 2:] = -frame.c * Ainv
    ev = np.linalg.eigvals(DH)
    sdim, udim = _classify(ev)
    rate = float(np.min(ev.real[ev.real > 0]))
    return EndpointData(DH, ev, sdim, udim, rate)


def polar_rhs(params: CglParams, frame: Frame, s: PolarState) -> tuple[float, float, float]:
    """Right-hand side (r', q', kappa') of the polar reduction.

    Derived from v = r (cos phi, sin phi) with q = phi', kappa = r'/r:
        r'             = r kappa
        kappa' + i q'  = -(kappa + i q)^2 - alpha^{-1} (c (kappa+iq) + i omega + G(r^2))
    """
    if s.r <= 0:
        raise ValueError("polar state needs r > 0")
    Ainv = np.linalg.inv(params.A)
    y = s.r * s.r
    g = g_eval(params, y)
    lin = Ainv @ np.array([frame.c * s.kappa + g.re,
                           frame.c * s.q + frame.omega + g.im])
    dr = s.r * s.kappa
    dkappa = s.q**2 - s.kappa**2 - lin[0]
    dq = -2.0 * s.kappa * s.q - lin[1]
    return dr, dq, dkappa


def polar_jacobian(params: CglParams, frame: Frame, s: PolarState) -> np.ndarray:
    """Analytic Jacobian of polar_rhs in (r, q, kappa) ordering."""
    Ainv = np.linalg.inv(params.A)
    y = s.r * s.r
    gp = g_eval(params, y, 1)
    dg = 2.0 * s.r * Ainv @ np.array([gp.re, gp.im])
    J = np.zeros((3, 3))
    # row r' = r*kappa
    J[0] = [s.kappa, 0.0, s.r]
    # row q' = -2 kappa q - [Ainv(...)].2
    J[1] = [-dg[1], -2.0 * s.kappa - frame.c * Ainv[1, 1],
            -2.0 * s.q - frame.c * Ainv[1, 0]]
    # row kappa' = q^2 - kappa^2 - [Ainv(...)].1
    J[2] = [-dg[0], 2.0 * s.q - frame.c * Ainv[0, 1],
            -2.0 * s.kappa - frame.c * Ainv[0, 0]]
    return J


def plus_linearization(params: CglParams, frame: Frame) -> EndpointData:
    """Jacobian of the polar system at (r_inf, 0, 0) and its spectrum.

    rate is the smallest |Re| over the stable eigenvalues (the decay rate of
    the profile as x -> +inf).
    """
    r_inf = float(np.hypot(*frame.v_inf))
    J = polar_jacobian(params, frame, PolarState(r_inf, 0.0, 0.0))
    ev = np.linalg.eigvals(J)
    sdim, udim = _classify(ev)
    rate = float(np.min(-ev.real[ev.real < 0]))
    return EndpointData(J, ev, sdim, udim, rate)


def decay_rate(minus_data, plus_data) -> float:
    """mu_star = min(rate_minus, rate_plus)."""
    rm = getattr(minus_data, "rate", minus_data)
    rp = getattr(plus_data, "rate", plus_data)
    return float(min(rm, rp))


def suggest_halfwidth(mu_star_estimate: float) -> float:
    """Truncation half-length: 40 decay lengths, at least 50."""
    return max(40.0 / mu_star_estimate, 50.0)


# ---------------------------------------------------------------------------
# boundary projections and phase conditions
# ---------------------------------------------------------------------------

def _stable_left_rows(M: np.ndarray) -> np.ndarray:
    """Real rows annihilating the unstable subspace of M (4x4)."""
    w, vl = scipy.linalg.eig(M, left=True, right=False)
    rows = []
    used = set()
    for k in np.argsort(w.real):
        if w[k].real < -TOL_HYP and k not in used:
            l = vl[:, k].conj()
            if abs(w[k].imag) > TOL_HYP:
                rows.append(l.real)
                rows.append(l.imag)
                # mark the conjugate partner as consumed
                for j in range(len(w)):
                    if j != k and abs(w[j] - w[k].conjugate()) < 1e-10:
                        used.add(j)
            else:
                rows.append(l.real)
            used.add(k)
        if len(rows) >= 2:
            break
    if len(rows) != 2:
        raise NonHyperbolicError("expected a 2D stable subspace at x -> -inf")
    return np.array(rows[:2])


def _unstable_left_row(J: np.ndarray) -> np.ndarray:
    """Real row annihilating the stable subspace of the polar Jacobian."""
    w, vl = scipy.linalg.eig(J, left=True, right=False)
    k = int(np.argmax(w.real))
    if w[k].real < TOL_HYP or abs(w[k].imag) > 1e-8:
        raise NonHyperbolicError("expected a simple real unstable eigenvalue "
                                 "of the polar equilibrium")
    return vl[:, k].real


def _polar_at_right(v: np.ndarray, h: float) -> np.ndarray:
    """(r - .., q, kappa) data at the last node from one-sided differences."""
    V = v[-1, 0] + 1j * v[-1, 1]
    Vm1 = v[-2, 0] + 1j * v[-2, 1]
    Vm2 = v[-3, 0] + 1j * v[-3, 1]
    dV = (3.0 * V - 4.0 * Vm1 + Vm2) / (2.0 * h)
    w = dV / V
    return np.array([abs(V), w.imag, w.real])  # (r, q, kappa)


def _interp_weights_at(x: np.ndarray, x0: float) -> tuple[int, np.ndarray]:
    """Cubic Lagrange weights for evaluation at x0 on a uniform grid."""
    j = int(np.searchsorted(x, x0)) - 1
    j = min(max(j, 1), len(x) - 3)
    idx = np.arange(j - 1, j + 3)
    xs = x[idx]
    wts = np.ones(4)
    for k in range(4):
        for m in range(4):
            if m != k:
                wts[k] *= (x0 - xs[m]) / (xs[k] - xs[m])
    return j - 1, wts


def sigmoid_guess(rest: RestState, grid: Grid1D, rate: float = 0.3,
                  center: float = 0.0) -> np.ndarray:
    """Plain front-shaped initial guess pinned at |v| = r_inf/2 at `center`."""
    prof = 0.5 * (np.tanh(rate * (grid.x - center)) + 1.0)
    return np.outer(prof, rest.v_inf)


# ---------------------------------------------------------------------------
# Newton solve
# ---------------------------------------------------------------------------

def solve_profile(params: CglParams, rest: RestState, grid: Grid1D,
                  c0: float, v0: np.ndarray | None = None,
                  tol: float = 1e-10, max_iter: int = 40) -> Profile:
    """Solve the truncated connecting-orbit BVP for (v, c).

    Boundary conditions: the stable components of (v, v') vanish at x_min
    (left tail inside the unstable manifold of 0), the unstable polar
    component vanishes at x_max, the first component of v is r_inf/2 at x=0
    (translation pin) and the second component vanishes at x_max (rotation
    pin, enforcing v_inf = (r_inf, 0)).

    Raises NewtonError with the last residual on divergence; warns when the
    boundary projections indicate a too-short truncation.
    """
    n = grid.n
    h = grid.h
    omega = rest.omega
    r_inf = rest.r_inf
    Sw = s_omega(omega)
    A = params.A
    if v0 is None:
        v0 = sigmoid_guess(rest, grid)
    v = np.array(v0, dtype=float, copy=True)
    c = float(c0)
    j0, wts0 = _interp_weights_at(grid.x, 0.0)

    def endpoint_rows(c_val):
        frame = Frame(c_val, omega, rest.v_inf)
        ls = _stable_left_rows(minus_linearization(params, frame).matrix)
        lu = _unstable_left_row(plus_linearization(params, frame).matrix)
        return ls, lu

    def residual(v, c, ls, lu):
        F = np.empty(2 * n + 1)
        w_left = np.concatenate([v[0], (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)])
        F[0:2] = ls @ w_left
        vxx = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
        vx = (v[2:] - v[:-2]) / (2 * h)
        fv = f_field(v[1:-1], *params.beta_arrays())
        Fint = vxx @ A.T + c * vx + v[1:-1] @ Sw.T + fv
        F[2:2 * n - 2] = Fint.ravel()
        pol = _polar_at_right(v, h)
        F[2 * n - 2] = lu @ (pol - np.array([r_inf, 0.0, 0.0]))
        F[2 * n - 1] = v[-1, 1]
        F[2 * n] = wts0 @ v[j0:j0 + 4, 0] - r_inf / 2.0
        return F

    def jacobian(v, c, ls, lu):
        rows, cols, vals = [], [], []

        def add_block(r0, c0_, B):
            for a in range(B.shape[0]):
                for b in range(B.shape[1]):
                    if B[a, b] != 0.0:
                        rows.append(r0 + a)
                        cols.append(c0_ + b)
                        vals.append(B[a, b])

        # left projection rows: linear in v0, v1, v2
        B0 = ls[:, 0:2] + ls[:, 2:4] * (-3 / (2 * h))
        add_block(0, 0, B0)
        add_block(0, 2, ls[:, 2:4] * (4 / (2 * h)))
        add_block(0, 4, ls[:, 2:4] * (-1 / (2 * h)))
        # interior rows
        lower = A / h**2 - c / (2 * h) * I2
        upper = A / h**2 + c / (2 * h) * I2
        for i in range(1, n - 1):
            r0 = 2 + 2 * (i - 1)
            add_block(r0, 2 * (i - 1), lower)
            add_block(r0, 2 * i, -2 * A / h**2 + Sw + df_jac(params, v[i]))
            add_block(r0, 2 * (i + 1), upper)
        # d/dc of interior rows
        vx = (v[2:] - v[:-2]) / (2 * h)
        for i in range(1, n - 1):
            r0 = 2 + 2 * (i - 1)
            rows.extend([r0, r0 + 1])
            cols.extend([2 * n, 2 * n])
            vals.extend([vx[i - 1, 0], vx[i - 1, 1]])
        # right polar row: finite differences on the last three nodes
        base = lu @ (_polar_at_right(v, h) - np.array([r_inf, 0.0, 0.0]))
        eps = 1e-7
        for i in range(n - 3, n):
            for comp in range(2):
                vp = v.copy()
                vp[i, comp] += eps
                val = (lu @ (_polar_at_right(vp, h) - np.array([r_inf, 0, 0])) - base) / eps
                rows.append(2 * n - 2)
                cols.append(2 * i + comp)
                vals.append(val)
        # rotation pin
        rows.append(2 * n - 1)
        cols.append(2 * (n - 1) + 1)
        vals.append(1.0)
        # translation pin
        for k in range(4):
            rows.append(2 * n)
            cols.append(2 * (j0 + k))
            vals.append(wts0[k])
        return sp.csc_matrix((vals, (rows, cols)), shape=(2 * n + 1, 2 * n + 1))

    ls, lu = endpoint_rows(c)
    F = residual(v, c, ls, lu)
    res = float(np.max(np.abs(F)))
    iters = 0
    while res > tol:
        if iters >= max_iter:
            raise NewtonError(f"profile Newton did not converge "
                              f"(residual {res:.3e} after {iters} steps)", res)
        J = jacobian(v, c, ls, lu)
        try:
            delta = spla.splu(J).solve(-F)
        except RuntimeError as exc:
            raise NewtonError(f"singular Jacobian in profile Newton: {exc}", res)
        # backtracking on the residual max-norm
        step = 1.0
        for _ in range(12):
            v_try = v + step * delta[:-1].reshape(n, 2)
            c_try = c + step * delta[-1]
            ls_t, lu_t = endpoint_rows(c_try)
            F_try = residual(v_try, c_try, ls_t, lu_t)
            res_try = float(np.max(np.abs(F_try)))
            if res_try < res or res_try < tol:
                break
            step *= 0.5
        else:
            raise NewtonError(f"profile Newton stalled at residual {res:.3e}", res)
        v, c, ls, lu, F, res = v_try, c_try, ls_t, lu_t, F_try, res_try
        iters += 1

    frame = Frame(c, omega, rest.v_inf)
    minus = minus_linearization(params, frame)
    plus = plus_linearization(params, frame)
    mu_star = decay_rate(minus, plus)
    # post-hoc truncation check: the full endpoint data must be small
    left_sz = float(np.max(np.abs(np.concatenate([v[0], deriv1(v, h)[0]]))))
    right_sz = float(np.max(np.abs(_polar_at_right(v, h) - [r_inf, 0, 0])))
    if left_sz > 1e-6 or right_sz > 1e-6:
        warnings.warn(f"truncation may be too short: boundary residuals "
                      f"left={left_sz:.2e}, right={right_sz:.2e}")
    if c <= 0:
        warnings.warn(f"converged speed c = {c:.6g} is not positive; "
                      "the front orientation assumption fails here")
    return Profile(grid=grid, v=v, dv=deriv1(v, h), frame=frame,
                   mu_star=mu_star, newton_iters=iters, residual=res)


# ---------------------------------------------------------------------------
# simulation-based oracle
# ---------------------------------------------------------------------------

def profile_from_simulation(series: TimeSeries, params: CglParams,
                            rest: RestState, fit_tol: float = 0.05):
    """Estimate (c, omega) from a lab-frame run and normalize a snapshot.

    The returned snapshot is shifted so |v| = r_inf/2 at x = 0 and rotated so
    the far field points along (1, 0); it serves as the Newton initial guess.
    """
    rates = estimate_rates(series, rest.r_inf / 2.0)
    if rates["front_fit_residual"] > fit_tol:
        raise NumericalError(
            f"front position is not a clean linear fit "
            f"(residual {rates['front_fit_residual']:.3f})")
    c_est = rates["c_est"]
    omega_est = rates["omega_est"]
    last = series.state(series.n_snaps - 1)
    theta = math.atan2(last.rho[1], last.rho[0])
    v_rot = last.v @ rot(-theta).T
    # translate so the |v| = r_inf/2 crossing sits at x = 0
    m = np.hypot(v_rot[:, 0], v_rot[:, 1]) - rest.r_inf / 2.0
    idx = np.nonzero(m[:-1] * m[1:] < 0)[0]
    if len(idx) == 0:
        raise NumericalError("no front in the final snapshot")
    i = idx[-1]
    x = series.grid.x
    xf = x[i] + m[i] / (m[i] - m[i + 1]) * (x[i + 1] - x[i])
    spline = CubicSpline(x, v_rot, axis=0)
    xq = np.clip(x + xf, x[0], x[-1])
    v_shift = spline(xq)
    v_shift[x + xf < x[0]] = v_rot[0]
    v_shift[x + xf > x[-1]] = v_rot[-1]
    from .space import ExtendedState
    snap = ExtendedState(v_shift, rot(-theta) @ last.rho)
    return c_est, omega_est, snap


# ---------------------------------------------------------------------------
# diagnostics and serialization
# ---------------------------------------------------------------------------

def tail_rates(profile: Profile, floor: float = 1e-9, cap: float = 1e-2):
    """Log-linear decay-rate fits of the two tails.

    Right: |v - v_inf| against x > 0; left: |v| against x < 0.  The fit
    windows keep the signal between `floor` (round-off guard) and `cap`
    (outside the core of the front).
    """
    x = profile.grid.x
    v = profile.v
    vinf = profile.frame.v_inf
    out = {}
    sig_r = np.hypot(v[:, 0] - vinf[0], v[:, 1] - vinf[1]) + np.abs(profile.dv).max(axis=1)
    mask = (x > 0) & (sig_r > floor) & (sig_r < cap)
    if mask.sum() < 10:
        raise NumericalError("right tail window too small for a rate fit")
    out["rate_right"] = float(-np.polyfit(x[mask], np.log(sig_r[mask]), 1)[0])
    sig_l = np.hypot(v[:, 0], v[:, 1])
    mask = (x < 0) & (sig_l > floor) & (sig_l < cap)
    if mask.sum() < 10:
        raise NumericalError("left tail window too small for a rate fit")
    out["rate_left"] = float(np.polyfit(x[mask], np.log(sig_l[mask]), 1)[0])
    return out


def save_profile(profile: Profile, csv_path, json_path):
    """Profile as CSV (x, v1, v2, dv1, dv2) plus a JSON frame sidecar."""
    data = np.column_stack([profile.grid.x, profile.v, profile.dv])
    header = "x,v1,v2,dv1,dv2"
    np.savetxt(csv_path, data, delimiter=",", header=header, comments="")
    side = {
        "c": profile.frame.c,
        "omega": profile.frame.omega,
        "v_inf_1": float(profile.frame.v_inf[0]),
        "v_inf_2": float(profile.frame.v_inf[1]),
        "mu_star": profile.mu_star,
        "newton_iters": profile.newton_iters,
        "residual": profile.residual,
    }
    with open(json_path, "w") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)


def load_profile(csv_path, json_path) -> Profile:
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    with open(json_path) as fh:
        side = json.load(fh)
    x = data[:, 0]
    grid = Grid1D(float(x[0]), float(x[-1]), len(x))
    frame = Frame(side["c"], side["omega"],
                  np.array([side["v_inf_1"], side["v_inf_2"]]))
    return Profile(grid=grid, v=data[:, 1:3], dv=data[:, 3:5], frame=frame,
                   mu_star=side["mu_star"],
                   newton_iters=side.get("newton_iters", 0),
                   residual=side.get("residual", 0.0))
