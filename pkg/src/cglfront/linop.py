"""Discretization of the extended linearized operator on weighted spaces.

In the shifted coordinates (u, rho) = (v - rho*vhat, rho) the extended
operator is block upper-triangular,

    [ L  K ] [u  ]      L u = A u_xx + c u_x + S_omega u + Df(v*) u
    [ 0  E ] [rho],     K   = vhat_xx A + c vhat_x I + vhat (Df(v*) - Df(v_inf))
                        E   = S_omega + Df(v_inf) = 2 [[rho1, 0], [rho2, 0]]

with a homogeneous Neumann closure on u at x_min and a Dirichlet closure
u(x_max) = 0 at the right.  The Dirichlet row is essential: with Neumann on
both ends the truncated v-block keeps a spurious rotation mode
(u, rho) = (S1 v*, 0) in its kernel -- it is excluded on the line only by
the unbounded weighted norm, which truncation cannot see -- and the
operator would show three near-zero eigenvalues instead of the two genuine
ones.  Both true kernel functions vanish at x_max to tail accuracy, so the
Dirichlet row costs nothing.  The weighted inner product is diagonal in
these coordinates, which makes adjoints, the rank-2 spectral projector, and
resolvent-norm estimates cheap.

The kernel of the continuum operator is spanned by phi1 = (v*', 0) and
phi2 = (S1 v*, S1 v_inf); the discrete analogues anchor the eigenspace
alignment.  Eigenvalues near zero are found by shift-invert Arnoldi on the
sparse matrix; the adjoint kernel comes from the transposed problem and is
biorthonormalized against (phi1, phi2).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline

from . import kernels, space
from .errors import NumericalError
from .grid import Grid1D
from .kernels import df_field
from .model import S1, CglParams, Frame, I2, df_jac, s_omega
from .profile import Profile
from .space import (ExtendedState, WeightSpec, from_shifted, gram_diagonal,
                    pack, packed_to_state, state_to_packed, vhat, vhat_x,
                    vhat_xx, weighted_inner)

__all__ = ["Discretization", "SpectralData", "assemble", "weighted_inner",
           "eig_near_zero", "adjoint_kernel", "project", "similarity_check",
           "resolvent_probe", "semigroup_decay", "classify_spectrum"]


@dataclass
class Discretization:
    grid: Grid1D
    weight: WeightSpec
    profile: Profile
    params: CglParams
    M_ext: sp.csc_matrix          # (2n+2) x (2n+2), shifted coordinates
    L_v: sp.csc_matrix            # v-block alone (2n x 2n)
    K_block: np.ndarray           # (n, 2, 2)
    E_omega: np.ndarray           # 2 x 2
    W: np.ndarray                 # Gram diagonal, length 2n+2
    bc: str = "neumann-shifted"

    @property
    def n(self) -> int:
        return self.grid.n

    def pack_state(self, state: ExtendedState) -> np.ndarray:
        return state_to_packed(state, self.weight, self.grid)

    def unpack_state(self, x: np.ndarray) -> ExtendedState:
        return packed_to_state(x, self.weight, self.grid)

    def apply(self, state: ExtendedState) -> ExtendedState:
        """The extended operator applied to a state, as a state."""
        y = self.M_ext @ self.pack_state(state)
        u, rho_dot = space.unpack(y, self.n)
        v_dot = u + np.outer(vhat(self.grid.x, self.weight.mu_hat), rho_dot)
        return ExtendedState(v_dot, rho_dot)

    def inner(self, a: ExtendedState, b: ExtendedState, order: int = 0) -> float:
        return weighted_inner(self.weight, self.grid, a, b, order)


def _resample_profile(profile: Profile, grid: Grid1D) -> Profile:
    if (profile.grid.n == grid.n and profile.grid.x_min == grid.x_min
            and profile.grid.x_max == grid.x_max):
        return profile
    if grid.x_min < profile.grid.x_min - 1e-12 or grid.x_max > profile.grid.x_max + 1e-12:
        raise ValueError("target grid must lie within the profile's span")
    sv = CubicSpline(profile.grid.x, profile.v, axis=0)
    sdv = CubicSpline(profile.grid.x, profile.dv, axis=0)
    return Profile(grid=grid, v=sv(grid.x), dv=sdv(grid.x), frame=profile.frame,
                   mu_star=profile.mu_star, newton_iters=profile.newton_iters,
                   residual=profile.residual)


def _bc_scale(params: CglParams, grid: Grid1D) -> float:
    """Magnitude used for Dirichlet BC rows; keeps them deep in the left plane."""
    return 4 * (abs(params.alpha.re) + abs(params.alpha.im)) / grid.h**2 + 10.0


def _v_block(params: CglParams, frame: Frame, grid: Grid1D,
             df_nodes: np.ndarray) -> sp.csc_matrix:
    """Banded matrix of A d_xx + c d_x + S_omega + Df(v*(x)).

    Left end: Neumann ghost.  Right end: Dirichlet row -s_bc * u_{n-1}
    (decay-enforcing closure; see the module docstring).
    """
    n, h = grid.n, grid.h
    A = params.A
    Sw = s_omega(frame.omega)
    lower = A / h**2 - frame.c / (2 * h) * I2
    upper = A / h**2 + frame.c / (2 * h) * I2
    sbc = _bc_scale(params, grid)
    rows, cols, vals = [], [], []

    def add(i, j, B):
        for a in range(2):
            for b in range(2):
                if B[a, b] != 0.0:
                    rows.append(2 * i + a)
                    cols.append(2 * j + b)
                    vals.append(B[a, b])

    for i in range(n):
        if i == 0:
            add(i, i, -2 * A / h**2 + Sw + df_nodes[i])
            add(i, 1, 2 * A / h**2)
        elif i == n - 1:
            add(i, i, -sbc * I2)
        else:
            add(i, i - 1, lower)
            add(i, i, -2 * A / h**2 + Sw + df_nodes[i])
            add(i, i + 1, upper)
    return sp.csc_matrix((vals, (rows, cols)), shape=(2 * n, 2 * n))


def assemble(params: CglParams, profile: Profile, weight: WeightSpec,
             grid: Grid1D | None = None) -> Discretization:
    """Assemble the extended operator in shifted coordinates on `grid`.

    The template-rate constraint 2*mu_hat <= mu_star is enforced here, where
    the profile's decay rate is known.
    """
    if grid is None:
        grid = profile.grid
    if 2 * weight.mu_hat > profile.mu_star + 1e-12:
        raise ValueError(
            f"template rate too large: need 2*mu_hat <= mu_star = "
            f"{profile.mu_star:.6g}, got mu_hat = {weight.mu_hat}")
    prof = _resample_profile(profile, grid)
    frame = prof.frame
    df_nodes = np.array([df_jac(params, prof.v[i]) for i in range(grid.n)])
    L_v = _v_block(params, frame, grid, df_nodes)
    df_inf = df_jac(params, frame.v_inf)
    E = s_omega(frame.omega) + df_inf
    x = grid.x
    vh = vhat(x, weight.mu_hat)
    vhx = vhat_x(x, weight.mu_hat)
    vhxx = vhat_xx(x, weight.mu_hat)
    K = (vhxx[:, None, None] * params.A
         + frame.c * vhx[:, None, None] * I2
         + vh[:, None, None] * (df_nodes - df_inf))
    K[-1] = 0.0   # the Dirichlet row must not couple to rho
    n = grid.n
    Kcol = sp.csc_matrix(K.reshape(2 * n, 2))
    M = sp.bmat([[L_v, Kcol], [None, sp.csc_matrix(E)]], format="csc")
    W = gram_diagonal(weight, grid)
    return Discretization(grid=grid, weight=weight, profile=prof, params=params,
                          M_ext=M, L_v=L_v, K_block=K, E_omega=E, W=W)


def analytic_kernel(disc: Discretization) -> tuple[ExtendedState, ExtendedState]:
    """phi1 = (v*', 0) and phi2 = (S1 v*, S1 v_inf) on the grid."""
    prof = disc.profile
    phi1 = ExtendedState(prof.dv.copy(), np.zeros(2))
    phi2 = ExtendedState(prof.v @ S1.T, S1 @ prof.frame.v_inf)
    return phi1, phi2


@dataclass
class SpectralData:
    eigenvalues: np.ndarray
    phi1: ExtendedState
    phi2: ExtendedState
    psi1: ExtendedState
    psi2: ExtendedState
    gap: float
    kernel_eigenvalues: np.ndarray
    kernel_angle: float
    disc: Discretization = field(repr=False, default=None)
    _phi_packed: np.ndarray = field(repr=False, default=None)  # (2n+2, 2)
    _psi_packed: np.ndarray = field(repr=False, default=None)


def _arpack(M, k, sigma, v0):
    """Shift-invert Arnoldi around sigma; perturbs the shift on a singular LU.

    The extended matrix carries an exact zero eigenvalue (the far-field
    block is singular), so real shifts near 0 are dangerous; callers pass a
    small imaginary sigma.  The matrix is promoted to complex so ARPACK uses
    the plain complex shift-invert mode.
    """
    Mc = M.astype(complex)
    try:
        return spla.eigs(Mc, k=k, sigma=sigma, v0=v0, maxiter=500, tol=1e-12)
    except RuntimeError:
        return spla.eigs(Mc, k=k, sigma=sigma + 1e-6 + 1e-6j, v0=v0,
                         maxiter=500, tol=1e-12)


def _arpack_two_sided(M, k, sigma, v0):
    """Right and left eigenpairs near sigma sharing one LU factorization."""
    m = M.shape[0]
    Mc = M.astype(complex).tocsc()
    try:
        lu = spla.splu(Mc - sigma * sp.identity(m, format="csc", dtype=complex))
    except RuntimeError:
        sigma = sigma + 1e-6 + 1e-6j
        lu = spla.splu(Mc - sigma * sp.identity(m, format="csc", dtype=complex))
    op_r = spla.LinearOperator((m, m), matvec=lu.solve, dtype=complex)
    op_l = spla.LinearOperator((m, m), matvec=lambda x: lu.solve(x, trans="T"),
                               dtype=complex)
    v0c = v0.astype(complex)
    w, V = spla.eigs(Mc, k=k, sigma=sigma, OPinv=op_r, v0=v0c, maxiter=500, tol=1e-12)
    wl, Vl = spla.eigs(Mc.T.tocsc(), k=k, sigma=sigma, OPinv=op_l, v0=v0c,
                       maxiter=500, tol=1e-12)
    return (w, V), (wl, Vl)


def _real_basis(vecs: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Real orthonormal-ish basis of the 2D invariant subspace."""
    cols = []
    if abs(w[0].imag) > 1e-12:
        cols = [vecs[:, 0].real, vecs[:, 0].imag]
    else:
        cols = [vecs[:, 0].real, vecs[:, 1].real]
    B = np.column_stack(cols)
    Q, _ = np.linalg.qr(B)
    return Q


def _subspace_angle(X: np.ndarray, Y: np.ndarray, W: np.ndarray) -> float:
    """Largest principal angle between ranges of X and Y in the W inner product."""
    Wh = np.sqrt(W)[:, None]
    Qx, _ = np.linalg.qr(Wh * X)
    Qy, _ = np.linalg.qr(Wh * Y)
    sv = np.linalg.svd(Qx.T @ Qy, compute_uv=False)
    sv = np.clip(sv, -1.0, 1.0)
    return float(np.arccos(np.min(sv)))


def eig_near_zero(disc: Discretization, radius: float = 0.5,
                  count: int = 12) -> SpectralData:
    """Shift-invert eigensolve about 0 and kernel/adjoint extraction.

    Returns the `count` eigenvalues nearest zero, the kernel pair aligned to
    the analytic eigenfunctions, the biorthonormal adjoint pair, and the gap
    -max Re over non-kernel eigenvalues.  The kernel pair must consist of the
    two eigenvalues closest to zero and be separated from the rest.
    """
    M = disc.M_ext
    m = M.shape[0]
    v0 = np.ones(m) / math.sqrt(m)
    (w, V), (wl, Vl) = _arpack_two_sided(M, count, 1e-3j, v0)
    order = np.argsort(np.abs(w))
    w, V = w[order], V[:, order]
    kernel_w = w[:2]
    if np.abs(kernel_w[1]) > 0.5 * np.abs(w[2]):
        warnings.warn("kernel pair poorly separated from the rest of the "
                      f"spectrum: |s2| = {abs(kernel_w[1]):.3e}, "
                      f"|s3| = {abs(w[2]):.3e}")
    X = _real_basis(V[:, :2], kernel_w)
    # align the kernel basis to the analytic eigenfunctions (least squares
    # within the computed invariant subspace, W-weighted)
    phi1_a, phi2_a = analytic_kernel(disc)
    Phi_hat = np.column_stack([disc.pack_state(phi1_a), disc.pack_state(phi2_a)])
    WX = disc.W[:, None] * X
    G = X.T @ WX
    coeff = np.linalg.solve(G, WX.T @ Phi_hat)
    Phi = X @ coeff
    angle = _subspace_angle(X, Phi_hat, disc.W)
    # left (adjoint) kernel from the transposed problem
    ol = np.argsort(np.abs(wl))
    wl, Vl = wl[ol], Vl[:, ol]
    Y = _real_basis(Vl[:, :2], wl[:2])
    Psi_raw = Y / disc.W[:, None]          # left null vector -> W-adjoint kernel
    Gram = Psi_raw.T @ (disc.W[:, None] * Phi)
    try:
        Psi = Psi_raw @ np.linalg.inv(Gram).T
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"biorthonormalization failed: {exc}")
    nonkernel = w[2:]
    if len(nonkernel) == 0 or np.max(nonkernel.real) >= 0:
        gap = float("nan")
        warnings.warn("no spectral gap: non-kernel eigenvalue with Re >= 0")
    else:
        gap = float(-np.max(nonkernel.real))
    return SpectralData(
        eigenvalues=w, kernel_eigenvalues=kernel_w,
        phi1=disc.unpack_state(Phi[:, 0]), phi2=disc.unpack_state(Phi[:, 1]),
        psi1=disc.unpack_state(Psi[:, 0]), psi2=disc.unpack_state(Psi[:, 1]),
        gap=gap, kernel_angle=angle, disc=disc,
        _phi_packed=Phi, _psi_packed=Psi)


def adjoint_kernel(disc: Discretization,
                   spectral: SpectralData | None = None):
    """The biorthonormal adjoint kernel pair (psi1, psi2)."""
    if spectral is None:
        spectral = eig_near_zero(disc)
    return spectral.psi1, spectral.psi2


def project(spectral: SpectralData, state: ExtendedState) -> ExtendedState:
    """Rank-2 projection P v = (psi1, v) phi1 + (psi2, v) phi2."""
    disc = spectral.disc
    x = disc.pack_state(state)
    coeffs = spectral._psi_packed.T @ (disc.W * x)
    y = spectral._phi_packed @ coeffs
    return disc.unpack_state(y)


def project_coeffs(spectral: SpectralData, state: ExtendedState) -> np.ndarray:
    """The two projection coefficients ((psi1, v), (psi2, v))."""
    disc = spectral.disc
    x = disc.pack_state(state)
    return spectral._psi_packed.T @ (disc.W * x)


# ---------------------------------------------------------------------------
# similarity-transformed (unweighted) operator
# ---------------------------------------------------------------------------

def transformed_operator(disc: Discretization) -> sp.csc_matrix:
    """L_[eta] = eta L (eta^{-1} .) on plain L^2, variable coefficients.

    B(mu, x) = cI - 2 mu q'(x) A and C(mu, x) = S_omega + Df(v*)
    - c mu q' I + (mu^2 q'^2 - mu q'') A with q = sqrt(x^2+1).  The left
    row carries the Robin condition u_x = mu q' u induced by the Neumann
    condition on the weighted side; the right row is the transformed
    Dirichlet closure.
    """
    grid, weight, params = disc.grid, disc.weight, disc.params
    prof = disc.profile
    frame = prof.frame
    n, h = grid.n, grid.h
    mu = weight.mu
    x = grid.x
    q = np.sqrt(x**2 + 1.0)
    qp = x / q
    qpp = 1.0 / q**3
    A = params.A
    Sw = s_omega(frame.omega)
    rows, cols, vals = [], [], []

    def add(i, j, B):
        for a in range(2):
            for b in range(2):
                if B[a, b] != 0.0:
                    rows.append(2 * i + a)
                    cols.append(2 * j + b)
                    vals.append(B[a, b])

    sbc = _bc_scale(params, disc.grid)
    for i in range(n):
        Bx = frame.c * I2 - 2 * mu * qp[i] * A
        Cx = (Sw + df_jac(params, prof.v[i]) - frame.c * mu * qp[i] * I2
              + (mu**2 * qp[i]**2 - mu * qpp[i]) * A)
        diag = -2 * A / h**2 + Cx
        if i == 0:
            # ghost u_{-1} = u_1 - 2 h mu q' u_0
            add(i, i, diag + (A / h**2 - Bx / (2 * h)) @ (-2 * h * mu * qp[i] * I2))
            add(i, 1, 2 * A / h**2)
        elif i == n - 1:
            add(i, i, -sbc * I2)
        else:
            add(i, i - 1, A / h**2 - Bx / (2 * h))
            add(i, i, diag)
            add(i, i + 1, A / h**2 + Bx / (2 * h))
    return sp.csc_matrix((vals, (rows, cols)), shape=(2 * n, 2 * n))


def similarity_check(disc: Discretization, count: int = 6) -> dict:
    """Compare near-zero eigenvalues of the weighted v-block and of L_[eta].

    The two matrices are exactly similar up to O(h^2) discretization error,
    so their isolated eigenvalues near zero must agree within
    max(1e-6, 10 h^2); a larger mismatch flags a discretization bug.
    """
    h = disc.grid.h
    tol = max(1e-6, 10 * h**2)
    m = disc.L_v.shape[0]
    v0 = np.ones(m) / math.sqrt(m)
    w_w, _ = _arpack(disc.L_v, count, 1e-3j, v0)
    w_t, _ = _arpack(transformed_operator(disc), count, 1e-3j, v0)
    ew = w_w[np.argmin(np.abs(w_w))]
    et = w_t[np.argmin(np.abs(w_t))]
    diff = abs(ew - et)
    # limit check of the variable coefficient B(mu, x) at the domain ends
    mu = disc.weight.mu
    c = disc.profile.frame.c
    x_end = disc.grid.x_max
    qp_end = x_end / math.sqrt(x_end**2 + 1)
    B_right = c * I2 - 2 * mu * qp_end * disc.params.A
    B_limit = c * I2 - 2 * mu * disc.params.A
    b_dev = float(np.max(np.abs(B_right - B_limit)))
    report = {"eig_weighted": complex(ew), "eig_transformed": complex(et),
              "diff": float(diff), "tol": tol, "ok": bool(diff <= tol),
              "B_limit_deviation_right": b_dev}
    if not report["ok"]:
        warnings.warn(f"similarity check failed: |{ew} - {et}| = {diff:.3e} "
                      f"> {tol:.3e}")
    return report


# ---------------------------------------------------------------------------
# linearized propagation in shifted coordinates
# ---------------------------------------------------------------------------

class ShiftedStepper:
    """IMEX-BDF2 propagator for w' = L_h w in shifted coordinates (u, rho).

    Implicit part: the constant-coefficient block (A d_xx + c d_x + S_omega)
    on u (left Neumann ghost, right Dirichlet row) and S_omega on rho.
    Explicit part: the variable terms Df(v*(x)) u + K(x) rho and
    Df(v_inf) rho, plus any caller-supplied source (used by the
    reduced-system integrator).  BDF2 with an Euler start.
    """

    def __init__(self, disc: Discretization, dt: float):
        self.disc = disc
        self.dt = dt
        grid, params = disc.grid, disc.params
        frame = disc.profile.frame
        A, h = params.A, grid.h
        Sw = s_omega(frame.omega)
        self._solvers = {}
        self._rho_inv = {}
        for a in (1.5 / dt, 1.0 / dt):
            D = np.empty((grid.n, 2, 2))
            L = np.empty((grid.n - 1, 2, 2))
            U = np.empty((grid.n - 1, 2, 2))
            D[:] = a * I2 + 2 * A / h**2 - Sw
            L[:] = -A / h**2 + frame.c / (2 * h) * I2
            U[:] = -A / h**2 - frame.c / (2 * h) * I2
            U[0] = -2 * A / h**2
            D[-1] = a * I2
            L[-1] = 0.0
            self._solvers[a] = kernels.TridiagBlockSolver(D, L, U)
            self._rho_inv[a] = np.linalg.inv(a * I2 - Sw)
        self._DF = df_field(disc.profile.v, *params.beta_arrays())
        self._df_inf = df_jac(params, frame.v_inf)
        self._K = disc.K_block
        self._hist = None

    def explicit(self, u, rho, extra_u=None, extra_rho=None):
        eu = np.einsum("nij,nj->ni", self._DF, u) + self._K @ rho
        erho = self._df_inf @ rho
        if extra_u is not None:
            eu = eu + extra_u
        if extra_rho is not None:
            erho = erho + extra_rho
        return eu, erho

    def reset(self):
        self._hist = None

    def step(self, u, rho, extra_u=None, extra_rho=None):
        dt = self.dt
        eu, erho = self.explicit(u, rho, extra_u, extra_rho)
        if self._hist is None:
            a = 1.0 / dt
            rhs_u = u / dt + eu
            rhs_rho = rho / dt + erho
        else:
            a = 1.5 / dt
            up, rp, eup, erp = self._hist
            rhs_u = (4 * u - up) / (2 * dt) + 2 * eu - eup
            rhs_rho = (4 * rho - rp) / (2 * dt) + 2 * erho - erp
        rhs_u[-1] = 0.0   # Dirichlet row
        rho_new = self._rho_inv[a] @ rhs_rho
        u_new = self._solvers[a].solve(rhs_u)
        self._hist = (u, rho, eu, erho)
        return u_new, rho_new


# ---------------------------------------------------------------------------
# resolvent and semigroup probes
# ---------------------------------------------------------------------------

def resolvent_probe(disc: Discretization, s_list, iters: int = 20,
                    seed: int = 0) -> list[tuple[complex, float]]:
    """Estimate ||(sI - L_h)^{-1}|| in the weighted norm by power iteration.

    For each s the operator norm of the resolvent with respect to the
    X_eta inner product is the square root of the dominant eigenvalue of
    R* R, iterated with the W-weighted adjoint.
    """
    rng = np.random.default_rng(seed)
    m = disc.M_ext.shape[0]
    W = disc.W
    out = []
    for s in s_list:
        Ms = (s * sp.identity(m, format="csc", dtype=complex)
              - disc.M_ext.astype(complex))
        try:
            lu = spla.splu(Ms)
        except RuntimeError as exc:
            raise NumericalError(f"singular resolvent solve at s = {s}: {exc}")
        x = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        x /= math.sqrt(np.real(np.vdot(x, W * x)))
        lam = 0.0
        for _ in range(iters):
            y = lu.solve(x)
            z = lu.solve(W * y, trans="H") / W
            lam = float(np.real(np.vdot(x, W * z)))
            nz = math.sqrt(abs(np.real(np.vdot(z, W * z))))
            if not np.isfinite(nz) or nz == 0:
                raise NumericalError(f"resolvent power iteration broke down at s = {s}")
            x = z / nz
        out.append((s, math.sqrt(abs(lam))))
    return out


def semigroup_decay(disc: Discretization, spectral: SpectralData,
                    w0: ExtendedState, T: float, dt: float,
                    project_first: bool = True, record_stride: int = 10) -> dict:
    """Evolve w' = L_h w and fit the exponential decay of its X^1 norm.

    The initial state is projected onto range(I - P) unless project_first is
    False (kernel probes).  The linear flow reuses the IMEX machinery:
    constant-coefficient part implicit, variable Df terms explicit, in
    shifted coordinates.  Returns the fit (K, nu) of norm ~ K exp(-nu t) on
    [T/4, T] plus the recorded trace.
    """
    grid, weight, params = disc.grid, disc.weight, disc.params
    frame = disc.profile.frame
    if project_first:
        w0 = w0 - project(spectral, w0)
    stepper = ShiftedStepper(disc, dt)
    u = space.shifted_part(w0, weight, grid)
    rho = w0.rho.copy()
    nsteps = int(round(T / dt))
    times, norms = [], []

    def record(k, u, rho):
        st = from_shifted(u, rho, weight, grid)
        times.append(k * dt)
        norms.append(space.norm(weight, grid, st, order=1))

    record(0, u, rho)
    for k in range(nsteps):
        u, rho = stepper.step(u, rho)
        if (k + 1) % record_stride == 0:
            record(k + 1, u, rho)
    times = np.array(times)
    norms = np.array(norms)
    if not np.all(np.isfinite(norms)):
        raise NumericalError("semigroup probe blew up")
    mask = times >= T / 4
    floor = 1e3 * np.finfo(float).eps * max(norms[0], 1e-300)
    mask &= norms > floor
    if norms[0] == 0.0 or mask.sum() < 3:
        return {"K": 0.0, "nu": 0.0, "times": times, "norms": norms,
                "slope": 0.0, "intercept": -np.inf}
    slope, intercept = np.polyfit(times[mask], np.log(norms[mask]), 1)
    if slope > 1e-3 and project_first:
        raise NumericalError(
            f"growth detected in semigroup probe (slope {slope:.3e}); "
            "discretization or assumptions are off")
    return {"K": float(np.exp(intercept) / max(norms[0], 1e-300)),
            "nu": float(-slope), "slope": float(slope),
            "intercept": float(intercept), "times": times, "norms": norms}


def classify_spectrum(params: CglParams, profile: Profile, grid: Grid1D,
                      base_mu: float = 0.05, scan_mus=(0.02, 0.05, 0.08),
                      count: int = 12, move_tol: float = 1e-3) -> list[dict]:
    """Classify near-zero eigenvalues as kernel / point / essential-artifact.

    Eigenvalues of the weighted operator that stay put (movement < move_tol)
    as the weight exponent varies are point spectrum; mu-dependent ones are
    truncation artifacts of the essential spectrum.  The template rate is
    fixed across the scan so only mu varies.
    """
    mu_hat = profile.mu_star / 2.0
    if 2 * max(scan_mus) >= 2 * mu_hat:
        raise ValueError("scan weights exceed the admissible range mu < 2*mu_hat")
    spectra = {}
    for mu in sorted(set(scan_mus) | {base_mu}):
        disc = assemble(params, profile, WeightSpec(mu=mu, mu_hat=mu_hat), grid)
        spectra[mu] = eig_near_zero(disc, count=count)
    base = spectra[base_mu]
    others = [spectra[mu] for mu in scan_mus if mu != base_mu]
    out = []
    kernel = set()
    for i, s in enumerate(base.eigenvalues):
        if any(abs(s - ks) < 1e-14 for ks in base.kernel_eigenvalues):
            kernel.add(i)
    for i, s in enumerate(base.eigenvalues):
        if i in kernel:
            cls = "kernel"
        else:
            moves = [float(np.min(np.abs(o.eigenvalues - s))) for o in others]
            cls = "point" if max(moves) < move_tol else "essential-artifact"
        out.append({"eigenvalue": complex(s), "class": cls})
    return out
