"""Hot numerical kernels with a numba fast path and a numpy/LAPACK fallback.

The backend is chosen once at import time: set CGLFRONT_NUMBA=0 to force the
fallback path (vectorized numpy for the nonlinearity, LAPACK banded LU for
the implicit solves).  With numba enabled the implicit systems are solved by
a block-tridiagonal LU specialized to 2x2 blocks and the whole IMEX time
loop is jitted.

Both paths implement the same arithmetic; scripts/benchmark.py compares them.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.linalg.lapack as lapack

_env = os.environ.get("CGLFRONT_NUMBA", "1").strip().lower()
_want_numba = _env not in ("0", "false", "off", "no")

NUMBA_ENABLED = False
if _want_numba:
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass

if not NUMBA_ENABLED:
    def njit(*args, **kwargs):  # no-op decorator so the module still imports
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


# ---------------------------------------------------------------------------
# nonlinearity f(v) = g(|v|^2) v and its Jacobian field, over a grid
# ---------------------------------------------------------------------------

def _f_field_numpy(v, beta_re, beta_im):
    y = v[:, 0] ** 2 + v[:, 1] ** 2
    g1 = np.polynomial.polynomial.polyval(y, beta_re)
    g2 = np.polynomial.polynomial.polyval(y, beta_im)
    out = np.empty_like(v)
    out[:, 0] = g1 * v[:, 0] - g2 * v[:, 1]
    out[:, 1] = g2 * v[:, 0] + g1 * v[:, 1]
    return out


@njit(cache=True)
def _f_field_numba(v, beta_re, beta_im):
    n = v.shape[0]
    m = beta_re.shape[0]
    out = np.empty_like(v)
    for i in range(n):
        y = v[i, 0] * v[i, 0] + v[i, 1] * v[i, 1]
        g1 = beta_re[m - 1]
        g2 = beta_im[m - 1]
        for k in range(m - 2, -1, -1):
            g1 = g1 * y + beta_re[k]
            g2 = g2 * y + beta_im[k]
        out[i, 0] = g1 * v[i, 0] - g2 * v[i, 1]
        out[i, 1] = g2 * v[i, 0] + g1 * v[i, 1]
    return out


def f_field(v, beta_re, beta_im):
    """f(v) rowwise for v of shape (n, 2)."""
    if NUMBA_ENABLED:
        return _f_field_numba(np.ascontiguousarray(v), beta_re, beta_im)
    return _f_field_numpy(v, beta_re, beta_im)


def df_field(v, beta_re, beta_im):
    """Df(v) rowwise: array of shape (n, 2, 2)."""
    v = np.asarray(v)
    y = v[:, 0] ** 2 + v[:, 1] ** 2
    pv = np.polynomial.polynomial.polyval
    dre = np.polynomial.polynomial.polyder(beta_re)
    dim_ = np.polynomial.polynomial.polyder(beta_im)
    g1, g2 = pv(y, beta_re), pv(y, beta_im)
    g1p, g2p = pv(y, dre), pv(y, dim_)
    v1, v2 = v[:, 0], v[:, 1]
    out = np.empty((v.shape[0], 2, 2))
    out[:, 0, 0] = g1 + 2 * (g1p * v1 * v1 - g2p * v1 * v2)
    out[:, 0, 1] = -g2 + 2 * (g1p * v1 * v2 - g2p * v2 * v2)
    out[:, 1, 0] = g2 + 2 * (g2p * v1 * v1 + g1p * v1 * v2)
    out[:, 1, 1] = g1 + 2 * (g2p * v1 * v2 + g1p * v2 * v2)
    return out


# ---------------------------------------------------------------------------
# block-tridiagonal LU with 2x2 blocks (numba) / LAPACK banded LU (fallback)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _btd_factor(D, L, U):
    """Block-Thomas factorization; returns (Delta_inv, M) with
    Delta_i = D_i - M_i U_{i-1}, M_i = L_i Delta_{i-1}^{-1}."""
    n = D.shape[0]
    Dinv = np.empty_like(D)
    M = np.empty_like(L)
    a, b, c, d = D[0, 0, 0], D[0, 0, 1], D[0, 1, 0], D[0, 1, 1]
    det = a * d - b * c
    Dinv[0, 0, 0] = d / det
    Dinv[0, 0, 1] = -b / det
    Dinv[0, 1, 0] = -c / det
    Dinv[0, 1, 1] = a / det
    for i in range(1, n):
        # M_i = L_{i-1-indexed} @ Dinv_{i-1}
        for r in range(2):
            for s in range(2):
                M[i - 1, r, s] = (L[i - 1, r, 0] * Dinv[i - 1, 0, s]
                                  + L[i - 1, r, 1] * Dinv[i - 1, 1, s])
        a = D[i, 0, 0] - (M[i - 1, 0, 0] * U[i - 1, 0, 0] + M[i - 1, 0, 1] * U[i - 1, 1, 0])
        b = D[i, 0, 1] - (M[i - 1, 0, 0] * U[i - 1, 0, 1] + M[i - 1, 0, 1] * U[i - 1, 1, 1])
        c = D[i, 1, 0] - (M[i - 1, 1, 0] * U[i - 1, 0, 0] + M[i - 1, 1, 1] * U[i - 1, 1, 0])
        d = D[i, 1, 1] - (M[i - 1, 1, 0] * U[i - 1, 0, 1] + M[i - 1, 1, 1] * U[i - 1, 1, 1])
        det = a * d - b * c
        Dinv[i, 0, 0] = d / det
        Dinv[i, 0, 1] = -b / det
        Dinv[i, 1, 0] = -c / det
        Dinv[i, 1, 1] = a / det
    return Dinv, M


@njit(cache=True)
def _btd_solve(Dinv, M, U, b, out):
    n = Dinv.shape[0]
    y0 = b[0, 0]
    y1 = b[0, 1]
    out[0, 0] = y0
    out[0, 1] = y1
    for i in range(1, n):
        out[i, 0] = b[i, 0] - (M[i - 1, 0, 0] * out[i - 1, 0] + M[i - 1, 0, 1] * out[i - 1, 1])
        out[i, 1] = b[i, 1] - (M[i - 1, 1, 0] * out[i - 1, 0] + M[i - 1, 1, 1] * out[i - 1, 1])
    y0 = out[n - 1, 0]
    y1 = out[n - 1, 1]
    out[n - 1, 0] = Dinv[n - 1, 0, 0] * y0 + Dinv[n - 1, 0, 1] * y1
    out[n - 1, 1] = Dinv[n - 1, 1, 0] * y0 + Dinv[n - 1, 1, 1] * y1
    for i in range(n - 2, -1, -1):
        y0 = out[i, 0] - (U[i, 0, 0] * out[i + 1, 0] + U[i, 0, 1] * out[i + 1, 1])
        y1 = out[i, 1] - (U[i, 1, 0] * out[i + 1, 0] + U[i, 1, 1] * out[i + 1, 1])
        out[i, 0] = Dinv[i, 0, 0] * y0 + Dinv[i, 0, 1] * y1
        out[i, 1] = Dinv[i, 1, 0] * y0 + Dinv[i, 1, 1] * y1
    return out


def _blocks_to_band(D, L, U):
    """Assemble LAPACK band storage (kl = ku = 3) from 2x2 block tridiagonals."""
    n = D.shape[0]
    m = 2 * n
    kl = ku = 3
    ab = np.zeros((2 * kl + ku + 1, m))

    def put(i, j, val):
        ab[kl + ku + i - j, j] = val

    for k in range(n):
        for r in range(2):
            for s in range(2):
                put(2 * k + r, 2 * k + s, D[k, r, s])
                if k + 1 < n:
                    put(2 * (k + 1) + r, 2 * k + s, L[k, r, s])
                    put(2 * k + r, 2 * (k + 1) + s, U[k, r, s])
    return ab


class TridiagBlockSolver:
    """Prefactored solver for a block-tridiagonal system with 2x2 blocks.

    D: (n,2,2) diagonal blocks, L/U: (n-1,2,2) sub/super blocks.  solve()
    takes and returns arrays of shape (n, 2).
    """

    def __init__(self, D, L, U):
        D = np.ascontiguousarray(D, dtype=float)
        L = np.ascontiguousarray(L, dtype=float)
        U = np.ascontiguousarray(U, dtype=float)
        self.n = D.shape[0]
        self.U = U
        if NUMBA_ENABLED:
            self.Dinv, self.M = _btd_factor(D, L, U)
            self._lu = None
        else:
            ab = _blocks_to_band(D, L, U)
            lu, ipiv, info = lapack.dgbtrf(ab, 3, 3)
            if info != 0:
                raise np.linalg.LinAlgError(f"banded LU failed, info={info}")
            self._lu = (lu, ipiv)

    def solve(self, b):
        if self._lu is None:
            out = np.empty_like(b)
            return _btd_solve(self.Dinv, self.M, self.U, np.ascontiguousarray(b), out)
        lu, ipiv = self._lu
        x, info = lapack.dgbtrs(lu, 3, 3, ipiv, b.reshape(-1))
        if info != 0:
            raise np.linalg.LinAlgError(f"banded solve failed, info={info}")
        return x.reshape(-1, 2)


# ---------------------------------------------------------------------------
# fused IMEX-BDF2 time loop (numba fast path)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _run_bdf2_numba(v, vprev, rho, rhoprev, fb_re, fb_im,
                    Dinv, M, U, Dinv1, M1, U1,
                    rho_inv2, rho_inv1, bc_mat,
                    dt, nsteps, first_is_euler, stride,
                    snap_v, snap_rho):
    n = v.shape[0]
    isnap = 0
    fcur = _f_field_numba(v, fb_re, fb_im)
    fprev = _f_field_numba(vprev, fb_re, fb_im)
    rhs = np.empty_like(v)
    for step in range(nsteps):
        euler = first_is_euler and step == 0
        # far-field ODE first (one-way coupling into the right boundary row)
        g1 = fb_re[fb_re.shape[0] - 1]
        g2 = fb_im[fb_im.shape[0] - 1]
        y = rho[0] * rho[0] + rho[1] * rho[1]
        for k in range(fb_re.shape[0] - 2, -1, -1):
            g1 = g1 * y + fb_re[k]
            g2 = g2 * y + fb_im[k]
        frho0 = g1 * rho[0] - g2 * rho[1]
        frho1 = g2 * rho[0] + g1 * rho[1]
        if euler:
            b0 = rho[0] / dt + frho0
            b1 = rho[1] / dt + frho1
            newr0 = rho_inv1[0, 0] * b0 + rho_inv1[0, 1] * b1
            newr1 = rho_inv1[1, 0] * b0 + rho_inv1[1, 1] * b1
        else:
            g1p = fb_re[fb_re.shape[0] - 1]
            g2p = fb_im[fb_im.shape[0] - 1]
            yp = rhoprev[0] * rhoprev[0] + rhoprev[1] * rhoprev[1]
            for k in range(fb_re.shape[0] - 2, -1, -1):
                g1p = g1p * yp + fb_re[k]
                g2p = g2p * yp + fb_im[k]
            fp0 = g1p * rhoprev[0] - g2p * rhoprev[1]
            fp1 = g2p * rhoprev[0] + g1p * rhoprev[1]
            b0 = (4.0 * rho[0] - rhoprev[0]) / (2.0 * dt) + 2.0 * frho0 - fp0
            b1 = (4.0 * rho[1] - rhoprev[1]) / (2.0 * dt) + 2.0 * frho1 - fp1
            newr0 = rho_inv2[0, 0] * b0 + rho_inv2[0, 1] * b1
            newr1 = rho_inv2[1, 0] * b0 + rho_inv2[1, 1] * b1
        # field RHS
        if euler:
            for i in range(n):
                rhs[i, 0] = v[i, 0] / dt + fcur[i, 0]
                rhs[i, 1] = v[i, 1] / dt + fcur[i, 1]
        else:
            for i in range(n):
                rhs[i, 0] = (4.0 * v[i, 0] - vprev[i, 0]) / (2.0 * dt) \
                    + 2.0 * fcur[i, 0] - fprev[i, 0]
                rhs[i, 1] = (4.0 * v[i, 1] - vprev[i, 1]) / (2.0 * dt) \
                    + 2.0 * fcur[i, 1] - fprev[i, 1]
        # right-boundary coupling to the (already advanced) far field
        rhs[n - 1, 0] += bc_mat[0, 0] * newr0 + bc_mat[0, 1] * newr1
        rhs[n - 1, 1] += bc_mat[1, 0] * newr0 + bc_mat[1, 1] * newr1
        vnew = np.empty_like(v)
        if euler:
            _btd_solve(Dinv1, M1, U1, rhs, vnew)
        else:
            _btd_solve(Dinv, M, U, rhs, vnew)
        vprev = v
        v = vnew
        rhoprev = rho.copy()
        rho = np.array([newr0, newr1])
        fprev = fcur
        fcur = _f_field_numba(v, fb_re, fb_im)
        if (step + 1) % stride == 0:
            snap_v[isnap] = v
            snap_rho[isnap] = rho
            isnap += 1
    return isnap
