"""Essential spectrum of the linearization via its constant-coefficient limits.

Transforming the weighted operator to unweighted spaces replaces d_x by
d_x -+ mu at x -> +-inf, so the limit operators are

    L_{+-} u = A u_xx + B_{+-} u_x + C_{+-} u,
    B_+ = cI - 2 mu A,   C_+ = E_omega     + mu^2 A - c mu I,
    B_- = cI + 2 mu A,   C_- = S_omega+g(0) + mu^2 A + c mu I,

equivalently the symbol of the unweighted operator evaluated on the shifted
contour lambda = -+ mu + i nu.  The dispersion curves are the eigenvalue
branches of D_{+-}(nu, mu) = -nu^2 A + i nu B_{+-} + C_{+-}; on the minus
side they are values of the two conjugate-coefficient scalar quadratics, on
the plus side

    s_{+-}(nu, mu) = delta1 + rho1 +- sqrt(rho1^2 - 2 delta2 rho2 - delta2^2),
    delta1 = alpha_1 lam^2 + c lam,  delta2 = alpha_2 lam^2,  lam = -mu + i nu,

with rho_j = g_j'(|v_inf|^2) |v_inf|^2.  Fredholm indices of s I - L follow
from the first-order systems: ind = m_s^+(s) - m_s^-(s), the difference of
stable-subspace dimensions of

    M_{+-}(s) = [[0, I], [A^{-1}(s I - C_{+-}), -A^{-1} B_{+-}]].

Note: the printed sign of the 2 mu A term in B_{+-} varies in the source
material; the convention here is forced by requiring a single contour shift
per side, which makes M_{+-}(s) acquire a purely imaginary eigenvalue i nu
exactly when s lies on the corresponding dispersion curve.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import AssumptionError, NonHyperbolicError
from .model import CglParams, Frame, I2, g_eval, rho_pair, s_omega

TOL_HYP = 1e-8


@dataclass(frozen=True)
class LimitMatrices:
    side: str          # "plus" or "minus"
    mu: float
    B: np.ndarray
    C: np.ndarray


@dataclass(frozen=True)
class DispersionSample:
    nu: float
    mu: float
    side: str
    s_branches: tuple
    aux: tuple | None = None  # (delta1, delta2, rho1, rho2) on the plus side


@dataclass
class IndexMap:
    re: np.ndarray          # (nre,)
    im: np.ndarray          # (nim,)
    status: np.ndarray      # (nim, nre), 0 regular / 1 on-curve
    index: np.ndarray       # (nim, nre), valid where status == 0
    m_plus: np.ndarray
    m_minus: np.ndarray
    mu: float = 0.0


@dataclass(frozen=True)
class Sector:
    mu: float
    eps: float
    beta: float
    kappa: float = 0.0      # used only when mu == 0


def _check_side(side: str):
    if side not in ("plus", "minus"):
        raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")


def limit_matrices(params: CglParams, frame: Frame, mu: float, side: str) -> LimitMatrices:
    """Limit coefficients (B, C) of the transformed operator at x -> +-inf."""
    _check_side(side)
    if mu < 0:
        raise ValueError("mu must be >= 0")
    A = params.A
    c = frame.c
    Sw = s_omega(frame.omega)
    if side == "plus":
        B = c * I2 - 2 * mu * A
        r1, r2 = rho_pair(params, frame.y_inf)
        E = 2 * np.array([[r1, 0.0], [r2, 0.0]])
        C = E + mu**2 * A - c * mu * I2
    else:
        B = c * I2 + 2 * mu * A
        C = Sw + g_eval(params, 0.0).as_matrix() + mu**2 * A + c * mu * I2
    return LimitMatrices(side=side, mu=mu, B=B, C=C)


def fourier_symbol(params: CglParams, frame: Frame, nu, mu: float, side: str) -> np.ndarray:
    """D_{+-}(nu, mu) = -nu^2 A + i nu B + C, broadcast over nu."""
    lm = limit_matrices(params, frame, mu, side)
    nu = np.asarray(nu, dtype=float)
    return (-(nu**2)[..., None, None] * params.A
            + 1j * nu[..., None, None] * lm.B + lm.C)


def disp_minus(params: CglParams, frame: Frame, nu: float, mu: float = 0.0):
    """The two dispersion branches of the zero rest state.

    Closed form: the scalar symbol alpha l^2 + c l + i omega + G(0) at
    l = mu + i nu, and its conjugate-coefficient partner.
    """
    lam = mu + 1j * nu
    alpha = params.alpha.z
    g0 = g_eval(params, 0.0).z
    base = frame.c * lam
    s1 = alpha * lam**2 + base + 1j * frame.omega + g0
    s2 = np.conj(alpha) * lam**2 + base - 1j * frame.omega + np.conj(g0)
    return s1, s2


def disp_plus(params: CglParams, frame: Frame, nu: float, mu: float = 0.0) -> DispersionSample:
    """Dispersion branches of the nonzero rest state, with the (delta, rho) data."""
    lam = -mu + 1j * nu
    d1 = params.alpha.re * lam**2 + frame.c * lam
    d2 = params.alpha.im * lam**2
    r1, r2 = rho_pair(params, frame.y_inf)
    root = np.sqrt((r1**2 - 2 * d2 * r2 - d2**2).astype(complex)) \
        if isinstance(d2, np.ndarray) else cmath.sqrt(r1**2 - 2 * d2 * r2 - d2**2)
    s_plus = d1 + r1 + root
    s_minus = d1 + r1 - root
    return DispersionSample(nu=nu, mu=mu, side="plus",
                            s_branches=(s_plus, s_minus),
                            aux=(d1, d2, r1, r2))


def quadratic_contact(params: CglParams, frame: Frame, nu_range: float = 5.0,
                      n_samples: int = 4001) -> dict:
    """Contact of the rightmost branch with the imaginary axis at the origin.

    curvature = 2 (rho1 alpha1 + rho2 alpha2)/|rho1| is the second
    nu-derivative of s_+(nu, 0) at nu = 0; the sampled real part must attain
    its unique global maximum at nu = 0.
    """
    r1, r2 = rho_pair(params, frame.y_inf)
    if r1 >= 0:
        raise AssumptionError("rho1 >= 0: rest state is not on the stable branch")
    value_at_0 = disp_plus(params, frame, 0.0, 0.0).s_branches[0]
    curvature = 2.0 * (r1 * params.alpha.re + r2 * params.alpha.im) / abs(r1)
    if curvature >= 0:
        raise AssumptionError(
            f"spectral condition violated: curvature {curvature:.6g} >= 0, "
            "essential spectrum protrudes into the right half plane")
    nus = np.linspace(-nu_range, nu_range, n_samples)
    sample = disp_plus(params, frame, nus, 0.0)
    re = np.real(sample.s_branches[0])
    k0 = int(np.argmax(re))
    is_max = abs(nus[k0]) <= nu_range / (n_samples - 1) * 1.5 \
        and np.all(re[np.abs(nus) > 0.1] < re[k0] - 1e-12)
    return {"value_at_0": value_at_0, "curvature": float(curvature),
            "is_max": bool(is_max)}


def m_matrix(params: CglParams, frame: Frame, s: complex, mu: float, side: str) -> np.ndarray:
    """First-order companion matrix of the quadratic pencil at the given side."""
    lm = limit_matrices(params, frame, mu, side)
    Ainv = np.linalg.inv(params.A)
    M = np.zeros((4, 4), dtype=complex)
    M[:2, 2:] = I2
    M[2:, :2] = Ainv @ (s * I2 - lm.C)
    M[2:, 2:] = -Ainv @ lm.B
    return M


def characteristic_roots(params: CglParams, frame: Frame, s: complex,
                         mu: float, side: str) -> np.ndarray:
    """Pencil roots by the scalar reduction (cross-check path for m_matrix).

    minus: two conjugate-coefficient quadratics in xi = lambda + mu;
    plus: the quartic (a xi^2 + c xi - s + rho')(conj-a ...) = |rho'|^2 in
    xi = lambda - mu.
    """
    _check_side(side)
    alpha = params.alpha.z
    c = frame.c
    if side == "minus":
        g0 = g_eval(params, 0.0).z
        roots = []
        for a, w in ((alpha, 1j * frame.omega + g0 - s),
                     (np.conj(alpha), -1j * frame.omega + np.conj(g0) - s)):
            disc = cmath.sqrt(c * c - 4 * a * w)
            roots += [(-c + disc) / (2 * a), (-c - disc) / (2 * a)]
        return np.array(roots) - mu
    r1, r2 = rho_pair(params, frame.y_inf)
    rho = r1 + 1j * r2
    w1, w2 = rho - s, np.conj(rho) - s
    coeffs = [abs(alpha) ** 2,
              2 * c * params.alpha.re,
              alpha * w2 + np.conj(alpha) * w1 + c * c,
              c * (w1 + w2),
              w1 * w2 - abs(rho) ** 2]
    return np.roots(np.array(coeffs, dtype=complex)) + mu


def stable_dim(params: CglParams, frame: Frame, s: complex, mu: float,
               side: str, tol_hyp: float = TOL_HYP) -> int:
    """Dimension of the stable subspace of M_side(s); errors when s is on
    (or numerically indistinguishable from) the dispersion set."""
    ev = np.linalg.eigvals(m_matrix(params, frame, s, mu, side))
    if np.any(np.abs(ev.real) <= tol_hyp):
        raise NonHyperbolicError(
            f"s = {s} lies on the {side}-side dispersion set")
    return int(np.sum(ev.real < 0))


def fredholm_index(params: CglParams, frame: Frame, s: complex,
                   mu: float = 0.0) -> int | None:
    """m_s^+ - m_s^-, or None when s is on the essential spectrum."""
    try:
        mp = stable_dim(params, frame, s, mu, "plus")
        mm = stable_dim(params, frame, s, mu, "minus")
    except NonHyperbolicError:
        return None
    return mp - mm


# ---------------------------------------------------------------------------
# dispersion-curve sampling and the index map
# ---------------------------------------------------------------------------

def _nu_max_for(params: CglParams, frame: Frame, mu: float, re_min: float) -> float:
    r1, _ = rho_pair(params, frame.y_inf)
    g0 = abs(g_eval(params, 0.0).z)
    budget = abs(re_min) + 2.0 + abs(r1) + g0 + abs(frame.c) * (1 + mu) + mu**2
    return 1.2 * math.sqrt(budget / params.alpha.re)


def sample_dispersion(params: CglParams, frame: Frame, mu: float,
                      re_min: float = -10.0, n: int = 4001) -> list[dict]:
    """Sample all four dispersion branches over |nu| <= nu_max.

    nu_max is chosen from the -alpha_1 nu^2 asymptotics so every branch has
    left the half plane {Re s >= re_min} by the end of the sweep.
    """
    nu_max = _nu_max_for(params, frame, mu, re_min)
    nus = np.linspace(-nu_max, nu_max, n)
    out = []
    s1, s2 = disp_minus(params, frame, nus, mu)
    out.append({"side": "minus", "branch": 0, "nu": nus, "s": s1})
    out.append({"side": "minus", "branch": 1, "nu": nus, "s": s2})
    ds = disp_plus(params, frame, nus, mu)
    out.append({"side": "plus", "branch": 0, "nu": nus, "s": ds.s_branches[0]})
    out.append({"side": "plus", "branch": 1, "nu": nus, "s": ds.s_branches[1]})
    return out


def _curve_points(curves, window=None) -> np.ndarray:
    pts = np.concatenate([c["s"] for c in curves])
    xy = np.column_stack([pts.real, pts.imag])
    if window is not None:
        re_min, re_max, im_min, im_max = window
        pad_re = 0.1 * (re_max - re_min)
        pad_im = 0.1 * (im_max - im_min)
        keep = ((xy[:, 0] > re_min - pad_re) & (xy[:, 0] < re_max + pad_re)
                & (xy[:, 1] > im_min - pad_im) & (xy[:, 1] < im_max + pad_im))
        xy = xy[keep]
    return xy


def _batched_stable_dims(params, frame, s_flat, mu, side, tol_hyp):
    """Stable dimensions for an array of spectral parameters at once."""
    lm = limit_matrices(params, frame, mu, side)
    Ainv = np.linalg.inv(params.A)
    N = len(s_flat)
    M = np.zeros((N, 4, 4), dtype=complex)
    M[:, 0, 2] = M[:, 1, 3] = 1.0
    base = np.einsum("ab,bc->ac", Ainv, -lm.C)
    M[:, 2:, :2] = base
    M[:, 2:, :2] += s_flat[:, None, None] * Ainv
    M[:, 2:, 2:] = -Ainv @ lm.B
    ev = np.linalg.eigvals(M)
    near = np.any(np.abs(ev.real) <= tol_hyp, axis=1)
    dims = np.sum(ev.real < 0, axis=1)
    return dims, near


def map_region(params: CglParams, frame: Frame, mu: float, window,
               resolution, tol_hyp: float = TOL_HYP) -> IndexMap:
    """Classify a rectangle of spectral parameters by Fredholm index.

    window = (re_min, re_max, im_min, im_max); resolution is an int or an
    (n_re, n_im) pair.  Nodes within twice the grid spacing of a sampled
    dispersion curve (or with a pencil eigenvalue on the axis) are flagged
    on-curve; the others carry index = m_s^+ - m_s^-.
    """
    re_min, re_max, im_min, im_max = window
    if not (re_max > re_min and im_max > im_min):
        raise ValueError("degenerate window")
    if isinstance(resolution, int):
        nre = nim = resolution
    else:
        nre, nim = resolution
    res = np.linspace(re_min, re_max, nre)
    ims = np.linspace(im_min, im_max, nim)
    S = res[None, :] + 1j * ims[:, None]
    s_flat = S.ravel()
    mp, near_p = _batched_stable_dims(params, frame, s_flat, mu, "plus", tol_hyp)
    mm, near_m = _batched_stable_dims(params, frame, s_flat, mu, "minus", tol_hyp)
    curves = sample_dispersion(params, frame, mu, re_min=re_min)
    xy = _curve_points(curves, window)
    tol_curve = 2.0 * max((re_max - re_min) / (nre - 1), (im_max - im_min) / (nim - 1))
    if len(xy):
        tree = cKDTree(xy)
        d, _ = tree.query(np.column_stack([s_flat.real, s_flat.imag]),
                          distance_upper_bound=tol_curve)
        near_curve = np.isfinite(d)
    else:
        near_curve = np.zeros(len(s_flat), dtype=bool)
    status = (near_p | near_m | near_curve).astype(np.int8)
    index = (mp - mm).astype(np.int64)
    shape = (nim, nre)
    return IndexMap(re=res, im=ims, status=status.reshape(shape),
                    index=index.reshape(shape), m_plus=mp.reshape(shape),
                    m_minus=mm.reshape(shape), mu=mu)


# ---------------------------------------------------------------------------
# stability sectors
# ---------------------------------------------------------------------------

def kappa_reference(params: CglParams, frame: Frame) -> float:
    """kappa = |rho1 alpha1 + rho2 alpha2| / (4 c^2 |rho1|) for the rounded sector."""
    r1, r2 = rho_pair(params, frame.y_inf)
    return abs(r1 * params.alpha.re + r2 * params.alpha.im) / (4 * frame.c**2 * abs(r1))


def _sector_gap_positive_mu(samples: np.ndarray, beta: float, mu: float, eps: float) -> float:
    """min over curve samples of |arg(s + beta mu)| - (pi/2 + eps mu)."""
    ang = np.abs(np.angle(samples + beta * mu))
    return float(np.min(ang) - (math.pi / 2 + eps * mu))


def fit_sector(params: CglParams, frame: Frame, mu: float,
               n_boundary: int = 400, tol_dist: float = 1e-9,
               eps_cap: float = 2.0) -> Sector:
    """Fit the largest sector avoiding the sampled dispersion set.

    mu > 0: sector {|arg(s + beta mu)| <= pi/2 + eps mu} with beta = c/2 and
    eps bisected to the largest admissible value.  mu = 0: rounded sector
    {Re s >= -kappa min(|Im s|, beta)^2 + eps min(beta - |Im s|, 0)} with
    kappa from the curvature of the contact branch; the contact point s = 0
    sits on the boundary by construction.

    Raises AssumptionError when the spectral condition fails.  Boundary
    samples are checked to keep a positive distance to the curve samples
    (the mu = 0 check excludes a small ball around the contact point).
    """
    # quadratic_contact raises if the spectral condition fails
    quadratic_contact(params, frame)
    beta = frame.c / 2.0
    curves = sample_dispersion(params, frame, mu)
    samples = np.concatenate([c["s"] for c in curves])

    if mu > 0:
        gaps = np.diff(np.sort(np.abs(np.angle(samples + beta * mu))))
        if np.max(gaps) > 0.1:
            curves = sample_dispersion(params, frame, mu, n=16001)
            samples = np.concatenate([c["s"] for c in curves])
            gaps = np.diff(np.sort(np.abs(np.angle(samples + beta * mu))))
            if np.max(gaps) > 0.1:
                warnings.warn("dispersion sampling may be too coarse for the "
                              "sector fit")
        if _sector_gap_positive_mu(samples, beta, mu, 0.0) <= 0:
            raise AssumptionError("no admissible sector: dispersion set meets "
                                  "the closed left half plane shifted by beta*mu")
        lo, hi = 0.0, eps_cap
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if _sector_gap_positive_mu(samples, beta, mu, mid) > 0:
                lo = mid
            else:
                hi = mid
        eps = 0.999 * lo
        if eps <= 0:
            raise AssumptionError("sector fit failed: eps -> 0")
        # boundary samples along the two rays
        rmax = float(np.max(np.abs(samples + beta * mu))) + 1.0
        r = np.linspace(0.0, rmax, n_boundary // 2)
        pts = []
        for sgn in (+1, -1):
            ang = sgn * (math.pi / 2 + eps * mu)
            pts.append(-beta * mu + r * np.exp(1j * ang))
        bpts = np.concatenate(pts)
        tree = cKDTree(np.column_stack([samples.real, samples.imag]))
        d, _ = tree.query(np.column_stack([bpts.real, bpts.imag]))
        if np.min(d) <= tol_dist:
            raise AssumptionError("sector boundary touches the dispersion set")
        return Sector(mu=mu, eps=float(eps), beta=float(beta), kappa=0.0)

    # mu = 0: rounded sector
    kappa = kappa_reference(params, frame)
    im = samples.imag
    re = samples.real
    inner = np.abs(im) <= beta
    # shrink beta until the quadratic bound holds strictly inside
    for _ in range(60):
        inner = np.abs(im) <= beta
        ok = np.all(re[inner] <= -2 * kappa * im[inner] ** 2 + 1e-14)
        if ok:
            break
        beta *= 0.5
    else:
        raise AssumptionError("rounded sector fit failed: no admissible beta")
    outer = ~inner
    margin = (-kappa * beta**2 - re[outer]) / (np.abs(im[outer]) - beta)
    eps = min(float(np.min(margin)) * 0.5 if len(margin) else eps_cap,
              kappa * beta, eps_cap)
    if eps <= 0:
        raise AssumptionError("rounded sector fit failed: eps <= 0")
    # boundary distance check away from the quadratic contact at the origin
    ims_b = np.linspace(-3 * beta, 3 * beta, n_boundary)
    res_b = np.where(np.abs(ims_b) <= beta, -kappa * ims_b**2,
                     -kappa * beta**2 + eps * (beta - np.abs(ims_b)))
    bpts = res_b + 1j * ims_b
    keep = np.abs(bpts) > 0.05 * beta
    tree = cKDTree(np.column_stack([samples.real, samples.imag]))
    d, _ = tree.query(np.column_stack([bpts[keep].real, bpts[keep].imag]))
    if np.min(d) <= tol_dist:
        raise AssumptionError("rounded sector boundary touches the dispersion set")
    return Sector(mu=0.0, eps=float(eps), beta=float(beta), kappa=float(kappa))
