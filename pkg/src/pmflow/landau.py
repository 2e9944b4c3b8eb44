"""Closed-form Landau solutions driven by a point force beta * delta_0.

For beta = (beta1, 0, 0) the velocity and pressure are explicit rational
functions of x and |x| with one parameter c, |c| > 1, tied to beta1 by a
closed formula.  General directions are handled by rotating coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.special
from numpy.polynomial import legendre

from .grid import FourierVectorField, GridSpec, PhysicalVectorField

C_MARGIN = 1e-9
_SERIES_TERMS = 60


class LandauError(ValueError):
    pass


def _bracket_series(c: float) -> float:
    # 2 + 6c^2 - 3c(c^2-1) log((c+1)/(c-1)) = 2 + sum_j 12 c^(-2j) / ((2j+1)(2j+3))
    z = 1.0 / (c * c)
    total, term = 0.0, 1.0
    for j in range(_SERIES_TERMS):
        piece = 12.0 * term / ((2 * j + 1) * (2 * j + 3))
        total += piece
        if piece < 1e-18 * total:
            break
        term *= z
    return 2.0 + total


def _bracket(c: float) -> float:
    if abs(c) > 2.0:
        return _bracket_series(c)
    # log((c+1)/(c-1)) = log1p(2/(c-1)), even in c after the 3c(c^2-1) factor
    a = abs(c)
    return 2.0 + 6.0 * a * a - 3.0 * a * (a * a - 1.0) * math.log1p(2.0 / (a - 1.0))


def beta_from_c(c: float) -> float:
    """beta1(c) = 8 pi c / (3 (c^2 - 1)) * (2 + 6c^2 - 3c(c^2 - 1) log((c+1)/(c-1)))."""
    c = float(c)
    if not abs(c) > 1.0 + C_MARGIN:
        raise LandauError(f"|c| must exceed 1, got {c}")
    return 8.0 * math.pi * c / (3.0 * (c * c - 1.0)) * _bracket(c)


def c_from_beta(beta1: float, branch: int | None = None) -> float:
    """Invert beta_from_c on the branch c > 1 (branch=+1) or c < -1 (branch=-1)."""
    beta1 = float(beta1)
    if beta1 == 0 or not math.isfinite(beta1):
        raise LandauError("beta1 must be finite and nonzero")
    branch = int(np.sign(beta1)) if branch is None else int(branch)
    if branch not in (1, -1):
        raise LandauError("branch must be +1 or -1")
    if np.sign(beta1) != branch:
        raise LandauError(f"beta1 = {beta1} has no preimage on the c {'>' if branch > 0 else '<'} {branch} branch")
    target = abs(beta1)

    # work on c = 1 + exp(s), where beta decreases monotonically in s
    def gap(s):
        return beta_from_c(1.0 + math.exp(s)) - target

    lo, hi = math.log(2 * C_MARGIN), 1.0
    while gap(hi) > 0:
        hi *= 2.0
        if hi > 700:
            raise LandauError("beta1 too small to invert")
    if gap(lo) < 0:
        raise LandauError("beta1 too large to invert")
    s = scipy.optimize.brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    c = 1.0 + math.exp(s)
    if abs(beta_from_c(c) - target) > 1e-10 * (1.0 + target):
        raise LandauError("inversion did not reach tolerance")
    return branch * c


@dataclass(frozen=True)
class LandauParams:
    c: float

    def __post_init__(self):
        if not abs(self.c) > 1.0 + C_MARGIN:
            raise LandauError(f"|c| must exceed 1 + {C_MARGIN}, got {self.c}")

    @property
    def beta1(self) -> float:
        return beta_from_c(self.c)

    @property
    def branch(self) -> int:
        return 1 if self.c > 0 else -1

    @classmethod
    def from_beta(cls, beta1: float, branch: int | None = None) -> LandauParams:
        return cls(c_from_beta(beta1, branch))


def landau_eval(x, params: LandauParams):
    """(U, P) at points x of shape (..., 3); U has shape (..., 3)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise LandauError("points must have a trailing axis of length 3")
    r = np.sqrt(np.sum(x**2, axis=-1))
    if np.any(r == 0):
        raise LandauError("the origin is the singular point")
    c = params.c
    x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
    den = r * (c * r - x1) ** 2
    U = np.empty_like(x)
    U[..., 0] = 2.0 * (c * r * r - 2.0 * x1 * r + c * x1 * x1) / den
    U[..., 1] = 2.0 * x2 * (c * x1 - r) / den
    U[..., 2] = 2.0 * x3 * (c * x1 - r) / den
    P = 4.0 * (c * x1 - r) / den
    return U, P


def rotation_to(direction) -> np.ndarray:
    """Proper rotation R with R e1 = direction / |direction|."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    e1 = np.array([1.0, 0.0, 0.0])
    v = np.cross(e1, d)
    s, cth = np.linalg.norm(v), float(d @ e1)
    if s < 1e-15:
        return np.eye(3) if cth > 0 else np.diag([-1.0, -1.0, 1.0])
    k = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]]) / s
    return np.eye(3) + s * k + (1 - cth) * (k @ k)


def landau_eval_beta(x, beta):
    """Solution for a general force vector beta, by rotation of the e1 case."""
    beta = np.asarray(beta, dtype=float)
    mag = float(np.linalg.norm(beta))
    params = LandauParams.from_beta(mag, 1)
    R = rotation_to(beta)
    U, P = landau_eval(np.asarray(x, dtype=float) @ R, params)
    return U @ R.T, P


# --------------------------------------------------------------------------
# residual of the stationary equations away from the origin


@dataclass
class LandauResidual:
    residual: float  # Richardson-extrapolated max |-lap U + (U.grad)U + grad P|
    divergence: float  # Richardson-extrapolated max |div U|
    residual_h: float  # plain central differences at step h
    residual_h2: float  # plain central differences at step h/2
    divergence_h: float
    divergence_h2: float
    points: int

    @property
    def observed_order(self) -> float:
        return math.log2(self.residual_h / self.residual_h2)

    @property
    def divergence_order(self) -> float:
        return math.log2(self.divergence_h / self.divergence_h2)


def sample_points(r_min: float, r_max: float, n_radii: int = 5, n_dirs: int = 64) -> np.ndarray:
    """Fibonacci-sphere directions times geometric radii, shape (N, 3)."""
    i = np.arange(n_dirs) + 0.5
    mu = 1 - 2 * i / n_dirs
    phi = math.pi * (1 + 5**0.5) * i
    s = np.sqrt(1 - mu**2)
    dirs = np.stack([mu, s * np.cos(phi), s * np.sin(phi)], axis=-1)
    radii = np.geomspace(r_min, r_max, n_radii)
    return (radii[:, None, None] * dirs[None]).reshape(-1, 3)


def _defects(points: np.ndarray, params: LandauParams, h: float):
    # central differences: returns per-point momentum and divergence defects
    U0, _ = landau_eval(points, params)
    lap = -6.0 * U0
    grad_u = np.empty(points.shape[:-1] + (3, 3))  # [..., i, j] = d_j U_i
    grad_p = np.empty(points.shape)
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        Up, Pp = landau_eval(points + e, params)
        Um, Pm = landau_eval(points - e, params)
        lap += Up + Um
        grad_u[..., :, j] = (Up - Um) / (2 * h)
        grad_p[..., j] = (Pp - Pm) / (2 * h)
    lap /= h * h
    momentum = -lap + np.einsum("...j,...ij->...i", U0, grad_u) + grad_p
    div = np.trace(grad_u, axis1=-2, axis2=-1)
    return momentum, div


def landau_residual(params: LandauParams, r_min: float, r_max: float, h: float = 1e-3,
                    points: np.ndarray | None = None) -> LandauResidual:
    """Momentum and continuity defects on the shell r_min <= |x| <= r_max."""
    if r_min < 10 * h:
        raise LandauError("region must stay at least 10 h away from the origin")
    if not r_max > r_min:
        raise LandauError("need r_min < r_max")
    pts = sample_points(r_min, r_max) if points is None else np.asarray(points, dtype=float)
    m1, d1 = _defects(pts, params, h)
    m2, d2 = _defects(pts, params, h / 2)
    m_ext = (4 * m2 - m1) / 3
    d_ext = (4 * d2 - d1) / 3

    def mx(a):
        return float(np.max(np.linalg.norm(a, axis=-1) if a.ndim > 1 else np.abs(a)))

    return LandauResidual(mx(m_ext), mx(d_ext), mx(m1), mx(m2), mx(d1), mx(d2), len(pts))


# --------------------------------------------------------------------------
# lattice samples


@dataclass
class LandauSample:
    field: PhysicalVectorField
    pressure: np.ndarray
    mask: np.ndarray  # True where the value was zeroed near the singular point


def sample_on_grid(grid: GridSpec, beta, center=(0.0, 0.0, 0.0), exclusion: float | None = None) -> LandauSample:
    """Point values on the lattice (minimum image about center), zero within 2 dx of it."""
    exclusion = 2.0 * grid.dx if exclusion is None else exclusion
    d = grid.displacement(center)
    r = np.sqrt(np.sum(d**2, axis=0))
    mask = r < exclusion
    pts = np.moveaxis(d, 0, -1)[~mask]
    U, P = landau_eval_beta(pts, beta)
    vals = np.zeros((3, *grid.shape))
    vals[:, ~mask] = U.T
    pres = np.zeros(grid.shape)
    pres[~mask] = P
    return LandauSample(PhysicalVectorField(grid, vals), pres, mask)


# --------------------------------------------------------------------------
# whole-space transform through spherical harmonics
#
# U is homogeneous of degree -1: U_1 = g(mu)/|x|, (U_2, U_3) = (w_2, w_3) a(mu)/|x|
# with mu = x_1/|x| and w the unit vector.  For a degree-l harmonic Y_l,
#   FT[|x|^-1 Y_l(w)] = (-i)^l sqrt(2) Gamma((l+2)/2)/Gamma((l+1)/2) |xi|^-2 Y_l(xi/|xi|).
# g expands in P_l(mu); w_2 a(mu) expands in w_2 P_l'(mu), also harmonics of degree l.


def _harmonic_factor(l: np.ndarray) -> np.ndarray:
    l = np.asarray(l, dtype=float)
    return (-1j) ** l * math.sqrt(2.0) * np.exp(scipy.special.gammaln((l + 2) / 2) - scipy.special.gammaln((l + 1) / 2))


def landau_profiles(params: LandauParams):
    c = params.c

    def g(mu):
        return 2.0 * (c - 2.0 * mu + c * mu * mu) / (c - mu) ** 2

    def a(mu):
        return 2.0 * (c * mu - 1.0) / (c - mu) ** 2

    return g, a


def harmonic_coefficients(params: LandauParams, lmax: int = 200, nodes: int = 400):
    """Legendre coefficients of g and of a in the P_l' basis (weight 1 - mu^2)."""
    g, a = landau_profiles(params)
    mu, wts = legendre.leggauss(nodes)
    P = np.array([legendre.legval(mu, np.eye(lmax + 1)[l]) for l in range(lmax + 1)])
    dP = np.array([legendre.legval(mu, legendre.legder(np.eye(lmax + 1)[l])) for l in range(lmax + 1)])
    l = np.arange(lmax + 1)
    cg = (2 * l + 1) / 2.0 * (P * (wts * g(mu))).sum(axis=1)
    norm = np.where(l > 0, 2.0 * l * (l + 1) / (2 * l + 1), 1.0)
    ca = (dP * (wts * (1 - mu**2) * a(mu))).sum(axis=1) / norm
    ca[0] = 0.0
    return cg, ca


def landau_fourier(grid: GridSpec, beta1: float, lmax: int = 200) -> FourierVectorField:
    """Lattice samples of the whole-space transform of U for beta = beta1 e1.

    The zero mode is set to 0 and the dealiasing mask applied.
    """
    params = LandauParams.from_beta(beta1)
    cg, ca = harmonic_coefficients(params, lmax)
    l = np.arange(lmax + 1)
    fac = _harmonic_factor(l)
    nz = (grid.xi_sq > 0) & grid.dealias_mask
    xi = grid.xi[:, nz]
    r = np.sqrt(np.sum(xi**2, axis=0))
    mu = xi[0] / r
    # harmonic sums by Clenshaw through legval / derivative
    s_g = legendre.legval(mu, cg * fac)
    s_a = legendre.legval(mu, legendre.legder(ca * fac))
    amp = np.zeros((3, *grid.shape), dtype=complex)
    inv = 1.0 / r**2
    amp[0][nz] = s_g * inv
    amp[1][nz] = xi[1] / r * s_a * inv
    amp[2][nz] = xi[2] / r * s_a * inv
    return FourierVectorField(grid, amp, solenoidal=True)
