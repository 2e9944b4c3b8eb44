"""External forces represented by their Fourier symbols.

Every force exposes ``symbol(grid, t)`` returning a (3, n, n, n) complex
array on the lattice, and ``symbol_at(xi, t)`` for a single wavevector.
Distributional forces are never mollified in physical space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .grid import FT_NORM, GridSpec
from .norms import NormBand, default_band

TWO_PI_32 = (2.0 * math.pi) ** 1.5
# Fourier symbol constant of the log-line distribution T
LOG_LINE_CONST = 2.0**-1.5 * math.pi**-0.5


class ForceError(ValueError):
    pass


# --------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class TrajectorySpec:
    """Curve gamma(t) with |gamma(t) - gamma(s)| <= H |t - s|^alpha."""

    gamma: Callable[[float], np.ndarray]
    holder_exponent: float
    holder_constant: float
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.holder_exponent <= 1:
            raise ValueError("holder_exponent must lie in (0, 1]")
        g0 = np.asarray(self.gamma(0.0), dtype=float)
        if g0.shape != (3,) or not np.all(np.isfinite(g0)):
            raise ValueError("gamma(0) must be a finite 3-vector")

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self.gamma(t), dtype=float)

    def check_holder(self, t_max: float = 10.0, samples: int = 200, seed: int = 0) -> float:
        """Largest observed |gamma(t)-gamma(s)| / (H |t-s|^alpha) over random pairs."""
        rng = np.random.default_rng(seed)
        ts = rng.uniform(0, t_max, size=(samples, 2))
        worst = 0.0
        for t, s in ts:
            if t == s:
                continue
            d = np.linalg.norm(self(t) - self(s))
            worst = max(worst, d / (self.holder_constant * abs(t - s) ** self.holder_exponent))
        return worst

    def to_json(self) -> dict:
        return {"type": self.kind, **self.params}


def sqrt_drift(velocity, origin=(0.0, 0.0, 0.0)) -> TrajectorySpec:
    v = np.asarray(velocity, dtype=float)
    x0 = np.asarray(origin, dtype=float)
    return TrajectorySpec(
        lambda t: x0 + v * math.sqrt(max(t, 0.0)),
        0.5,
        float(np.linalg.norm(v)) or 1.0,
        "sqrt_drift",
        {"velocity": v.tolist(), "origin": x0.tolist()},
    )


def linear_drift(velocity, origin=(0.0, 0.0, 0.0)) -> TrajectorySpec:
    v = np.asarray(velocity, dtype=float)
    x0 = np.asarray(origin, dtype=float)
    return TrajectorySpec(
        lambda t: x0 + v * t,
        1.0,
        float(np.linalg.norm(v)) or 1.0,
        "linear",
        {"velocity": v.tolist(), "origin": x0.tolist()},
    )


def table_trajectory(times: Sequence[float], points: Sequence[Sequence[float]]) -> TrajectorySpec:
    ts = np.asarray(times, dtype=float)
    pts = np.asarray(points, dtype=float)
    if ts.ndim != 1 or pts.shape != (len(ts), 3) or np.any(np.diff(ts) <= 0):
        raise ValueError("table trajectory needs increasing times and one 3-vector per time")
    slopes = np.linalg.norm(np.diff(pts, axis=0), axis=1) / np.diff(ts)

    def gamma(t):
        return np.array([np.interp(t, ts, pts[:, i]) for i in range(3)])

    return TrajectorySpec(
        gamma, 1.0, float(slopes.max()) if slopes.size else 1.0, "table",
        {"times": ts.tolist(), "points": pts.tolist()},
    )


# --------------------------------------------------------------------------
# force kinds


class ForceSpec:
    kind: str = "abstract"
    time_dependent: bool = False
    #: f_hat ~ t**leading_power as t -> 0 (None: regular at t = 0)
    leading_power: float | None = None

    def symbol(self, grid: GridSpec, t: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def symbol_at(self, xi, t: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def _check_time(self, t: float):
        if self.time_dependent and t < 0:
            raise ForceError("time must be nonnegative")

    def substeps(self, a: float, b: float, xi_max: float) -> int:
        """Sub-intervals needed to resolve the symbol's time variation on [a, b]."""
        return 1

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass
class ZeroForce(ForceSpec):
    kind = "zero"

    def symbol(self, grid, t=0.0):
        return np.zeros((3, *grid.shape), dtype=complex)

    def symbol_at(self, xi, t=0.0):
        return np.zeros(3, dtype=complex)

    def to_json(self):
        return {"kind": "zero"}


@dataclass
class DiracAtOrigin(ForceSpec):
    beta: np.ndarray
    kind = "dirac"

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)

    def symbol(self, grid, t=0.0):
        out = np.empty((3, *grid.shape), dtype=complex)
        out[:] = (self.beta * FT_NORM)[:, None, None, None]
        return out

    def symbol_at(self, xi, t=0.0):
        return (self.beta * FT_NORM).astype(complex)

    def to_json(self):
        return {"kind": "dirac", "beta": self.beta.tolist()}


@dataclass
class MovingDirac(ForceSpec):
    beta: np.ndarray
    trajectory: TrajectorySpec
    kind = "moving_dirac"
    time_dependent = True

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)

    def symbol(self, grid, t=0.0):
        self._check_time(t)
        g = self.trajectory(t)
        # separable phase exp(-i xi . gamma)
        k = grid.dxi * np.fft.fftfreq(grid.n, 1.0 / grid.n)
        p = [np.exp(-1j * k * g[i]) for i in range(3)]
        phase = p[0][:, None, None] * p[1][None, :, None] * p[2][None, None, :]
        return (self.beta * FT_NORM)[:, None, None, None] * phase[None]

    def symbol_at(self, xi, t=0.0):
        self._check_time(t)
        phase = np.exp(-1j * np.dot(np.asarray(xi, dtype=float), self.trajectory(t)))
        return self.beta * FT_NORM * phase

    def substeps(self, a, b, xi_max):
        # keep the phase change per sub-interval below 1/2 radian
        ts = np.linspace(a, b, 9)
        pts = np.array([self.trajectory(t) for t in ts])
        travel = float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
        return max(1, int(math.ceil(2.0 * xi_max * travel)))

    def to_json(self):
        return {"kind": "moving_dirac", "beta": self.beta.tolist(), "trajectory": self.trajectory.to_json()}


def sgn(x):
    """Sign with sgn(0) = 0."""
    return np.sign(x)


@dataclass
class LogLine(ForceSpec):
    """The distribution (4 pi c T - b delta_0) e_3 with T phi = int log|x3| d3 phi(0,0,x3)."""

    c: float
    b: float
    kind = "log_line"

    def _scalar(self, xi3):
        return 4.0 * math.pi * self.c * LOG_LINE_CONST * 1j * sgn(xi3) - self.b * FT_NORM

    def symbol(self, grid, t=0.0):
        out = np.zeros((3, *grid.shape), dtype=complex)
        out[2] = self._scalar(grid.xi[2])
        return out

    def symbol_at(self, xi, t=0.0):
        return np.array([0.0, 0.0, self._scalar(float(xi[2]))], dtype=complex)

    def to_json(self):
        return {"kind": "log_line", "c": self.c, "b": self.b}


@dataclass
class BandLimited(ForceSpec):
    """Sampled symbol on a lattice, optionally scaled by t**time_power."""

    grid: GridSpec
    samples: np.ndarray
    time_power: float = 0.0
    kind = "band_limited"

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.samples.shape != (3, *self.grid.shape):
            raise ValueError("samples must have shape (3, n, n, n)")
        if self.time_power != 0.0:
            if self.time_power <= -1:
                raise ValueError("time_power must exceed -1")
            self.time_dependent = True
            self.leading_power = self.time_power

    def _factor(self, t):
        self._check_time(t)
        if self.time_power == 0.0:
            return 1.0
        if t == 0.0:
            return 0.0 if self.time_power > 0 else math.inf
        return t**self.time_power

    def symbol(self, grid, t=0.0):
        if grid != self.grid:
            raise ForceError("band-limited force sampled on a different grid")
        return self.samples * self._factor(t)

    def symbol_at(self, xi, t=0.0):
        k = np.rint(np.asarray(xi, dtype=float) / self.grid.dxi).astype(int) % self.grid.n
        return self.samples[:, k[0], k[1], k[2]] * self._factor(t)

    def to_json(self):
        return {"kind": "band_limited", "n": self.grid.n, "box_length": self.grid.box_length,
                "time_power": self.time_power}


@dataclass
class IntegrableMoment(ForceSpec):
    """Sum of vector-weighted normalized Gaussians, g(x) = sum_j m_j N(x; c_j, s_j^2 I).

    Closed-form symbol g_hat(xi) = (2 pi)^(-3/2) sum_j m_j exp(-s_j^2 |xi|^2 / 2 - i xi.c_j),
    total mass beta = sum_j m_j.
    """

    masses: np.ndarray
    centers: np.ndarray
    widths: np.ndarray
    kind = "gaussian_mixture"

    def __post_init__(self):
        self.masses = np.atleast_2d(np.asarray(self.masses, dtype=float))
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.widths = np.atleast_1d(np.asarray(self.widths, dtype=float))
        if not (self.masses.shape == self.centers.shape == (len(self.widths), 3)):
            raise ValueError("need one mass vector, centre and width per component")
        if np.any(self.widths <= 0):
            raise ValueError("widths must be positive")

    @property
    def beta(self) -> np.ndarray:
        return self.masses.sum(axis=0)

    def _symbol_from_xi(self, xi: np.ndarray) -> np.ndarray:
        xsq = np.sum(xi**2, axis=0)
        out = np.zeros((3, *xsq.shape), dtype=complex)
        for m, c, s in zip(self.masses, self.centers, self.widths):
            phase = np.exp(-0.5 * s**2 * xsq - 1j * np.tensordot(c, xi, axes=(0, 0)))
            out += FT_NORM * m[(slice(None),) + (None,) * xsq.ndim] * phase
        return out

    def symbol(self, grid, t=0.0):
        return self._symbol_from_xi(grid.xi)

    def symbol_at(self, xi, t=0.0):
        return self._symbol_from_xi(np.asarray(xi, dtype=float).reshape(3))

    def density(self, x: np.ndarray) -> np.ndarray:
        """g(x) for points of shape (3, ...)."""
        out = np.zeros_like(x, dtype=float)
        for m, c, s in zip(self.masses, self.centers, self.widths):
            r2 = np.sum((x - c.reshape((3,) + (1,) * (x.ndim - 1))) ** 2, axis=0)
            w = (2 * math.pi * s**2) ** -1.5 * np.exp(-0.5 * r2 / s**2)
            out += m.reshape((3,) + (1,) * (x.ndim - 1)) * w
        return out

    def moment(self, order: float, points: int = 96) -> float:
        """int |x|^order |g(x)| dx by midpoint quadrature on a box covering the support."""
        if order < 0:
            raise ForceError("moment order must be nonnegative")
        reach = np.max(np.abs(self.centers) + 9.0 * self.widths[:, None])
        h = 2 * reach / points
        ax = -reach + h * (np.arange(points) + 0.5)
        total = 0.0
        for i, x1 in enumerate(ax):
            x = np.stack(np.meshgrid([x1], ax, ax, indexing="ij"))
            r = np.sqrt(np.sum(x**2, axis=0))
            gmag = np.sqrt(np.sum(self.density(x) ** 2, axis=0))
            total += float(np.sum(r**order * gmag))
        return total * h**3

    def to_json(self):
        return {"kind": "gaussian_mixture", "masses": self.masses.tolist(),
                "centers": self.centers.tolist(), "widths": self.widths.tolist()}


@dataclass
class SumForce(ForceSpec):
    parts: list
    kind = "sum"

    def __post_init__(self):
        self.time_dependent = any(p.time_dependent for p in self.parts)
        powers = [p.leading_power for p in self.parts if p.leading_power is not None]
        self.leading_power = min(powers) if powers else None

    def symbol(self, grid, t=0.0):
        return sum(p.symbol(grid, t) for p in self.parts)

    def symbol_at(self, xi, t=0.0):
        return sum(p.symbol_at(xi, t) for p in self.parts)

    def substeps(self, a, b, xi_max):
        return max(p.substeps(a, b, xi_max) for p in self.parts)

    def to_json(self):
        return {"kind": "sum", "parts": [p.to_json() for p in self.parts]}


@dataclass
class ScaledForce(ForceSpec):
    base: ForceSpec
    factor: float
    kind = "scaled"

    def __post_init__(self):
        self.time_dependent = self.base.time_dependent
        self.leading_power = self.base.leading_power

    def symbol(self, grid, t=0.0):
        return self.factor * self.base.symbol(grid, t)

    def symbol_at(self, xi, t=0.0):
        return self.factor * self.base.symbol_at(xi, t)

    def substeps(self, a, b, xi_max):
        return self.base.substeps(a, b, xi_max)

    def to_json(self):
        return {"kind": "scaled", "factor": self.factor, "base": self.base.to_json()}


def difference(f1: ForceSpec, f2: ForceSpec) -> ForceSpec:
    return SumForce([f1, ScaledForce(f2, -1.0)])


# --------------------------------------------------------------------------
# JSON descriptors


def trajectory_from_json(desc: dict) -> TrajectorySpec:
    kind = desc.get("type")
    if kind == "sqrt_drift":
        return sqrt_drift(desc["velocity"], desc.get("origin", (0, 0, 0)))
    if kind == "linear":
        return linear_drift(desc["velocity"], desc.get("origin", (0, 0, 0)))
    if kind == "table":
        return table_trajectory(desc["times"], desc["points"])
    raise ForceError(f"unknown trajectory type {kind!r}")


def force_from_json(desc: dict, grid: GridSpec | None = None) -> ForceSpec:
    kind = desc.get("kind")
    if kind == "zero":
        return ZeroForce()
    if kind == "dirac":
        return DiracAtOrigin(desc["beta"])
    if kind == "moving_dirac":
        return MovingDirac(desc["beta"], trajectory_from_json(desc["trajectory"]))
    if kind == "log_line":
        return LogLine(float(desc["c"]), float(desc["b"]))
    if kind == "gaussian_mixture":
        return IntegrableMoment(desc["masses"], desc["centers"], desc["widths"])
    if kind == "sum":
        return SumForce([force_from_json(p, grid) for p in desc["parts"]])
    if kind == "scaled":
        return ScaledForce(force_from_json(desc["base"], grid), float(desc["factor"]))
    raise ForceError(f"unknown force kind {kind!r}")


# --------------------------------------------------------------------------
# operations


def force_symbol(f: ForceSpec, xi, t: float = 0.0) -> np.ndarray:
    return f.symbol_at(xi, t)


def force_pm0_norm(f: ForceSpec, grid: GridSpec, band: NormBand | None = None, times=None) -> float:
    """sup over the band and the time nodes of |f_hat(xi, t)|."""
    band = band or default_band(grid)
    sel = band.selector(grid)
    if not f.time_dependent:
        times = [0.0]
    elif times is None:
        raise ForceError("time-dependent force needs time nodes")
    best = 0.0
    for t in times:
        mag = np.sqrt(np.sum(np.abs(f.symbol(grid, t)) ** 2, axis=0))
        best = max(best, float(mag[sel].max()))
    return best


def stein_constant(b: float) -> float:
    """C_S(b) with |xi|^(b-2) = C_S(b) * int exp(-i x.xi) |x|^(-1-b) dx."""
    alpha = 1.0 + b
    c_alpha = math.pi**1.5 * 2.0 ** (3.0 - alpha) * math.gamma((3.0 - alpha) / 2) / math.gamma(alpha / 2)
    return 1.0 / c_alpha


def kernel_difference_integral(b: float) -> float:
    """int | |w - e|^(-1-b) - |w|^(-1-b) | dw over R^3 for a unit vector e."""
    if not 1 < b < 2:
        raise ForceError("kernel difference integral needs b in (1, 2)")
    p = (1.0 + b) / 2.0

    def inner(r):
        # integral over mu = cos(theta) of |(r^2 - 2 r mu + 1)^-p - r^(-2p)|; sign flips at mu = 1/(2r).
        # With s = (1 - 2 r mu) / r^2 the integrand is r^(-2p) ((1 + s)^-p - 1) and d mu = -r^2/2 ds / r,
        # whose primitive H(s) = ((1 + s)^(1-p) - 1) / (1 - p) - s is O(s^2) and evaluated without cancellation.
        def H(mu):
            sv = (1.0 - 2.0 * r * mu) / (r * r)
            if abs(sv) < 0.5:
                lg = math.log1p(sv)
            else:
                lg = math.log((r - mu) ** 2 + (1.0 - mu * mu)) - 2.0 * math.log(r)
            return math.expm1((1.0 - p) * lg) / (1.0 - p) - sv

        if r == 1.0:
            r = math.nextafter(1.0, 0.0)  # integrable singularity; keep the primitive finite
        mu0 = min(max(1.0 / (2.0 * r), -1.0), 1.0)
        scale = r ** (-2 * p) * r / 2.0
        return scale * (abs(H(-1.0) - H(mu0)) + abs(H(mu0) - H(1.0)))

    f = lambda r: 2 * math.pi * r * r * inner(r) if r > 0 else 0.0
    total = 0.0
    for a, c in [(0, 0.5), (0.5, 1.0), (1.0, 2.0), (2.0, 10.0)]:
        total += integrate.quad(f, a, c, limit=400, epsabs=0, epsrel=1e-10)[0]
    total += integrate.quad(f, 10.0, np.inf, limit=400, epsabs=0, epsrel=1e-10)[0]
    return total


@dataclass
class MomentMajorant:
    lhs: float
    rhs: float
    moment: float
    constant: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


def moment_majorant(g: IntegrableMoment, b: float, grid: GridSpec, band: NormBand | None = None) -> MomentMajorant:
    """Band-sup of |xi|^(b-2) |g_hat - beta (2pi)^(-3/2)| (2pi)^(3/2) against C(b) * moment."""
    if not 1 < b < 2:
        raise ForceError("moment majorant needs b in (1, 2)")
    band = band or default_band(grid)
    sel = band.selector(grid)
    gap = g.symbol(grid) - (g.beta * FT_NORM)[:, None, None, None]
    mag = np.sqrt(np.sum(np.abs(gap) ** 2, axis=0)) * TWO_PI_32
    lhs = float(np.max(grid.xi_abs[sel] ** (b - 2.0) * mag[sel]))
    mom = g.moment(2.0 - b)
    if not np.isfinite(mom):
        raise ForceError("divergent moment")
    const = stein_constant(b) * kernel_difference_integral(b)
    return MomentMajorant(lhs, const * mom, mom, const)


# --------------------------------------------------------------------------
# the log-line distribution paired with test functions


@dataclass
class AxialTestFunction:
    """phi(x) = T(x1, x2) h(x3) with a Gaussian transverse factor.

    h(s) = sum_j c_j s^k_j exp(-(s - a_j)^2 / (2 sigma_j^2)),  k_j in {0, 1};
    T(x1, x2) = exp(-(x1^2 + x2^2) / (2 rho^2)), times x1 when ``odd_transverse``.
    """

    terms: list  # (coefficient, power, shift, sigma)
    rho: float = 1.0
    odd_transverse: bool = False

    def axis_profile(self, s):
        s = np.asarray(s, dtype=float)
        t0 = 0.0 if self.odd_transverse else 1.0
        return t0 * sum(c * s**k * np.exp(-((s - a) ** 2) / (2 * sg**2)) for c, k, a, sg in self.terms)

    def axis_derivative(self, s):
        s = np.asarray(s, dtype=float)
        t0 = 0.0 if self.odd_transverse else 1.0
        out = 0.0
        for c, k, a, sg in self.terms:
            e = np.exp(-((s - a) ** 2) / (2 * sg**2))
            de = -(s - a) / sg**2 * e
            out = out + c * (k * s ** max(k - 1, 0) * e + s**k * de if k else de)
        return t0 * out

    def axis_transform(self, xi):
        """Unitary 1D transform of h."""
        xi = np.asarray(xi, dtype=float)
        out = 0.0
        for c, k, a, sg in self.terms:
            g = sg * np.exp(-0.5 * sg**2 * xi**2 - 1j * a * xi)
            out = out + c * (g if k == 0 else (a - 1j * sg**2 * xi) * g)
        return out

    def transverse_transform(self, q1, q2):
        """Unitary 2D transform of T."""
        g = self.rho**2 * np.exp(-0.5 * self.rho**2 * (q1**2 + q2**2))
        if self.odd_transverse:
            return -1j * self.rho**2 * q1 * g
        return g


@dataclass
class PairingResult:
    direct: float
    fourier_side: float

    @property
    def agrees(self) -> bool:
        return abs(self.direct - self.fourier_side) <= 1e-6 * (1 + abs(self.direct))


def _quad(f, a, b, **kw):
    val, err = integrate.quad(f, a, b, limit=kw.pop("limit", 500), epsabs=kw.pop("epsabs", 1e-13),
                              epsrel=kw.pop("epsrel", 1e-12), **kw)
    return val, err


def pv_log_pairing(phi: AxialTestFunction, reach: float = 60.0) -> PairingResult:
    """<T, phi> computed directly and through the symbol 2^(-3/2) pi^(-1/2) i sgn(xi3)."""
    # direct: int log|s| d/ds phi(0,0,s) ds, split at the log singularity
    f = lambda s: math.log(abs(s)) * float(phi.axis_derivative(s)) if s != 0 else 0.0
    pts = sorted({0.0, *[a for _, _, a, _ in phi.terms]})
    edges = [-reach] + [p for p in pts if -reach < p < reach] + [reach]
    direct = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, err = _quad(f, a, b)
        if not np.isfinite(val) or err > 1e-8 * (1 + abs(val)):
            raise ForceError("direct quadrature did not converge")
        direct += val

    # Fourier side: int T_hat(xi) phi_hat(-xi) dxi, phi_hat = T_perp_hat * h_hat
    perp_re, _ = integrate.dblquad(
        lambda q2, q1: float(np.real(phi.transverse_transform(-q1, -q2))),
        -np.inf, np.inf, -np.inf, np.inf, epsabs=1e-12, epsrel=1e-12,
    ) if not phi.odd_transverse else (0.0, 0.0)
    # i sgn(xi3) h_hat(-xi3) integrated over R = i int_0^inf (h_hat(-x) - h_hat(x)) dx
    g = lambda x: float(np.imag(1j * (phi.axis_transform(-x) - phi.axis_transform(x))))
    g_re = lambda x: float(np.real(1j * (phi.axis_transform(-x) - phi.axis_transform(x))))
    s_re, e1 = _quad(g_re, 0.0, np.inf)
    s_im, e2 = _quad(g, 0.0, np.inf)
    if e1 > 1e-8 * (1 + abs(s_re)) or e2 > 1e-8 * (1 + abs(s_im)):
        raise ForceError("Fourier-side quadrature did not converge")
    fourier_side = LOG_LINE_CONST * perp_re * s_re
    return PairingResult(direct, fourier_side)
