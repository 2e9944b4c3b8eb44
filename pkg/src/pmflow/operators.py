"""Fourier-multiplier operators of the mild Navier-Stokes formulation.

All time integrals of the form int_0^t exp(-(t - tau)|xi|^2) N(xi, tau) dtau
share one exponential-integrator recursion over the node sequence.  Weights
depend on the mode only through the integer |k|^2, so they are tabulated per
distinct |k|^2 and gathered onto the lattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np
import scipy.fft
from scipy import integrate

from . import _threads
from .expweights import interpolation_weights, linear_weights, lobatto_nodes, moments, power_moment
from .forces import ForceSpec
from .grid import FourierVectorField, GridSpec, _check_same, _forward_scale, _inverse_scale
from .norms import SpaceTimeField


class OperatorError(ValueError):
    pass


# --------------------------------------------------------------------------
# time grids


@dataclass(frozen=True)
class TimeGrid:
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or len(nodes) < 2:
            raise OperatorError("time grid needs at least two nodes")
        if np.any(nodes <= 0) or np.any(np.diff(nodes) <= 0):
            raise OperatorError("time nodes must be positive and strictly increasing")
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def geometric(cls, t_min: float = 1e-2, t_max: float = 1e2, ratio: float = 2.0**0.25) -> TimeGrid:
        if not (t_min > 0 and t_max > t_min and ratio > 1):
            raise OperatorError("geometric grid needs 0 < t_min < t_max and ratio > 1")
        m = int(math.ceil(math.log(t_max / t_min) / math.log(ratio) - 1e-9))
        return cls(t_min * ratio ** np.arange(m + 1))

    def __len__(self) -> int:
        return len(self.nodes)

    def index_of(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.nodes - t)))
        if abs(self.nodes[i] - t) > 1e-12 * max(1.0, t):
            raise OperatorError(f"t = {t} is not a node")
        return i


# --------------------------------------------------------------------------
# pointwise symbols


def leray_apply(grid: GridSpec, amp: np.ndarray) -> np.ndarray:
    """(delta_jk - xi_j xi_k / |xi|^2) amp_k; the zero mode maps to 0."""
    xi = grid.xi
    dot = np.einsum("i...,i...->...", xi, amp) * grid.inv_xi_sq
    out = amp - xi * dot
    out[:, 0, 0, 0] = 0.0
    return out


def leray_project(u: FourierVectorField) -> FourierVectorField:
    return FourierVectorField(u.grid, leray_apply(u.grid, u.amplitudes), solenoidal=True)


def heat_propagate(u0: FourierVectorField, t: float) -> FourierVectorField:
    if t < 0:
        raise OperatorError("heat semigroup needs t >= 0")
    return FourierVectorField(u0.grid, u0.amplitudes * np.exp(-t * u0.grid.xi_sq), u0.solenoidal)


def heat_bound_constant(delta: float) -> float:
    """sup_s s^delta exp(-s^2)."""
    if delta == 0:
        return 1.0
    return (delta / 2) ** (delta / 2) * math.exp(-delta / 2)


def _hermitian_fill(half: np.ndarray, n: int) -> np.ndarray:
    full = np.empty(half.shape[:-1] + (n,), dtype=complex)
    full[..., : n // 2 + 1] = half
    neg = (-np.arange(n)) % n
    mirrored = np.conj(half.take(neg, axis=-3).take(neg, axis=-2))
    full[..., n // 2 + 1 :] = mirrored[..., n // 2 - 1 : 0 : -1]
    return full


def product_divergence(grid: GridSpec, u: np.ndarray, v: np.ndarray | None = None, real: bool = True) -> np.ndarray:
    """sum_l i xi_l (transform of u_l v_k), dealiased; v defaults to u.

    The real path assumes Hermitian inputs and uses half-spectrum transforms.
    """
    mask = grid.dealias_mask
    w = _threads.workers()
    axes = (-3, -2, -1)
    same = v is None
    n = grid.n
    if real:
        half = slice(0, n // 2 + 1)
        up = _inverse_scale(grid) * scipy.fft.irfftn((u * mask)[..., half], s=grid.shape, axes=axes, workers=w)
        vp = up if same else _inverse_scale(grid) * scipy.fft.irfftn((v * mask)[..., half], s=grid.shape, axes=axes, workers=w)
        xi = grid.xi[..., half]
        out = np.zeros((3, n, n, n // 2 + 1), dtype=complex)
        fs = _forward_scale(grid)
        cache = {}
        for l in range(3):
            for k in range(3):
                key = (min(l, k), max(l, k)) if same else (l, k)
                if key not in cache:
                    cache[key] = fs * scipy.fft.rfftn(up[l] * vp[k], axes=axes, workers=w)
                out[k] += 1j * xi[l] * cache[key]
        cache.clear()
        return _hermitian_fill(out, n) * mask
    up = _inverse_scale(grid) * scipy.fft.ifftn(u * mask, axes=axes, workers=w)
    vp = up if same else _inverse_scale(grid) * scipy.fft.ifftn(v * mask, axes=axes, workers=w)
    out = np.zeros((3, *grid.shape), dtype=complex)
    fs = _forward_scale(grid)
    for l in range(3):
        for k in range(3):
            out[k] += 1j * grid.xi[l] * fs * scipy.fft.fftn(up[l] * vp[k], axes=axes, workers=w)
    return out * mask


def nonlinear_symbol(u: FourierVectorField, v: FourierVectorField, real: bool = True,
                     zero_mode: np.ndarray | None = None) -> np.ndarray:
    """i xi P(xi) (u_hat * v_hat)(2 pi)^(-3/2), the integrand of the bilinear term.

    ``zero_mode`` replaces the k = 0 amplitude of both factors inside the
    lattice convolution (see `singular_zero_mode`).
    """
    _check_same(u.grid, v.grid)
    ua, va = u.amplitudes, None if v is u else v.amplitudes
    if zero_mode is not None:
        ua = ua.copy()
        ua[:, 0, 0, 0] = zero_mode
        if va is not None:
            va = va.copy()
            va[:, 0, 0, 0] = zero_mode
    return leray_apply(u.grid, product_divergence(u.grid, ua, va, real))


def stationary_bilinear(w: FourierVectorField, z: FourierVectorField, real: bool = True) -> FourierVectorField:
    """(i xi / |xi|^2) P(xi) (w_hat * z_hat)(2 pi)^(-3/2); zero mode 0."""
    out = nonlinear_symbol(w, z, real) * w.grid.inv_xi_sq
    return FourierVectorField(w.grid, out, solenoidal=True)


# Epstein zeta function of the cubic lattice at s = 1, sum' |j|^-2 continued analytically
LATTICE_ZETA = -8.913632917585


def singular_zero_mode(grid: GridSpec, a) -> np.ndarray:
    """Corrected-trapezoid weight at k = 0 for the symbol P(xi) a |xi|^-2.

    The lattice convolution is a punctured Riemann sum of a whole-space
    integral with |eta|^-2 singularities.  Assigning the zero mode the value
    -zeta (2/3) a / dxi^2 removes the leading O(dxi/|xi|) error.
    """
    return -LATTICE_ZETA * (2.0 / 3.0) * np.asarray(a, dtype=complex) / grid.dxi**2


# --------------------------------------------------------------------------
# the Duhamel recursion


class _Tabulated:
    """Per-|k|^2 tables gathered onto the lattice."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.s = grid.dxi**2 * np.arange(int(grid.k_sq.max()) + 1, dtype=float)

    def gather(self, table: np.ndarray) -> np.ndarray:
        return table[..., self.grid.k_sq]


def duhamel_series(
    grid: GridSpec,
    times: Sequence[float],
    integrand: Callable[[int], np.ndarray],
    initial: np.ndarray | None = None,
    power: float | None = None,
) -> Iterator[np.ndarray]:
    """Yield int_0^{t_m} exp(-(t_m - tau)|xi|^2) N(tau) dtau for m = 0, 1, ...

    N is interpolated linearly between nodes.  On [0, t_0] it is
    N(0) + (N(t_0) - N(0)) (tau/t_0)^p when ``initial`` holds N(0) (p = power,
    default 1), N(t_0) (tau/t_0)^p when only a power is declared, and the
    constant N(t_0) otherwise.  ``integrand(m)`` is called once per node, in
    order, so callers may overwrite node storage as the series advances.
    """
    times = np.asarray(times, dtype=float)
    tab = _Tabulated(grid)
    t0 = times[0]
    z = t0 * tab.s
    n1 = integrand(0)
    m0 = moments(z, 0)[0]
    if initial is not None:
        p = 1.0 if power is None else power
        pm = power_moment(z, p)
        acc = t0 * (tab.gather(m0) * initial + tab.gather(pm) * (n1 - initial))
    elif power is not None:
        acc = t0 * tab.gather(power_moment(z, power)) * n1
    else:
        acc = t0 * tab.gather(m0) * n1
    yield acc
    prev = n1
    for m in range(1, len(times)):
        h = times[m] - times[m - 1]
        z = h * tab.s
        w0, w1 = linear_weights(z)
        cur = integrand(m)
        acc = tab.gather(np.exp(-z)) * acc + h * (tab.gather(w0) * prev + tab.gather(w1) * cur)
        prev = cur
        yield acc


def duhamel_nonlinear(u: SpaceTimeField, v: SpaceTimeField, t: float, real: bool = True) -> FourierVectorField:
    """B(u, v)(t) at a node t of both inputs' time grids."""
    _check_same(u.grid, v.grid)
    if len(u.times) != len(v.times) or np.any(u.times != v.times):
        raise OperatorError("inputs must share a time grid")
    idx = u.index_of(t)
    grid = u.grid

    def integrand(m):
        um = u.snapshot(m)
        vm = um if v is u else v.snapshot(m)
        return nonlinear_symbol(um, vm, real)

    initial = None
    if u.initial is not None and v.initial is not None:
        u0 = FourierVectorField(grid, u.initial)
        v0 = u0 if v is u else FourierVectorField(grid, v.initial)
        initial = nonlinear_symbol(u0, v0, real)
    powers = [p for p in (u.leading_power, v.leading_power) if p is not None]
    power = min(powers) if powers else None
    series = duhamel_series(grid, u.times[: idx + 1], integrand, initial, power)
    out = None
    for out in series:
        pass
    return FourierVectorField(grid, out, solenoidal=True)


# --------------------------------------------------------------------------
# force lifts

QUAD_DEGREE = 8
GRADING_LEVELS = 40


def _lattice_xi_max(grid: GridSpec) -> float:
    return float(np.sqrt(grid.xi_sq.max()))


def _pieces(a: float, b: float, f: ForceSpec, xi_max: float) -> tuple[list, float]:
    """Sub-intervals of [a, b]; near 0 they are graded geometrically.

    Returns (pieces, head) where head > 0 marks an initial piece [0, head]
    treated with a power-law or constant model.
    """
    coarse = [(a, b)]
    head = 0.0
    if a == 0.0:
        edges = [b * 0.5**j for j in range(GRADING_LEVELS, -1, -1)]
        coarse = list(zip(edges[:-1], edges[1:]))
        head = edges[0]
    pieces = []
    for c, d in coarse:
        k = max(1, f.substeps(c, d, xi_max))
        e = np.linspace(c, d, k + 1)
        pieces.extend(zip(e[:-1], e[1:]))
    return pieces, head


def _segment_integral(f: ForceSpec, grid: GridSpec, a: float, b: float, tab: _Tabulated, xi_max: float) -> np.ndarray:
    """int_a^b exp(-(b - tau)|xi|^2) f_hat(xi, tau) dtau by composite Lobatto interpolation."""
    nodes = lobatto_nodes(QUAD_DEGREE)
    pieces, head = _pieces(a, b, f, xi_max)
    acc = np.zeros((3, *grid.shape), dtype=complex)
    if head > 0:
        z = head * tab.s
        fh = f.symbol(grid, head)
        if f.leading_power is not None:
            acc = head * tab.gather(power_moment(z, f.leading_power)) * fh
        else:
            acc = head * tab.gather(moments(z, 0)[0]) * fh
    cache_h = None
    weights = decay = None
    last = None
    for c, d in pieces:
        h = d - c
        if cache_h is None or abs(h - cache_h) > 1e-14 * h:
            z = h * tab.s
            weights = tab.gather(interpolation_weights(z, nodes))
            decay = tab.gather(np.exp(-z))
            cache_h = h
        total = np.zeros_like(acc)
        for i, u in enumerate(nodes):
            if i == 0 and last is not None and last[0] == c:
                fv = last[1]
            else:
                fv = f.symbol(grid, c + h * u)
            total += weights[i] * fv
        last = (d, fv)
        acc = decay * acc + h * total
    return acc


def force_series(f: ForceSpec, grid: GridSpec, times: Sequence[float], method: str = "auto") -> Iterator[np.ndarray]:
    """Yield F(t_m) amplitudes for every node.

    ``method``: "closed" (constant forces only), "quadrature" (the node
    recursion with linear interpolation), "composite" (high-order sub-stepping
    for time-dependent symbols), or "auto".
    """
    times = np.asarray(times, dtype=float)
    if method == "auto":
        method = "composite" if f.time_dependent else "closed"
    if method == "closed":
        if f.time_dependent:
            raise OperatorError("closed form needs a time-independent force")
        pf = leray_apply(grid, f.symbol(grid))
        for t in times:
            yield -np.expm1(-t * grid.xi_sq) * grid.inv_xi_sq * pf
        return
    if method == "quadrature":
        if f.time_dependent:
            initial = None if f.leading_power is not None else f.symbol(grid, 0.0)
            yield from (leray_apply(grid, a) for a in duhamel_series(
                grid, times, lambda m: f.symbol(grid, times[m]), initial, f.leading_power))
            return
        pf = leray_apply(grid, f.symbol(grid))
        yield from duhamel_series(grid, times, lambda m: pf)
        return
    if method != "composite":
        raise OperatorError(f"unknown method {method!r}")
    tab = _Tabulated(grid)
    xi_max = _lattice_xi_max(grid)
    acc = np.zeros((3, *grid.shape), dtype=complex)
    prev = 0.0
    for t in times:
        seg = _segment_integral(f, grid, prev, t, tab, xi_max)
        acc = tab.gather(np.exp(-(t - prev) * tab.s)) * acc + seg
        prev = t
        yield leray_apply(grid, acc)


def duhamel_force(f: ForceSpec, t: float, grid: GridSpec, timegrid: TimeGrid, method: str = "auto") -> FourierVectorField:
    """F(t) at a node of the time grid."""
    idx = timegrid.index_of(t)
    out = None
    for out in force_series(f, grid, timegrid.nodes[: idx + 1], method):
        pass
    return FourierVectorField(grid, out, solenoidal=True)


def stationary_lift(g: ForceSpec, grid: GridSpec) -> FourierVectorField:
    """P(xi) g_hat(xi) / |xi|^2; zero mode 0."""
    if g.time_dependent:
        raise OperatorError("stationary lift needs a time-independent force")
    return FourierVectorField(grid, leray_apply(grid, g.symbol(grid)) * grid.inv_xi_sq, solenoidal=True)


# --------------------------------------------------------------------------
# the Riesz-type convolution constant


def _polar_integral(s: float, b: float) -> float:
    # int_{-1}^{1} (1 + s^2 - 2 s mu)^(-b/2) dmu, integrated in log of the distance squared
    if s == 0:
        return 2.0
    lo, hi = math.log((1 - s) ** 2), math.log((1 + s) ** 2)
    val, _ = integrate.quad(lambda w: math.exp(w * (1 - b / 2)), lo, hi, epsabs=0, epsrel=1e-13, limit=200)
    return val / (2 * s)


def riesz_constant(b: float) -> float:
    """C(b) with int |eta|^-2 |xi - eta|^-b d eta = C(b) / |xi|^(b-1), for b in (1, 3).

    At |xi| = 1 in spherical coordinates (r, mu); the tail r > 1 is folded onto
    (0, 1) by r = 1/s, giving 2 pi int_0^1 (1 + s^(b-2)) J(s) ds.
    """
    if not 1 < b < 3:
        raise OperatorError("riesz_constant needs b in (1, 3)")
    edge = min(0.0, 2.0 - b)  # J(s) ~ (1 - s)^(2 - b) at s -> 1 when b > 2

    def g(s):
        if s >= 1.0:
            s = 1.0 - 1e-16
        return _polar_integral(s, b) * (1 - s) ** (-edge)

    kw = dict(epsabs=0, epsrel=1e-11, limit=400)
    near = integrate.quad(g, 0.0, 1.0, weight="alg", wvar=(0.0, edge), **kw)[0]
    far = integrate.quad(g, 0.0, 1.0, weight="alg", wvar=(b - 2.0, edge), **kw)[0]
    return 2.0 * math.pi * (near + far)
