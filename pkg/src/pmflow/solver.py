"""Quadratic fixed-point engine and the Cauchy and stationary solves."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .forces import ForceSpec, ZeroForce
from .grid import FourierVectorField, GridSpec, _check_same
from .norms import NormBand, SpaceTimeField, full_band, pm_norm_array
from .operators import (
    TimeGrid,
    duhamel_series,
    force_series,
    leray_apply,
    nonlinear_symbol,
    stationary_bilinear,
    stationary_lift,
)


class ContractionError(RuntimeError):
    def __init__(self, message: str, certificate: "ContractionCertificate | None" = None):
        super().__init__(message)
        self.certificate = certificate


@dataclass
class ContractionCertificate:
    eta: float
    y_norm: float
    lam: float = 0.0
    iteration_residuals: list = field(default_factory=list)
    a_posteriori_residual: float | None = None
    converged: bool = False

    @property
    def smallness_ok(self) -> bool:
        return 4.0 * self.eta * self.y_norm < (1.0 - self.lam) ** 2

    @property
    def ratio_bound(self) -> float:
        return 4.0 * self.eta * self.y_norm / (1.0 - self.lam) ** 2

    @property
    def uniqueness_radius(self) -> float:
        return math.inf if self.eta == 0 else (1.0 - self.lam) / (2.0 * self.eta)

    @property
    def solution_bound(self) -> float:
        return 2.0 * self.y_norm / (1.0 - self.lam)

    @property
    def contraction_ratio(self) -> float:
        """Largest ratio of consecutive positive iteration residuals."""
        r = [x for x in self.iteration_residuals if x > 0]
        if len(r) < 2:
            return 0.0
        return float(max(b / a for a, b in zip(r[:-1], r[1:])))

    def to_json(self) -> dict:
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        out.update(
            smallness_ok=self.smallness_ok,
            ratio_bound=self.ratio_bound,
            contraction_ratio=self.contraction_ratio,
            uniqueness_radius=self.uniqueness_radius,
            solution_bound=self.solution_bound,
        )
        return out


def picard_fixed_point(
    y,
    apply_linear: Callable | None,
    apply_bilinear: Callable,
    norm: Callable,
    tol: float = 1e-10,
    max_iter: int = 100,
    eta: float | None = None,
    lam: float = 0.0,
):
    """Iterate x <- y + L(x) + B(x, x) from x = y.

    ``eta`` defaults to the largest ||B(x, x)|| / ||x||^2 seen along the
    iterates.  Returns (x, certificate); raises ContractionError on three
    consecutive residual increases or when max_iter is exhausted.
    """
    y_norm = float(norm(y))
    if not math.isfinite(y_norm):
        raise ContractionError("norm(y) is not finite")
    cert = ContractionCertificate(eta=eta or 0.0, y_norm=y_norm, lam=lam)
    x = y
    rises = 0
    for _ in range(max_iter):
        bx = apply_bilinear(x, x)
        xn = norm(x)
        if eta is None and xn > 0:
            cert.eta = max(cert.eta, float(norm(bx)) / xn**2)
        nxt = y + bx
        if apply_linear is not None:
            nxt = nxt + apply_linear(x)
        res = float(norm(nxt - x))
        if cert.iteration_residuals and res > cert.iteration_residuals[-1]:
            rises += 1
        else:
            rises = 0
        cert.iteration_residuals.append(res)
        x = nxt
        if res <= tol:
            cert.converged = True
            return x, cert
        if rises >= 3 or not math.isfinite(res):
            raise ContractionError("Picard iteration diverges", cert)
    raise ContractionError("max_iter exceeded", cert)


# --------------------------------------------------------------------------
# the Cauchy problem


@dataclass
class CauchySolution:
    field: SpaceTimeField
    datum: FourierVectorField
    force: ForceSpec
    certificate: ContractionCertificate
    linear: np.ndarray  # S(t) u0 + F(t) at every node

    def bilinear_part(self, i: int) -> np.ndarray:
        """u(t_i) - S(t_i) u0 - F(t_i) = -B(u, u)(t_i)."""
        return self.field.values[i] - self.linear[i]


def _solve_norm(grid: GridSpec, band: NormBand | None):
    band = band or full_band(grid)

    def norm(amp):
        return pm_norm_array(grid, amp, 2.0, band)

    return norm


def homogeneous_probe(grid: GridSpec, band: NormBand | None = None) -> float:
    """||B_E(h, h)||_PM2 / ||h||_PM2^2 for h = P e_1 |xi|^-2."""
    norm = _solve_norm(grid, band)
    amp = np.zeros((3, *grid.shape), dtype=complex)
    amp[0] = grid.inv_xi_sq
    h = FourierVectorField(grid, leray_apply(grid, amp))
    return norm(stationary_bilinear(h, h).amplitudes) / norm(h.amplitudes) ** 2


def solve_cauchy(
    u0: FourierVectorField | None,
    f: ForceSpec | None,
    grid: GridSpec,
    timegrid: TimeGrid,
    tol: float = 1e-10,
    max_iter: int = 60,
    leading_power: float | None = None,
    band: NormBand | None = None,
    force_method: str = "auto",
    posterior: bool = True,
    zero_mode: np.ndarray | None = None,
) -> CauchySolution:
    """Fixed point of u = S(t) u0 - B(u, u) + F(t) on the time grid.

    ``leading_power`` declares N(tau) - N(0) ~ tau^p near 0 for the first
    quadrature segment (1/2 for homogeneous data).  The solve norm is the
    X^2 surrogate: max over nodes of PM^2 over all nonzero retained modes.
    """
    f = f or ZeroForce()
    if u0 is None:
        u0 = FourierVectorField.zeros(grid)
    _check_same(u0.grid, grid)
    times = timegrid.nodes
    u0p = leray_apply(grid, u0.amplitudes)
    datum = FourierVectorField(grid, u0p, solenoidal=True)

    y = np.empty((len(times), 3, *grid.shape), dtype=complex)
    for i, fa in enumerate(force_series(f, grid, times, force_method)):
        y[i] = np.exp(-times[i] * grid.xi_sq) * u0p + fa
    x = y.copy()

    norm = _solve_norm(grid, band)
    y_norm = max(norm(a) for a in y)
    cert = ContractionCertificate(eta=homogeneous_probe(grid, band), y_norm=y_norm)
    initial = nonlinear_symbol(datum, datum, zero_mode=zero_mode) if np.any(u0p) else None

    def sweep(update: bool) -> tuple[float, float, float]:
        # one Jacobi pass; returns (||x_new - x||, ||B(x, x)||, ||x||)
        res = bnorm = xnorm = 0.0
        def integrand(m):
            xm = FourierVectorField(grid, x[m])
            return nonlinear_symbol(xm, xm, zero_mode=zero_mode)

        series = duhamel_series(grid, times, integrand, initial, leading_power)
        for m, b in enumerate(series):
            new = y[m] - b
            res = max(res, norm(new - x[m]))
            bnorm = max(bnorm, norm(b))
            xnorm = max(xnorm, norm(x[m]))
            if update:
                x[m] = new
        return res, bnorm, xnorm

    rises = 0
    for _ in range(max_iter):
        res, bnorm, xnorm = sweep(update=True)
        if xnorm > 0:
            cert.eta = max(cert.eta, bnorm / xnorm**2)
        r = cert.iteration_residuals
        rises = rises + 1 if r and res > r[-1] else 0
        r.append(res)
        if res <= tol:
            cert.converged = True
            break
        if rises >= 3 or not math.isfinite(res):
            raise ContractionError("Picard iteration diverges", cert)
    else:
        raise ContractionError("max_iter exceeded", cert)

    if posterior:
        cert.a_posteriori_residual = sweep(update=False)[0]
    sol_field = SpaceTimeField(grid, times, x, initial=u0p, leading_power=leading_power)
    return CauchySolution(sol_field, datum, f, cert, y)


# --------------------------------------------------------------------------
# the stationary problem


@dataclass
class StationarySolution:
    field: FourierVectorField
    force: ForceSpec
    certificate: ContractionCertificate
    lift: FourierVectorField
    constant: float  # ||w||_PM2 / ||g||_PM0


def solve_stationary(g: ForceSpec | None, grid: GridSpec, tol: float = 1e-12, max_iter: int = 100,
                     band: NormBand | None = None) -> StationarySolution:
    """Fixed point of w = -B_E(w, w) + G."""
    g = g or ZeroForce()
    lift = stationary_lift(g, grid)
    norm = _solve_norm(grid, band)

    def bil(a, b):
        wa = FourierVectorField(grid, a)
        return -stationary_bilinear(wa, wa if a is b else FourierVectorField(grid, b)).amplitudes

    probe = homogeneous_probe(grid, band)
    w, cert = picard_fixed_point(lift.amplitudes, None, bil, norm, tol, max_iter)
    cert.eta = max(cert.eta, probe)
    cert.a_posteriori_residual = float(norm(lift.amplitudes + bil(w, w) - w))
    gsym = g.symbol(grid)
    sel = full_band(grid).selector(grid)
    g0 = float(np.sqrt(np.sum(np.abs(gsym[:, sel]) ** 2, axis=0)).max())
    wf = FourierVectorField(grid, w, solenoidal=True)
    const = norm(w) / g0 if g0 > 0 else 0.0
    return StationarySolution(wf, g, cert, lift, const)
