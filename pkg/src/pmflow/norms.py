"""Pseudomeasure, space-time, and Lebesgue norms of lattice fields."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .grid import FourierVectorField, GridSpec, PhysicalVectorField, _check_same, to_physical


class NormError(ValueError):
    pass


@dataclass(frozen=True)
class NormBand:
    """Annulus xi_min <= |xi| <= xi_max in wavevector space."""

    xi_min: float
    xi_max: float

    def __post_init__(self):
        if self.xi_min < 0 or not self.xi_max > self.xi_min:
            raise NormError("band needs 0 <= xi_min < xi_max")

    def check(self, grid: GridSpec):
        limit = grid.dxi * grid.n / 2 * grid.dealias_fraction
        if self.xi_max > limit * (1 + 1e-12):
            raise NormError(f"band edge {self.xi_max:.4g} beyond retained radius {limit:.4g}")

    def selector(self, grid: GridSpec) -> np.ndarray:
        self.check(grid)
        r = grid.xi_abs
        sel = (r >= self.xi_min) & (r <= self.xi_max) & (r > 0) & grid.dealias_mask
        if not sel.any():
            raise NormError("empty band")
        return sel

    def scaled(self, factor: float) -> NormBand:
        return NormBand(self.xi_min * factor, self.xi_max * factor)


def default_band(grid: GridSpec) -> NormBand:
    """[2 dxi, 0.9 * retained radius]."""
    return NormBand(2.0 * grid.dxi, 0.9 * grid.dxi * grid.n / 2 * grid.dealias_fraction)


def full_band(grid: GridSpec) -> NormBand:
    """Every nonzero retained mode inside the retained ball."""
    return NormBand(0.0, grid.dxi * grid.n / 2 * grid.dealias_fraction)


def pm_norm(field: FourierVectorField, a: float, band: NormBand | None = None) -> float:
    """max over band modes of |xi|^a |u_hat(xi)|."""
    return pm_norm_array(field.grid, field.amplitudes, a, band)


def pm_norm_array(grid: GridSpec, amplitudes: np.ndarray, a: float, band: NormBand | None = None) -> float:
    band = band or default_band(grid)
    sel = band.selector(grid)
    mag = np.sqrt(np.sum(np.abs(amplitudes[:, sel]) ** 2, axis=0))
    return float(np.max(grid.xi_abs[sel] ** a * mag))


# --------------------------------------------------------------------------
# space-time fields


@dataclass
class SpaceTimeField:
    """Spectral snapshots at increasing positive times.

    ``values`` has shape (M, 3, n, n, n).  ``initial`` optionally holds the
    tau = 0 limit of the field; ``leading_power`` declares u - initial ~ t**p
    near 0, used by the Duhamel quadrature on the first segment.
    """

    grid: GridSpec
    times: np.ndarray
    values: np.ndarray
    initial: np.ndarray | None = None
    leading_power: float | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or len(self.times) == 0:
            raise NormError("need at least one time")
        if np.any(self.times <= 0) or np.any(np.diff(self.times) <= 0):
            raise NormError("times must be positive and strictly increasing")
        if self.values.shape != (len(self.times), 3, *self.grid.shape):
            raise NormError("values must have shape (M, 3, n, n, n)")

    @classmethod
    def from_snapshots(cls, times: Sequence[float], snapshots: Sequence[FourierVectorField], **kw) -> SpaceTimeField:
        if not snapshots:
            raise NormError("need at least one snapshot")
        grid = snapshots[0].grid
        for s in snapshots:
            _check_same(grid, s.grid)
        return cls(grid, np.asarray(times, dtype=float), np.stack([s.amplitudes for s in snapshots]), **kw)

    @classmethod
    def empty(cls, grid: GridSpec, times) -> SpaceTimeField:
        times = np.asarray(times, dtype=float)
        return cls(grid, times, np.zeros((len(times), 3, *grid.shape), dtype=complex))

    def __len__(self) -> int:
        return len(self.times)

    def snapshot(self, i: int) -> FourierVectorField:
        return FourierVectorField(self.grid, self.values[i])

    def __iter__(self) -> Iterator[FourierVectorField]:
        for i in range(len(self)):
            yield self.snapshot(i)

    def index_of(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-12 * max(1.0, t):
            raise NormError(f"t = {t} is not a node")
        return i


def xa_norm(f: SpaceTimeField, a: float, band: NormBand | None = None) -> float:
    """max over snapshots of pm_norm."""
    return max(pm_norm_array(f.grid, v, a, band) for v in f.values)


# --------------------------------------------------------------------------
# physical-space norms


@dataclass(frozen=True)
class Annulus:
    """r_min <= |x - center| <= r_max with minimum-image distances."""

    r_min: float
    r_max: float
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.r_min < 0 or not self.r_max > self.r_min:
            raise NormError("annulus needs 0 <= r_min < r_max")

    def mask(self, grid: GridSpec) -> np.ndarray:
        if self.r_max > grid.box_length / 2 * (1 + 1e-12):
            raise NormError("region reaches outside the box")
        r = np.sqrt(np.sum(grid.displacement(self.center) ** 2, axis=0))
        return (r >= self.r_min) & (r <= self.r_max)

    def volume(self) -> float:
        return 4.0 / 3.0 * np.pi * (self.r_max**3 - self.r_min**3)


def _region_mask(grid: GridSpec, region: Annulus | None) -> np.ndarray:
    if region is None:
        return np.ones(grid.shape, dtype=bool)
    return region.mask(grid)


def _physical(field) -> PhysicalVectorField:
    return to_physical(field) if isinstance(field, FourierVectorField) else field


def lq_norm(field, q: float, region: Annulus | None = None) -> float:
    """(sum |u|^q dx^3)^(1/q) over lattice points in the region (whole box if None)."""
    if not 1 <= q < np.inf:
        raise NormError("q must lie in [1, inf)")
    f = _physical(field)
    sel = _region_mask(f.grid, region)
    mag = f.magnitude()[sel]
    return float(np.sum(mag**q) * f.grid.dx**3) ** (1.0 / q)


def weak_lq_norm(field, q: float, region: Annulus | None = None) -> float:
    """sup over lambda of lambda |{|u| > lambda}|^(1/q) on the lattice."""
    if not 1 < q < np.inf:
        raise NormError("q must lie in (1, inf)")
    f = _physical(field)
    sel = _region_mask(f.grid, region)
    mag = np.sort(f.magnitude()[sel])[::-1]
    if mag.size == 0 or mag[0] == 0:
        return 0.0
    counts = np.arange(1, mag.size + 1) * f.grid.dx**3
    return float(np.max(mag * counts ** (1.0 / q)))


def interpolation_exponent(b: float, q: float) -> float:
    """theta with ||w||_q <~ ||w||_PM2^(1-theta) ||w||_PMb^theta; rejects inadmissible pairs."""
    low = 0 <= b < 2 and 3 / (3 - b) < q < 3 and q >= 2
    high = 2 < b < 3 and 3 < q < 3 / (3 - b)
    if not (low or high):
        raise NormError(f"(b, q) = ({b}, {q}) outside the admissible interpolation ranges")
    return (q - 3) / (q * (b - 2))


def interpolation_gap(field: FourierVectorField, b: float, q: float, band: NormBand | None = None,
                      region: Annulus | None = None) -> float:
    """||w||_q / (||w||_PM2^(1-theta) ||w||_PMb^theta)."""
    theta = interpolation_exponent(b, q)
    p2 = pm_norm(field, 2.0, band)
    pb = pm_norm(field, b, band)
    if p2 == 0 or pb == 0:
        raise NormError("zero pseudomeasure norm")
    return lq_norm(field, q, region) / (p2 ** (1 - theta) * pb**theta)
