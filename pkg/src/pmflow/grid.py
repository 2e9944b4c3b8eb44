"""Periodic-box sampling of whole-space Fourier transforms.

Amplitudes are samples of the continuous transform

    u_hat(xi) = (2 pi)^(-3/2) * int exp(-i x.xi) u(x) dx

on the lattice xi = dxi * k, dxi = 2 pi / L, k in [-n/2, n/2)^3, stored in
numpy FFT order.  Physical values live on x_j = j L / n.  The (2 pi)^(-3/2)
weight is applied in exactly one place (`to_fourier` / `to_physical`) so that
every constant downstream inherits the same normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

from . import _threads

FT_NORM = (2.0 * math.pi) ** -1.5


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    n: int
    box_length: float
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n % 2:
            raise ValueError("n must be even")
        if self.n < 8:
            raise ValueError("n must be >= 8")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")
        if not 0 < self.dealias_fraction <= 1:
            raise ValueError("dealias_fraction must lie in (0, 1]")

    @property
    def dxi(self) -> float:
        return 2.0 * math.pi / self.box_length

    @property
    def dx(self) -> float:
        return self.box_length / self.n

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def kmax_retained(self) -> int:
        """Largest |k_i| kept by the dealiasing mask."""
        return min(int(math.floor(self.dealias_fraction * self.n / 2 + 1e-9)), self.n // 2)

    @property
    def xi_max(self) -> float:
        """Radius of the largest ball of retained wavevectors."""
        return self.dxi * self.kmax_retained

    @cached_property
    def mode_indices(self) -> np.ndarray:
        k = np.rint(np.fft.fftfreq(self.n, 1.0 / self.n)).astype(np.int64)
        return np.stack(np.meshgrid(k, k, k, indexing="ij"))

    @cached_property
    def xi(self) -> np.ndarray:
        """Wavevectors, shape (3, n, n, n)."""
        return self.dxi * self.mode_indices.astype(float)

    @cached_property
    def k_sq(self) -> np.ndarray:
        """Integer |k|^2 per mode; |xi|^2 = dxi^2 * k_sq."""
        return np.sum(self.mode_indices**2, axis=0)

    @cached_property
    def xi_sq(self) -> np.ndarray:
        return np.sum(self.xi**2, axis=0)

    @cached_property
    def xi_abs(self) -> np.ndarray:
        return np.sqrt(self.xi_sq)

    @cached_property
    def inv_xi_sq(self) -> np.ndarray:
        """1/|xi|^2 with the zero mode set to 0."""
        out = np.zeros(self.shape)
        nz = self.xi_sq > 0
        out[nz] = 1.0 / self.xi_sq[nz]
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return np.all(np.abs(self.mode_indices) <= self.kmax_retained, axis=0)

    @cached_property
    def positions(self) -> np.ndarray:
        x = self.dx * np.arange(self.n)
        return np.stack(np.meshgrid(x, x, x, indexing="ij"))

    @property
    def center(self) -> np.ndarray:
        return np.full(3, self.box_length / 2)

    def displacement(self, center=None) -> np.ndarray:
        """Minimum-image displacement x - center for every lattice point."""
        c = self.center if center is None else np.asarray(center, dtype=float)
        d = self.positions - c[:, None, None, None]
        return d - self.box_length * np.round(d / self.box_length)

    def homogeneous_symbol(self, a: float) -> np.ndarray:
        """|xi|^(-a), zero at the zero mode."""
        out = np.zeros(self.shape)
        nz = self.xi_sq > 0
        out[nz] = self.xi_abs[nz] ** (-a)
        return out


def build_grid(n: int, box_length: float, dealias_fraction: float = 2.0 / 3.0) -> GridSpec:
    return GridSpec(n, float(box_length), float(dealias_fraction))


def wavevector_at(grid: GridSpec, k) -> np.ndarray:
    return grid.dxi * np.asarray(k, dtype=float)


def _check_same(a: GridSpec, b: GridSpec):
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


@dataclass(frozen=True, eq=False)
class FourierVectorField:
    grid: GridSpec
    amplitudes: np.ndarray
    solenoidal: bool = False

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (3, *self.grid.shape):
            raise ValueError(f"amplitudes must have shape (3, n, n, n), got {amp.shape}")
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def zeros(cls, grid: GridSpec) -> FourierVectorField:
        return cls(grid, np.zeros((3, *grid.shape), dtype=complex), solenoidal=True)

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, FourierVectorField):
            _check_same(self.grid, other.grid)
            return other.amplitudes
        return other

    def __add__(self, other):
        return FourierVectorField(self.grid, self.amplitudes + self._coerce(other))

    def __sub__(self, other):
        return FourierVectorField(self.grid, self.amplitudes - self._coerce(other))

    def __neg__(self):
        return FourierVectorField(self.grid, -self.amplitudes, self.solenoidal)

    def __mul__(self, scalar):
        return FourierVectorField(self.grid, self.amplitudes * scalar, self.solenoidal)

    __rmul__ = __mul__

    def magnitude(self) -> np.ndarray:
        """Euclidean norm of the complex 3-vector at every mode."""
        return np.sqrt(np.sum(np.abs(self.amplitudes) ** 2, axis=0))

    def divergence_defect(self, floor: float = 1e-12) -> float:
        """max |xi . u_hat| / (|xi| |u_hat|) over retained modes above the roundoff floor.

        Modes with |u_hat| <= floor * max |u_hat| carry only rounding noise
        (exact zeros of the symbol), so their direction is meaningless.
        """
        g = self.grid
        div = np.abs(np.einsum("i...,i...->...", g.xi, self.amplitudes))
        mag = self.magnitude()
        scale = g.xi_abs * mag
        sel = g.dealias_mask & (scale > 0) & (mag > floor * mag.max())
        if not sel.any():
            return 0.0
        return float(np.max(div[sel] / scale[sel]))

    def hermitian_defect(self) -> float:
        """max |u_hat(-xi) - conj(u_hat(xi))| relative to max |u_hat|."""
        flipped = np.roll(np.flip(self.amplitudes, axis=(1, 2, 3)), 1, axis=(1, 2, 3))
        scale = np.max(np.abs(self.amplitudes))
        if scale == 0:
            return 0.0
        diff = np.abs(flipped - np.conj(self.amplitudes))
        # the k = -n/2 planes have no partner on the lattice
        diff[:, self.grid.n // 2] = 0
        diff[:, :, self.grid.n // 2] = 0
        diff[:, :, :, self.grid.n // 2] = 0
        return float(np.max(diff) / scale)

    def dealiased(self) -> FourierVectorField:
        return FourierVectorField(self.grid, self.amplitudes * self.grid.dealias_mask, self.solenoidal)


@dataclass(frozen=True, eq=False)
class PhysicalVectorField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (3, *self.grid.shape):
            raise ValueError(f"values must have shape (3, n, n, n), got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("physical field contains non-finite values")
        object.__setattr__(self, "values", vals)

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.values**2, axis=0))


def fft3(a: np.ndarray) -> np.ndarray:
    return scipy.fft.fftn(a, axes=(-3, -2, -1), workers=_threads.workers())


def ifft3(a: np.ndarray) -> np.ndarray:
    return scipy.fft.ifftn(a, axes=(-3, -2, -1), workers=_threads.workers())


def _forward_scale(grid: GridSpec) -> float:
    return FT_NORM * grid.dx**3


def _inverse_scale(grid: GridSpec) -> float:
    return FT_NORM * grid.dxi**3 * grid.n**3


def to_fourier(field: PhysicalVectorField) -> FourierVectorField:
    return FourierVectorField(field.grid, _forward_scale(field.grid) * fft3(field.values))


def to_physical(field: FourierVectorField) -> PhysicalVectorField:
    """Inverse transform; the imaginary residue of non-Hermitian input is dropped."""
    vals = _inverse_scale(field.grid) * ifft3(field.amplitudes)
    return PhysicalVectorField(field.grid, vals.real)


def scalar_to_fourier(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    return _forward_scale(grid) * fft3(values)


def scalar_to_physical(grid: GridSpec, amplitudes: np.ndarray) -> np.ndarray:
    return (_inverse_scale(grid) * ifft3(amplitudes)).real


def convolve_tensor(u: FourierVectorField, v: FourierVectorField) -> np.ndarray:
    """Transform of the product u (x) v, shape (3, 3, n, n, n).

    Entry [l, k] is (2 pi)^(-3/2) (u_hat_l * v_hat_k)(xi), i.e. the transform
    of u_l v_k.  Inputs are truncated to the retained modes before the
    pseudo-spectral product; the output is masked the same way.
    """
    _check_same(u.grid, v.grid)
    g = u.grid
    mask = g.dealias_mask
    up = _inverse_scale(g) * ifft3(u.amplitudes * mask)
    vp = up if v is u else _inverse_scale(g) * ifft3(v.amplitudes * mask)
    out = np.empty((3, 3, *g.shape), dtype=complex)
    fs = _forward_scale(g)
    for l in range(3):
        for k in range(3):
            if v is u and k < l:
                out[l, k] = out[k, l]
                continue
            out[l, k] = fs * fft3(up[l] * vp[k]) * mask
    return out


def parseval_sums(field: FourierVectorField) -> tuple[float, float]:
    """(lattice sum |u_hat|^2 dxi^3, quadrature of int |u|^2 dx)."""
    g = field.grid
    spectral = float(np.sum(np.abs(field.amplitudes) ** 2) * g.dxi**3)
    vals = _inverse_scale(g) * ifft3(field.amplitudes)
    physical = float(np.sum(np.abs(vals) ** 2) * g.dx**3)
    return spectral, physical
