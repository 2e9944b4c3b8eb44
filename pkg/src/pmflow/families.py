"""Randomized field families with closed-form transforms.

Each field is a Leray-projected sum of Gaussian wave packets, defined in the
continuum and sampled on the lattice, so the same seed gives the same field
on every grid.  That makes empirical constants comparable under refinement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import FourierVectorField, GridSpec
from .operators import leray_apply


@dataclass(frozen=True)
class Packet:
    amplitude: np.ndarray  # vector weight
    center: np.ndarray
    width: float
    wavevector: np.ndarray


def draw_packets(rng: np.random.Generator, count: int = 3, width=(0.6, 1.5), reach: float = 2.0,
                 k_max: float = 1.5) -> list[Packet]:
    out = []
    for _ in range(count):
        out.append(Packet(rng.normal(size=3), rng.uniform(-reach, reach, 3), float(rng.uniform(*width)),
                          rng.uniform(-k_max, k_max, 3)))
    return out


def packet_symbol(grid: GridSpec, packets: list[Packet]) -> np.ndarray:
    """Transform of sum_j a_j exp(-|x - c_j|^2 / (2 s_j^2)) cos(k_j . (x - c_j))."""
    xi = grid.xi
    amp = np.zeros((3, *grid.shape), dtype=complex)
    for p in packets:
        shift = np.exp(-1j * np.tensordot(p.center, xi, axes=(0, 0)))
        scal = np.zeros(grid.shape)
        for sign in (1.0, -1.0):
            d = xi - sign * p.wavevector[:, None, None, None]
            scal += 0.5 * np.exp(-0.5 * p.width**2 * np.sum(d**2, axis=0))
        scal *= p.width**3  # unitary transform of exp(-|x|^2 / (2 s^2)) is s^3 exp(-s^2 |xi|^2 / 2)
        amp += p.amplitude[:, None, None, None] * (scal * shift)[None]
    return amp


def random_field(grid: GridSpec, seed: int, count: int = 3, **kw) -> FourierVectorField:
    """Divergence-free, dealiased packet field; identical in the continuum for a given seed."""
    rng = np.random.default_rng(seed)
    amp = leray_apply(grid, packet_symbol(grid, draw_packets(rng, count, **kw))) * grid.dealias_mask
    return FourierVectorField(grid, amp, solenoidal=True)


def random_family(grid: GridSpec, seed: int, size: int = 50, **kw) -> list[FourierVectorField]:
    seeds = np.random.SeedSequence(seed).generate_state(size)
    return [random_field(grid, int(s), **kw) for s in seeds]
