"""Exponential-integrator weights for int_0^1 exp(-z (1 - u)) p(u) du.

For a polynomial p interpolating data at nodes u_0..u_d in [0, 1] the
integral is sum_i w_i(z) p(u_i).  The weights come from the moments

    m_k(z) = int_0^1 exp(-z (1 - u)) u^k du

evaluated with a positive-term series for moderate z and the stable upward
recurrence m_k = (1 - k m_{k-1}) / z once z exceeds the degree.
"""

from __future__ import annotations

import numpy as np

_SERIES_LIMIT = 40.0


def _moments_series(z: np.ndarray, degree: int, power: float = 0.0) -> np.ndarray:
    # exp(-z) * sum_j z^j / j! / (j + k + power + 1)
    out = np.zeros((degree + 1, *z.shape))
    zmax = float(np.max(z)) if z.size else 0.0
    nterms = int(zmax + 12 * np.sqrt(zmax + 1) + 30)
    term = np.ones_like(z)
    for j in range(nterms):
        for k in range(degree + 1):
            out[k] += term / (j + k + power + 1.0)
        term = term * z / (j + 1)
    return out * np.exp(-z)


def _moments_recurrence(z: np.ndarray, degree: int) -> np.ndarray:
    out = np.empty((degree + 1, *z.shape))
    out[0] = -np.expm1(-z) / z
    for k in range(1, degree + 1):
        out[k] = (1.0 - k * out[k - 1]) / z
    return out


def moments(z, degree: int) -> np.ndarray:
    """m_k(z) for k = 0..degree, vectorized over z >= 0."""
    z = np.asarray(z, dtype=float)
    out = np.empty((degree + 1, *z.shape))
    small = z <= max(_SERIES_LIMIT, 2.0 * degree)
    if np.any(small):
        out[:, small] = _moments_series(z[small], degree)
    if np.any(~small):
        out[:, ~small] = _moments_recurrence(z[~small], degree)
    return out


def power_moment(z, power: float) -> np.ndarray:
    """int_0^1 exp(-z (1 - u)) u^power du for power > -1."""
    if power <= -1:
        raise ValueError("power must exceed -1")
    z = np.asarray(z, dtype=float)
    out = np.empty(z.shape)
    small = z <= 60.0
    if np.any(small):
        out[small] = _moments_series(z[small], 0, power)[0]
    if np.any(~small):
        # asymptotic: sum_k binom(power, k) (-1)^k k! / z^(k+1)
        zz = z[~small]
        acc = np.zeros_like(zz)
        coef = 1.0
        for k in range(40):
            acc += coef / zz ** (k + 1)
            coef *= -(power - k)
        out[~small] = acc
    return out


def interpolation_weights(z, nodes) -> np.ndarray:
    """Weights w_i(z), shape (len(nodes), *z.shape)."""
    nodes = np.asarray(nodes, dtype=float)
    d = len(nodes) - 1
    m = moments(z, d)
    vander = np.vander(nodes, d + 1, increasing=True)  # V[i, k] = u_i^k
    # p(u) = sum_k a_k u^k with V a = values  ->  integral = m . a = (V^-T m) . values
    coeffs = np.linalg.solve(vander.T, m.reshape(d + 1, -1))
    return coeffs.reshape(d + 1, *np.shape(z))


def linear_weights(z) -> tuple[np.ndarray, np.ndarray]:
    """Weights of the left and right endpoint values for a linear interpolant."""
    m = moments(z, 1)
    return m[0] - m[1], m[1]


def lobatto_nodes(degree: int) -> np.ndarray:
    """Chebyshev-Lobatto points on [0, 1]."""
    if degree == 0:
        return np.array([1.0])
    j = np.arange(degree + 1)
    return 0.5 * (1.0 - np.cos(np.pi * j / degree))
