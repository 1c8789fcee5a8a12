"""Closed forms for the free Laplacian on the half line.

These serve as oracles for the approximations elsewhere in the package.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

__all__ = [
    "free_angle",
    "free_decomposition",
    "free_vector_norm_sq",
    "free_density",
    "free_m_function",
    "free_limit_density",
]


def _check_open_band(x) -> None:
    if np.any(np.abs(np.asarray(x, dtype=float)) >= 2.0):
        raise ValueError("energy must satisfy |x| < 2")


def free_angle(x: float) -> float:
    """Return ``theta = arccos(x / 2)`` in ``(0, pi)``."""
    _check_open_band(x)
    return math.acos(x / 2.0)


def free_decomposition(x: float):
    """Diagonalize the free step matrix ``[[x, -1], [1, 0]]``.

    Returns
    -------
    P : ndarray, complex, shape (2, 2)
        Rows ``(1, 1)`` and ``(e^{-i theta}, e^{i theta})``.
    D : ndarray, complex, shape (2, 2)
        ``diag(e^{i theta}, e^{-i theta})``.
    theta : float
        The angle with ``x = 2 cos theta``.
    """
    theta = free_angle(x)
    ep = cmath.exp(1j * theta)
    em = cmath.exp(-1j * theta)
    P = np.array([[1.0, 1.0], [em, ep]], dtype=complex)
    D = np.diag([ep, em])
    return P, D, theta


def free_vector_norm_sq(theta: float, beta: float, n: int = 1) -> float:
    """Phase-independent part ``(1 + cos(theta) sin(2 beta)) / (2 sin^2 theta)``.

    The value does not depend on ``n`` because ``D`` is unitary; ``n`` is
    accepted so callers can state the time they have in mind.
    """
    if not 0.0 < theta < math.pi:
        raise ValueError("theta must lie in (0, pi)")
    if n < 1:
        raise ValueError("n must be positive")
    s = math.sin(theta)
    return (1.0 + math.cos(theta) * math.sin(2.0 * beta)) / (2.0 * s * s)


def free_density(x, beta: float):
    """Spectral density of ``delta_1`` for the free operator with condition ``beta``.

    ``rho_beta(x) = cos^2(beta) sqrt(4 - x^2) / (pi (2 + sin(2 beta) x))``.
    Accepts scalars or arrays and raises ``ValueError`` if any ``|x| >= 2``.
    """
    _check_open_band(x)
    x = np.asarray(x, dtype=float)
    c = math.cos(beta)
    out = c * c * np.sqrt(4.0 - x * x) / (math.pi * (2.0 + math.sin(2.0 * beta) * x))
    return float(out) if out.ndim == 0 else out


def free_m_function(z: complex, beta: float) -> complex:
    """Half-line m-function ``G_beta(z) = <delta_1, (H_beta - z)^{-1} delta_1>``.

    Uses the root ``zeta`` of ``zeta^2 - z zeta + 1 = 0`` with ``|zeta| < 1``
    and returns ``-cos(beta) zeta / (cos(beta) + zeta sin(beta))``.
    """
    z = complex(z)
    if not z.imag > 0:
        raise ValueError("z must lie in the upper half plane")
    r = cmath.sqrt(z * z - 4.0)
    zeta = 0.5 * (z - r)
    if abs(zeta) >= 1.0:
        zeta = 0.5 * (z + r)
    c, s = math.cos(beta), math.sin(beta)
    return -c * zeta / (c + zeta * s)


def free_limit_density(x, w1, w2, beta: float):
    """Density of the spectral measure when ``V`` vanishes beyond site ``N``.

    With ``(w1, w2) = T(x, N, 0) u_beta`` the solution is free afterwards,
    and averaging the Carmona integrand over the free rotation gives
    ``cos^2(beta) sin(theta) / (pi (w1^2 + w2^2 - x w1 w2))``.
    """
    x = np.asarray(x, dtype=float)
    _check_open_band(x)
    c = math.cos(beta)
    sin_t = 0.5 * np.sqrt(4.0 - x * x)
    return c * c * sin_t / (math.pi * (w1 * w1 + w2 * w2 - x * w1 * w2))
