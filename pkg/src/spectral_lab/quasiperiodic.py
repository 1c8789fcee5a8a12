"""Almost Mathieu potentials, Diophantine checks and decaying perturbations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels
from .lattice import DecayEnvelope, QuasiPeriodic, Sampled, potential_values

__all__ = [
    "GOLDEN_MEAN",
    "almost_mathieu_potential",
    "almost_mathieu_spec",
    "DiophantineParams",
    "DiophantineReport",
    "diophantine_check",
    "splitmix64",
    "exp_decay_perturbation",
    "periodic_approximant",
    "approximant_band_energies",
]

GOLDEN_MEAN = (math.sqrt(5.0) - 1.0) / 2.0

_MASK = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def almost_mathieu_potential(lam: float, alpha: float, theta: float, n):
    """``lam * 2 cos(2 pi (theta + n alpha))``; vectorized over `n`."""
    n_arr = np.asarray(n, dtype=float)
    out = lam * 2.0 * np.cos(2.0 * np.pi * (theta + n_arr * alpha))
    return float(out) if out.ndim == 0 else out


def almost_mathieu_spec(lam: float, alpha: float = GOLDEN_MEAN, theta: float = 0.0) -> QuasiPeriodic:
    return QuasiPeriodic(lam=lam, alpha=alpha, theta=theta, cos_coeffs=(0.0, 2.0))


@dataclass(frozen=True)
class DiophantineParams:
    """Condition ``|n alpha - j| > eta / |n|^tau_dc`` for all ``n != 0`` and ``j``."""

    eta: float
    tau_dc: float
    alpha: float

    def __post_init__(self):
        if not self.eta > 0 or not self.tau_dc > 0:
            raise ValueError("eta and tau_dc must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class DiophantineReport:
    """Outcome of a finite check; ``holds`` only speaks for ``1 <= n <= n_max``.

    ``worst`` is ``(n, j, gap)`` at the ``n`` minimizing ``gap * n^tau_dc``.
    """

    holds: bool
    worst: tuple
    margin: float
    n_max: int


def diophantine_check(params: DiophantineParams, n_max: int = 100_000) -> DiophantineReport:
    """Brute-force the Diophantine inequality over ``1 <= n <= n_max``."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    n = np.arange(1, n_max + 1, dtype=np.int64)
    na = n.astype(float) * params.alpha
    j = np.rint(na)
    gap = np.abs(na - j)
    scaled = gap * n.astype(float) ** params.tau_dc
    k = int(np.argmin(scaled))
    holds = bool(np.all(scaled > params.eta))
    return DiophantineReport(holds, (int(n[k]), int(j[k]), float(gap[k])), float(scaled[k]), int(n_max))


def splitmix64(seed: int, counter: int) -> int:
    """Counter-based 64-bit mix.

    ``z = seed + (counter + 1) * 0x9E3779B97F4A7C15 (mod 2^64)``, then
    ``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
    z *= 0x94D049BB133111EB; z ^= z >> 31``.
    """
    z = (int(seed) + (int(counter) + 1) * _GOLDEN_GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def exp_decay_perturbation(gamma: float, a: float, tau: float, lam: float, vnorm: float,
                           seed: int, n_range: int, fraction: float = 1.0,
                           relaxed: bool = False) -> Sampled:
    """Random-sign sequence on ``[-n_range, n_range]`` saturating the envelope.

    ``b(n) = sign_n * fraction * gamma * (a + 2 |lam| vnorm)^{-tau |n|}`` where
    ``sign_n`` is ``+1`` when the top bit of ``splitmix64(seed, n + n_range)``
    is clear and ``-1`` otherwise.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    if n_range < 0:
        raise ValueError("n_range must be nonnegative")
    env = DecayEnvelope(gamma=gamma, a=a, tau=tau, vnorm=abs(lam) * vnorm, relaxed=relaxed)
    sites = np.arange(-n_range, n_range + 1)
    bound = env.bound(sites)
    signs = np.array([-1.0 if splitmix64(seed, i) >> 63 else 1.0 for i in range(sites.size)])
    vals = signs * (fraction * bound)
    if np.any(np.abs(vals) > bound):
        raise AssertionError("generated perturbation exceeds its envelope")
    return Sampled(vals, offset=-n_range)


def periodic_approximant(alpha: float, q_max: int) -> Fraction:
    """Best rational approximation ``p/q`` with ``q <= q_max``."""
    return Fraction(alpha).limit_denominator(q_max)


def approximant_band_energies(lam: float, alpha: float, theta: float, count: int,
                              q_max: int = 400, e_grid: int = 40_000, margin: float = 1.0):
    """Energies inside the bands of a periodic approximant of the almost Mathieu operator.

    The frequency is replaced by its best approximation ``p/q``; an energy
    is kept when the monodromy trace satisfies ``|tr| < 2 * margin``.
    `count` of them are picked evenly (by index) from a uniform scan.
    """
    pq = periodic_approximant(alpha, q_max)
    q = pq.denominator
    spec = almost_mathieu_spec(lam, float(pq), theta)
    vals = potential_values(spec, np.arange(1, q + 1))
    half = 2.0 + 2.0 * abs(lam)
    xs = np.linspace(-half, half, e_grid)
    m = kernels.transfer_final(xs, vals, False)
    tr = m[:, 0] + m[:, 3]
    inside = xs[np.abs(tr) < 2.0 * margin]
    if inside.size < count:
        raise ValueError("not enough band energies on the scan grid")
    idx = np.round(np.linspace(0, inside.size - 1, count)).astype(int)
    return inside[idx]
