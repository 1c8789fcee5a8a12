"""Potentials, one-step matrices and transfer-matrix products.

The operator is ``(Hu)(n) = u(n+1) + u(n-1) + V(n) u(n)`` and the
transfer matrix ``T(x, n, 0)`` maps ``(u(1), u(0))`` to ``(u(n+1), u(n))``
for solutions of ``Hu = xu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import kernels
from .errors import NumericFailure

__all__ = [
    "Zero",
    "Sampled",
    "QuasiPeriodic",
    "Perturbed",
    "PotentialSpec",
    "Mat2",
    "BoundaryCondition",
    "DecayEnvelope",
    "potential_value",
    "potential_values",
    "sup_norm",
    "support_end",
    "step_matrix",
    "transfer",
    "transfer_grid",
    "transfer_path",
    "spec_digest",
]


# -- potentials ------------------------------------------------------------


@dataclass(frozen=True)
class Zero:
    """The free Laplacian, ``V = 0``."""


@dataclass(frozen=True)
class Sampled:
    """Finitely many values ``values[j]`` at sites ``offset + j``, zero elsewhere."""

    values: tuple
    offset: int = 0

    def __post_init__(self):
        vals = tuple(float(v) for v in np.asarray(self.values, dtype=float).ravel())
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("sampled potential values must be finite")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "offset", int(self.offset))

    @property
    def first_site(self) -> int:
        return self.offset

    @property
    def last_site(self) -> int:
        return self.offset + len(self.values) - 1


def _sampled_values(self: Sampled, sites) -> np.ndarray:
    sites = np.asarray(sites, dtype=np.int64)
    arr = np.asarray(self.values, dtype=float)
    idx = sites - self.offset
    inside = (idx >= 0) & (idx < arr.size)
    out = np.zeros(sites.shape)
    out[inside] = arr[idx[inside]]
    return out


@dataclass(frozen=True)
class QuasiPeriodic:
    """``V(n) = lam * v(theta + n alpha)`` for a real trigonometric polynomial ``v``.

    ``v(y) = sum_k cos_coeffs[k] cos(2 pi k y) + sin_coeffs[k] sin(2 pi k y)``.
    The almost Mathieu case is ``cos_coeffs = (0, 2)``.
    """

    lam: float
    alpha: float
    theta: float = 0.0
    cos_coeffs: tuple = (0.0, 2.0)
    sin_coeffs: tuple = ()

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        object.__setattr__(self, "cos_coeffs", tuple(float(c) for c in self.cos_coeffs))
        object.__setattr__(self, "sin_coeffs", tuple(float(c) for c in self.sin_coeffs))

    @property
    def vnorm(self) -> float:
        """Upper bound for ``sup |v|`` (exact for a single harmonic)."""
        return float(sum(abs(c) for c in self.cos_coeffs) + sum(abs(s) for s in self.sin_coeffs))


@dataclass(frozen=True)
class Perturbed:
    """``V = base + kappa * b``; neither part may itself be perturbed."""

    base: "PotentialSpec"
    kappa: float
    b: "PotentialSpec"

    def __post_init__(self):
        if isinstance(self.base, Perturbed) or isinstance(self.b, Perturbed):
            raise ValueError("nested Perturbed specs are not supported")
        if not math.isfinite(self.kappa):
            raise ValueError("kappa must be finite")


PotentialSpec = Union[Zero, Sampled, QuasiPeriodic, Perturbed]


def _evaluate(spec: PotentialSpec, sites: np.ndarray) -> np.ndarray:
    if isinstance(spec, Zero):
        return np.zeros(sites.shape)
    if isinstance(spec, Sampled):
        return _sampled_values(spec, sites)
    if isinstance(spec, QuasiPeriodic):
        y = spec.theta + sites.astype(float) * spec.alpha
        v = np.zeros(sites.shape)
        for k, c in enumerate(spec.cos_coeffs):
            if c:
                v = v + c * np.cos(2.0 * np.pi * k * y)
        for k, s in enumerate(spec.sin_coeffs):
            if s:
                v = v + s * np.sin(2.0 * np.pi * k * y)
        return spec.lam * v
    if isinstance(spec, Perturbed):
        return _evaluate(spec.base, sites) + spec.kappa * _evaluate(spec.b, sites)
    raise TypeError(f"not a potential spec: {spec!r}")


def potential_value(spec: PotentialSpec, n: int) -> float:
    """Return ``V(n)``.  Sampled specs are zero outside their window."""
    return float(_evaluate(spec, np.asarray([n], dtype=np.int64))[0])


def potential_values(spec: PotentialSpec, sites) -> np.ndarray:
    """Vectorized :func:`potential_value` over an integer array of sites."""
    return _evaluate(spec, np.asarray(sites, dtype=np.int64))


def sup_norm(spec: PotentialSpec) -> float:
    """An upper bound for ``sup_n |V(n)|``."""
    if isinstance(spec, Zero):
        return 0.0
    if isinstance(spec, Sampled):
        return float(max((abs(v) for v in spec.values), default=0.0))
    if isinstance(spec, QuasiPeriodic):
        return abs(spec.lam) * spec.vnorm
    if isinstance(spec, Perturbed):
        return sup_norm(spec.base) + abs(spec.kappa) * sup_norm(spec.b)
    raise TypeError(f"not a potential spec: {spec!r}")


def support_end(spec: PotentialSpec):
    """Last site where ``V`` can be nonzero, or ``None`` if unbounded.

    Returns ``0`` for the zero potential.
    """
    if isinstance(spec, Zero):
        return 0
    if isinstance(spec, Sampled):
        nz = [spec.offset + j for j, v in enumerate(spec.values) if v != 0.0]
        return max(nz) if nz else 0
    if isinstance(spec, QuasiPeriodic):
        return None
    if isinstance(spec, Perturbed):
        ends = [support_end(spec.base), 0 if spec.kappa == 0 else support_end(spec.b)]
        if any(e is None for e in ends):
            return None
        return max(ends)
    raise TypeError(f"not a potential spec: {spec!r}")


def spec_digest(spec: PotentialSpec) -> str:
    """Short stable text description used in file headers."""
    if isinstance(spec, Zero):
        return "zero"
    if isinstance(spec, Sampled):
        return f"sampled(offset={spec.offset},len={len(spec.values)},sup={sup_norm(spec)!r})"
    if isinstance(spec, QuasiPeriodic):
        return (f"quasiperiodic(lam={spec.lam!r},alpha={spec.alpha!r},theta={spec.theta!r},"
                f"cos={spec.cos_coeffs!r},sin={spec.sin_coeffs!r})")
    return f"perturbed(base={spec_digest(spec.base)},kappa={spec.kappa!r},b={spec_digest(spec.b)})"


# -- matrices and boundary conditions ----------------------------------------


@dataclass(frozen=True)
class Mat2:
    """Real 2x2 matrix ``[[m11, m12], [m21, m22]]``."""

    m11: float
    m12: float
    m21: float
    m22: float

    def __post_init__(self):
        for v in (self.m11, self.m12, self.m21, self.m22):
            if not math.isfinite(v):
                raise NumericFailure("Mat2", "non-finite matrix entry")

    @classmethod
    def from_array(cls, a) -> "Mat2":
        a = np.asarray(a, dtype=float).reshape(-1)
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    @classmethod
    def identity(cls) -> "Mat2":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def zero(cls) -> "Mat2":
        return cls(0.0, 0.0, 0.0, 0.0)

    def to_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])

    def flat(self) -> np.ndarray:
        return np.array([self.m11, self.m12, self.m21, self.m22])

    def norm(self) -> float:
        """Frobenius norm ``sqrt(tr A A*)``."""
        return math.sqrt(self.m11 * self.m11 + self.m12 * self.m12
                         + self.m21 * self.m21 + self.m22 * self.m22)

    def op_norm(self) -> float:
        """Largest singular value."""
        f2 = (self.m11 * self.m11 + self.m12 * self.m12
              + self.m21 * self.m21 + self.m22 * self.m22)
        d = self.det()
        disc = max(f2 * f2 - 4.0 * d * d, 0.0)
        return math.sqrt(0.5 * (f2 + math.sqrt(disc)))

    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21

    def inv(self) -> "Mat2":
        d = self.det()
        if d == 0.0:
            raise ZeroDivisionError("singular matrix")
        return Mat2(self.m22 / d, -self.m12 / d, -self.m21 / d, self.m11 / d)

    def T(self) -> "Mat2":
        return Mat2(self.m11, self.m21, self.m12, self.m22)

    def __matmul__(self, other):
        if isinstance(other, Mat2):
            return Mat2(self.m11 * other.m11 + self.m12 * other.m21,
                        self.m11 * other.m12 + self.m12 * other.m22,
                        self.m21 * other.m11 + self.m22 * other.m21,
                        self.m21 * other.m12 + self.m22 * other.m22)
        v = np.asarray(other, dtype=float)
        return np.array([self.m11 * v[0] + self.m12 * v[1], self.m21 * v[0] + self.m22 * v[1]])

    def __add__(self, other: "Mat2") -> "Mat2":
        return Mat2(self.m11 + other.m11, self.m12 + other.m12,
                    self.m21 + other.m21, self.m22 + other.m22)

    def __sub__(self, other: "Mat2") -> "Mat2":
        return Mat2(self.m11 - other.m11, self.m12 - other.m12,
                    self.m21 - other.m21, self.m22 - other.m22)

    def __neg__(self) -> "Mat2":
        return Mat2(-self.m11, -self.m12, -self.m21, -self.m22)

    def scale(self, s: float) -> "Mat2":
        return Mat2(s * self.m11, s * self.m12, s * self.m21, s * self.m22)

    def max_abs(self) -> float:
        return max(abs(self.m11), abs(self.m12), abs(self.m21), abs(self.m22))


@dataclass(frozen=True)
class BoundaryCondition:
    """Half-line condition ``u(0) cos(beta) + u(1) sin(beta) = 0``.

    The initial vector for ``(u(1), u(0))`` is ``u_beta = (cos beta, -sin beta)``.
    """

    beta: float

    def __post_init__(self):
        if not (-math.pi / 2 < self.beta < math.pi / 2):
            raise ValueError("beta must lie in the open interval (-pi/2, pi/2)")

    @property
    def vector(self) -> np.ndarray:
        return np.array([math.cos(self.beta), -math.sin(self.beta)])


DIRICHLET = BoundaryCondition(0.0)


@dataclass(frozen=True)
class DecayEnvelope:
    """Bound ``|b(n)| <= gamma * (a + 2 vnorm)^(-tau |n|)``.

    ``relaxed=True`` lowers the admissible range to ``a > 2``.
    """

    gamma: float
    a: float
    tau: float
    vnorm: float = 0.0
    relaxed: bool = field(default=False)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        a_min = 2.0 if self.relaxed else 3.0
        if not self.a > a_min:
            raise ValueError(f"a must exceed {a_min:g}")
        if not self.tau > 4:
            raise ValueError("tau must exceed 4")
        if not self.vnorm >= 0:
            raise ValueError("vnorm must be nonnegative")

    @property
    def base(self) -> float:
        return self.a + 2.0 * self.vnorm

    def bound(self, n) -> np.ndarray:
        n = np.abs(np.asarray(n, dtype=float))
        return self.gamma * self.base ** (-self.tau * n)

    def check(self, b: PotentialSpec, sites) -> None:
        """Raise ``ValueError`` if ``b`` exceeds the bound at any of ``sites``."""
        sites = np.asarray(sites, dtype=np.int64)
        vals = np.abs(potential_values(b, sites))
        bad = vals > self.bound(sites)
        if np.any(bad):
            n = int(sites[np.argmax(bad)])
            raise ValueError(f"perturbation violates the decay envelope at site {n}")


# -- transfer matrices --------------------------------------------------------


def step_matrix(x: float, v: float) -> Mat2:
    """One-step matrix ``[[x - v, -1], [1, 0]]``."""
    return Mat2(x - v, -1.0, 1.0, 0.0)


def _site_values(spec: PotentialSpec, n: int) -> tuple[np.ndarray, bool]:
    if n >= 0:
        return potential_values(spec, np.arange(1, n + 1)), False
    # T(x, n, 0) = A_{n+1}^{-1} ... A_0^{-1}; the fold starts at site 0.
    return potential_values(spec, np.arange(0, n, -1)), True


def _check_finite(arr: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericFailure(what, "transfer-matrix entries overflowed")
    return arr


def transfer(x: float, spec: PotentialSpec, n: int) -> Mat2:
    """Transfer matrix ``T(x, n, 0)`` for any integer ``n``.

    Evaluated as a strict left fold over sites, so repeated calls are
    bit-identical.

    Raises
    ------
    NumericFailure
        If an entry overflows.
    """
    vals, inverse = _site_values(spec, int(n))
    out = kernels.transfer_final(np.array([float(x)]), vals, inverse)
    return Mat2.from_array(_check_finite(out, "transfer")[0])


def transfer_grid(xs, spec: PotentialSpec, n: int) -> np.ndarray:
    """``T(x, n, 0)`` for many energies as an ``(m, 4)`` array of entries."""
    vals, inverse = _site_values(spec, int(n))
    out = kernels.transfer_final(np.asarray(xs, dtype=float), vals, inverse)
    return _check_finite(out, "transfer")


def transfer_path(xs, spec: PotentialSpec, n: int) -> np.ndarray:
    """All ``T(x, k, 0)`` for ``k = 0, 1, ..., n`` (or ``0, -1, ..., n``).

    Returns an array of shape ``(len(xs), |n| + 1, 4)``.
    """
    vals, inverse = _site_values(spec, int(n))
    out = kernels.transfer_path(np.atleast_1d(np.asarray(xs, dtype=float)), vals, inverse)
    return _check_finite(out, "transfer")


def as_mats(arr: np.ndarray) -> Sequence[Mat2]:
    """Convert an ``(m, 4)`` entry array to a list of :class:`Mat2`."""
    return [Mat2.from_array(r) for r in np.asarray(arr).reshape(-1, 4)]
