"""Perturbation expansions of transfer matrices and the ``P_k`` family.

The expansion compares the base operator (transfer matrix ``T``) with its
perturbation by ``kappa * b`` (transfer matrix ``T^kappa``).  With
``D_k = diag(kappa b(k), 0)`` the series terms are

    q_k = T(k)^{-1} D_k T^kappa(k-1),     Q = sum_{k>=1} q_k,

and ``T(n) - T^kappa(n) = T(n) Q + R_n`` with ``R_n = -T(n) sum_{k>n} q_k``.
The dual expansion swaps the two operators and flips the sign of ``D_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import NumericFailure, UnsupportedSpec
from .free import free_m_function
from .lattice import (
    DecayEnvelope,
    Mat2,
    Perturbed,
    PotentialSpec,
    Sampled,
    Zero,
    potential_values,
    sup_norm,
    support_end,
    transfer_path,
)
from .parallel import map_chunks

__all__ = [
    "telescope_decompose",
    "PerturbationExpansion",
    "perturbation_expansion",
    "NormSandwich",
    "norm_sandwich",
    "sandwich_sweep",
    "PkFamily",
    "pk_family",
    "pk_sweep",
    "pk_comparison",
    "pk_comparison_grid",
    "cauchy_spread",
    "psi_sup",
    "psi_closed_form",
    "mobius_rotation",
    "boundary_m_function",
    "m_plus",
    "jl_bracket",
    "last_simon_diagnostics",
]


# -- telescoping ------------------------------------------------------------


def _as_stack(mats) -> np.ndarray:
    out = []
    for m in mats:
        out.append(m.to_array() if isinstance(m, Mat2) else np.asarray(m, dtype=float).reshape(2, 2))
    return np.array(out, dtype=float).reshape(-1, 2, 2)


def telescope_decompose(F: Sequence, G: Sequence) -> Mat2:
    """Telescoping form of ``F_n ... F_0 - G_n ... G_0``.

    Returns ``sum_k (F_n ... F_{k+1}) (F_k - G_k) (G_{k-1} ... G_0)``.
    Entries may be :class:`Mat2` or anything reshapeable to 2x2.
    """
    if len(F) != len(G):
        raise ValueError("F and G must have equal lengths")
    if len(F) == 0:
        raise ValueError("need at least one factor")
    f = _as_stack(F)
    g = _as_stack(G)
    n = f.shape[0]
    # right products of G: below[k] = G_{k-1} ... G_0
    below = np.empty_like(f)
    below[0] = np.eye(2)
    for k in range(1, n):
        below[k] = g[k - 1] @ below[k - 1]
    total = np.zeros((2, 2))
    above = np.eye(2)  # F_n ... F_{k+1}
    for k in range(n - 1, -1, -1):
        total += above @ (f[k] - g[k]) @ below[k]
        above = above @ f[k]
    return Mat2.from_array(total)


# -- perturbation expansion of T ----------------------------------------------


def _adj_inv(m: np.ndarray) -> np.ndarray:
    """Row-wise inverse of ``(..., 4)`` entry arrays."""
    det = m[..., 0] * m[..., 3] - m[..., 1] * m[..., 2]
    out = np.stack([m[..., 3], -m[..., 1], -m[..., 2], m[..., 0]], axis=-1)
    return out / det[..., None]


def _mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack([
        a[..., 0] * b[..., 0] + a[..., 1] * b[..., 2],
        a[..., 0] * b[..., 1] + a[..., 1] * b[..., 3],
        a[..., 2] * b[..., 0] + a[..., 3] * b[..., 2],
        a[..., 2] * b[..., 1] + a[..., 3] * b[..., 3],
    ], axis=-1)


def _check_kappa(kappa: float, b: PotentialSpec) -> None:
    bn = sup_norm(b)
    if bn > 0 and abs(kappa) > 1.0 / bn * (1.0 + 1e-15):
        raise ValueError(f"|kappa| = {abs(kappa):g} exceeds 1/||b|| = {1.0 / bn:g}")


def _b_sites(b: PotentialSpec, n_hi: int) -> np.ndarray:
    if isinstance(b, Sampled):
        lo = min(b.first_site, 1)
        hi = max(b.last_site, n_hi)
        return np.arange(lo, hi + 1)
    return np.arange(1, n_hi + 1)


@dataclass
class PerturbationExpansion:
    """Series ``Q``, residuals ``R_n`` and their duals ``P``, ``K_n`` at one energy.

    Attributes
    ----------
    terms : int
        Number of series terms needed for the analytic tail to drop below
        the tolerance (or the support length of ``b`` if smaller).
    tail_bound : float
        Analytic bound on ``||sum_{k > terms} q_k||``.
    ratio, growth : float
        Geometric ratio ``s^2 A^{-tau}`` and step-norm bound ``s`` behind the bound.
    status : str
        ``"converged"`` or ``"unconverged"``.
    """

    x: float
    kappa: float
    envelope: DecayEnvelope
    Q: Mat2
    P: Mat2
    R: list
    K: list
    T: np.ndarray = field(repr=False)
    T_kappa: np.ndarray = field(repr=False)
    terms: int = 0
    tail_bound: float = 0.0
    ratio: float = 0.0
    growth: float = 0.0
    status: str = "converged"

    def residual_bound(self, n: int) -> float:
        """Analytic bound ``s^n |kappa| gamma r^{n+1} / (s (1 - r))`` on ``||R_n||``."""
        r, s = self.ratio, self.growth
        if r >= 1.0:
            return math.inf
        return s ** n * abs(self.kappa) * self.envelope.gamma / s * r ** (n + 1) / (1.0 - r)

    def residual_rate(self, n: int) -> float:
        """Empirical rate ``||R_n||^{1/n}``."""
        if n < 1:
            raise ValueError("n must be positive")
        return self.R[n].norm() ** (1.0 / n)

    def identity_residual(self, n: int) -> float:
        """Max entry of ``T - T^kappa - T Q - R_n``."""
        t = Mat2.from_array(self.T[n])
        tk = Mat2.from_array(self.T_kappa[n])
        return (t - tk - t @ self.Q - self.R[n]).max_abs()

    def dual_identity_residual(self, n: int) -> float:
        """Max entry of ``T^kappa - T - T^kappa P - K_n``."""
        t = Mat2.from_array(self.T[n])
        tk = Mat2.from_array(self.T_kappa[n])
        return (tk - t - tk @ self.P - self.K[n]).max_abs()

    def require_converged(self) -> "PerturbationExpansion":
        if self.status != "converged":
            raise NumericFailure("perturbation_expansion",
                                 f"series tail bound not reached (ratio {self.ratio:.3g})")
        return self


def perturbation_expansion(x: float, base: PotentialSpec, b: PotentialSpec, kappa: float,
                           envelope: DecayEnvelope, n_max: int, tol: float = 1e-12,
                           max_terms: int = 100_000) -> PerturbationExpansion:
    """Expand ``T^kappa(x, n, 0)`` around ``T(x, n, 0)`` for ``n <= n_max``.

    The series is truncated once the geometric tail bound
    ``|kappa| gamma r^{K+1} / (s (1 - r))`` drops below `tol`, where ``s``
    bounds the Frobenius norm of every step matrix and
    ``r = s^2 (a + 2||V||)^{-tau}``.  Residuals ``R_n`` are summed from the
    tail backwards, never formed by subtraction.

    Raises
    ------
    ValueError
        If ``b`` violates the envelope or ``|kappa| > 1/||b||``.
    """
    if isinstance(base, Perturbed) or isinstance(b, Perturbed):
        raise ValueError("base and b must be unperturbed specs")
    n_max = int(n_max)
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    _check_kappa(kappa, b)
    pert = Perturbed(base, kappa, b)
    vbound = max(sup_norm(base), sup_norm(pert))
    s = math.sqrt((abs(x) + vbound) ** 2 + 2.0)
    ratio = s * s * envelope.base ** (-envelope.tau)
    pref = abs(kappa) * envelope.gamma / s

    def tail(kk: int) -> float:
        return pref * ratio ** (kk + 1) / (1.0 - ratio)

    status = "converged"
    if kappa == 0.0:
        terms, bound = 0, 0.0
    elif ratio >= 1.0:
        terms, bound, status = max_terms, math.inf, "unconverged"
    else:
        # smallest K with tail(K) < tol
        terms = max(0, int(math.ceil(math.log(tol / pref * (1.0 - ratio)) / math.log(ratio))) - 1)
        while terms > 0 and tail(terms - 1) < tol:
            terms -= 1
        while tail(terms) >= tol:
            terms += 1
        bound = tail(terms)
        if terms > max_terms:
            terms, status = max_terms, "unconverged"
    end = support_end(b)
    if end is not None and end < terms:
        terms, bound = max(end, 0), 0.0

    # Extra terms so that every R_n with n <= n_max is summed to rounding.
    extra = 0
    if 0.0 < ratio < 1.0:
        extra = int(math.ceil(math.log(np.finfo(float).eps) / math.log(ratio))) + 2
    total = max(terms, n_max + extra)
    if end is not None:
        total = min(total, max(end, n_max))
    total = max(total, n_max, 1)

    envelope.check(b, _b_sites(b, total))
    t = transfer_path(x, base, total)[0]
    tk = transfer_path(x, pert, total)[0]
    kb = kappa * potential_values(b, np.arange(1, total + 1))

    d_tk = np.zeros((total, 4))  # D_k T^kappa(k-1), rows k = 1..total
    d_tk[:, 0] = kb * tk[:-1, 0]
    d_tk[:, 1] = kb * tk[:-1, 1]
    q = _mul(_adj_inv(t[1:]), d_tk)
    d_t = np.zeros((total, 4))
    d_t[:, 0] = -kb * t[:-1, 0]
    d_t[:, 1] = -kb * t[:-1, 1]
    p = _mul(_adj_inv(tk[1:]), d_t)

    # suffix[n] = sum_{k > n} q_k, accumulated from the far end
    suf_q = np.zeros((total + 1, 4))
    suf_p = np.zeros((total + 1, 4))
    for k in range(total - 1, -1, -1):
        suf_q[k] = suf_q[k + 1] + q[k]
        suf_p[k] = suf_p[k + 1] + p[k]
    Q = Mat2.from_array(suf_q[0])
    P = Mat2.from_array(suf_p[0])
    R = [Mat2.from_array(-r) for r in _mul(t[: n_max + 1], suf_q[: n_max + 1])]
    Kn = [Mat2.from_array(-r) for r in _mul(tk[: n_max + 1], suf_p[: n_max + 1])]
    return PerturbationExpansion(
        x=float(x), kappa=float(kappa), envelope=envelope, Q=Q, P=P, R=R, K=Kn,
        T=t[: n_max + 1], T_kappa=tk[: n_max + 1], terms=int(terms), tail_bound=float(bound),
        ratio=float(ratio), growth=float(s), status=status,
    )


@dataclass(frozen=True)
class NormSandwich:
    """Bracket ``||T||/gamma - r_n <= ||T^kappa|| <= gamma ||T|| + r_n``."""

    x: float
    n: int
    norm: float
    norm_kappa: float
    gamma: float
    r_n: float
    lower: float
    upper: float

    @property
    def holds(self) -> bool:
        return self.lower <= self.norm_kappa <= self.upper

    @property
    def ratio(self) -> float:
        return self.norm_kappa / self.norm


def norm_sandwich(x: float, base: PotentialSpec, b: PotentialSpec, kappa: float,
                  envelope: DecayEnvelope, n: int, gamma: float | None = None) -> NormSandwich:
    """Compare ``||T^kappa(x, n, 0)||`` with ``||T(x, n, 0)||``.

    Without `gamma`, the constant is ``max(1, ||I - Q||_2, ||I + P||_2)``,
    for which the bracket is a theorem of the expansion; ``r_n`` is
    ``max(||R_n||, ||K_n||)``.
    """
    ex = perturbation_expansion(x, base, b, kappa, envelope, n).require_converged()
    t = Mat2.from_array(ex.T[n])
    tk = Mat2.from_array(ex.T_kappa[n])
    eye = Mat2.identity()
    if gamma is None:
        gamma = max(1.0, (eye - ex.Q).op_norm(), (eye + ex.P).op_norm())
    r_n = max(ex.R[n].norm(), ex.K[n].norm())
    nt, ntk = t.norm(), tk.norm()
    return NormSandwich(x=float(x), n=int(n), norm=nt, norm_kappa=ntk, gamma=float(gamma),
                        r_n=r_n, lower=nt / gamma - r_n, upper=gamma * nt + r_n)


def sandwich_sweep(energies, base, b, kappa, envelope, n: int, threads: int = 1):
    """Sandwich at every energy plus the empirical constant.

    Returns
    -------
    list of NormSandwich, float
        Per-energy brackets with their own constants, and
        ``gamma_hat = max_x max(||T^kappa||/||T||, ||T||/||T^kappa||)``.
    """
    energies = [float(e) for e in energies]
    res = map_chunks(lambda xs: [norm_sandwich(e, base, b, kappa, envelope, n) for e in xs],
                     energies, threads)
    gamma_hat = max(max(s.ratio, 1.0 / s.ratio) for s in res)
    return res, float(gamma_hat)


# -- P_k family ---------------------------------------------------------------


@dataclass
class PkFamily:
    """Cumulative sums ``P_k = sum_{n<=k} T^T T(2n - 1)`` for ``k = 1..k_max``.

    ``entries`` has columns ``(p11, p12, p22)``.
    """

    energy: float
    entries: np.ndarray

    @property
    def k(self) -> np.ndarray:
        return np.arange(1, self.entries.shape[0] + 1)

    @property
    def det(self) -> np.ndarray:
        e = self.entries
        return e[:, 0] * e[:, 2] - e[:, 1] * e[:, 1]

    @property
    def norm(self) -> np.ndarray:
        e = self.entries
        return np.sqrt(e[:, 0] ** 2 + 2.0 * e[:, 1] ** 2 + e[:, 2] ** 2)

    @property
    def eps(self) -> np.ndarray:
        return 1.0 / np.sqrt(4.0 * self.det)

    def matrix(self, k: int) -> Mat2:
        p = self.entries[k - 1]
        return Mat2(p[0], p[1], p[1], p[2])

    def increment_min_eig(self) -> np.ndarray:
        """Smallest eigenvalue of each increment ``P_{k+1} - P_k``."""
        d = np.diff(self.entries, axis=0)
        tr = d[:, 0] + d[:, 2]
        disc = np.sqrt(0.25 * (d[:, 0] - d[:, 2]) ** 2 + d[:, 1] ** 2)
        return 0.5 * tr - disc


def pk_sweep(energies, spec: PotentialSpec, k_max: int, threads: int = 1) -> np.ndarray:
    """Raw ``(len(energies), k_max, 3)`` array of ``P_k`` entries."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    vals = potential_values(spec, np.arange(1, 2 * k_max))
    xs = np.atleast_1d(np.asarray(energies, dtype=float))
    parts = map_chunks(lambda c: [kernels.pk_cumulative(np.asarray(c), vals, k_max)],
                       list(xs), threads)
    out = np.concatenate(parts, axis=0) if parts else np.empty((0, k_max, 3))
    if not np.all(np.isfinite(out)):
        raise NumericFailure("pk_family", "P_k entries overflowed")
    return out


def pk_family(x: float, spec: PotentialSpec, k_max: int) -> PkFamily:
    """The ``P_k`` family at one energy."""
    return PkFamily(float(x), pk_sweep([x], spec, k_max)[0])


@dataclass
class PkComparison:
    """Ratios ``||P_k^kappa|| / ||P_k||`` and ``det P_k^kappa / det P_k``."""

    energy: float
    k: np.ndarray
    norm_ratio: np.ndarray
    det_ratio: np.ndarray


def _det_norm(e: np.ndarray):
    det = e[..., 0] * e[..., 2] - e[..., 1] * e[..., 1]
    norm = np.sqrt(e[..., 0] ** 2 + 2.0 * e[..., 1] ** 2 + e[..., 2] ** 2)
    return det, norm


def pk_comparison_grid(energies, base: PotentialSpec, b: PotentialSpec, kappa: float,
                       envelope: DecayEnvelope, k_max: int, threads: int = 1):
    """Vectorized :func:`pk_comparison`; returns ``(norm_ratio, det_ratio)`` arrays."""
    _check_kappa(kappa, b)
    envelope.check(b, _b_sites(b, 2 * k_max))
    p0 = pk_sweep(energies, base, k_max, threads)
    p1 = pk_sweep(energies, Perturbed(base, kappa, b), k_max, threads)
    d0, n0 = _det_norm(p0)
    d1, n1 = _det_norm(p1)
    return n1 / n0, d1 / d0


def pk_comparison(x: float, base, b, kappa, envelope, k_max: int) -> PkComparison:
    """Compare the perturbed and unperturbed ``P_k`` families at one energy."""
    nr, dr = pk_comparison_grid([x], base, b, kappa, envelope, k_max)
    return PkComparison(float(x), np.arange(1, k_max + 1), nr[0], dr[0])


def cauchy_spread(seq) -> float:
    """``(max - min) / min`` of a positive sequence."""
    seq = np.asarray(seq, dtype=float)
    return float((seq.max() - seq.min()) / seq.min())


# -- psi and the Jitomirskaya-Last bracket ------------------------------------


def mobius_rotation(phi: float, z):
    """Action of the rotation by angle ``phi`` on ``z``: ``(c z - s) / (s z + c)``."""
    c, s = math.cos(phi), math.sin(phi)
    return (c * z - s) / (s * z + c)


def psi_closed_form(z: complex) -> float:
    """``sup_phi |R_phi z|`` in closed form.

    The rotations fix ``i`` and act as hyperbolic isometries, so the sup is
    ``exp(d(z, i))`` with ``cosh d = (1 + |z|^2) / (2 Im z)``.
    """
    z = complex(z)
    if not z.imag > 0:
        raise ValueError("z must lie in the upper half plane")
    c = (1.0 + abs(z) ** 2) / (2.0 * z.imag)
    return c + math.sqrt(max(c * c - 1.0, 0.0))


def psi_sup(z: complex, grid: int = 1024, refine: int = 40) -> float:
    """Numerical ``sup`` over rotation angles of ``|R_phi z|``.

    A uniform grid over one period ``[0, pi)`` is followed by golden-section
    refinement around the best grid point.
    """
    z = complex(z)
    if not z.imag > 0:
        raise ValueError("z must lie in the upper half plane")
    phis = np.arange(grid) * (math.pi / grid)
    c, s = np.cos(phis), np.sin(phis)
    vals = np.abs((c * z - s) / (s * z + c))
    j = int(np.argmax(vals))
    h = math.pi / grid
    lo, hi = phis[j] - h, phis[j] + h

    def f(p):
        return abs(mobius_rotation(p, z))

    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = hi - g * (hi - lo), lo + g * (hi - lo)
    fa, fb = f(a), f(b)
    for _ in range(refine):
        if fa > fb:
            hi, b, fb = b, a, fa
            a = hi - g * (hi - lo)
            fa = f(a)
        else:
            lo, a, fa = a, b, fb
            b = lo + g * (hi - lo)
            fb = f(b)
    return float(max(vals[j], fa, fb, f(0.5 * (lo + hi))))


def boundary_m_function(m: complex, beta: float) -> complex:
    """Convert the Dirichlet m-function to ``<delta_1, (H_beta - z)^{-1} delta_1>``.

    The relation is ``m / (1 - tan(beta) m)``, a lower-triangular Moebius map.
    """
    return m / (1.0 - math.tan(beta) * m)


def _finite_support_values(spec: PotentialSpec):
    if isinstance(spec, Zero):
        return np.zeros(0)
    if isinstance(spec, Sampled):
        end = support_end(spec)
        return potential_values(spec, np.arange(1, end + 1))
    if isinstance(spec, Perturbed) and isinstance(spec.base, (Zero, Sampled)) \
            and isinstance(spec.b, (Zero, Sampled)):
        end = support_end(spec)
        return potential_values(spec, np.arange(1, end + 1))
    raise UnsupportedSpec("m-function oracle needs a free or finitely supported potential")


def m_plus(z: complex, spec: PotentialSpec) -> complex:
    """Dirichlet m-function of the half-line operator with finitely supported ``V``.

    Uses the free closed form beyond the support and the backward
    recursion ``m_n = 1 / (V(n) - z - m_{n+1})``.
    """
    vals = _finite_support_values(spec)
    m = free_m_function(z, 0.0)
    for v in vals[::-1]:
        m = 1.0 / (v - z - m)
    return complex(m)


@dataclass(frozen=True)
class JLValue:
    energy: float
    k: int
    eps: float
    norm: float
    m: complex
    psi: float

    @property
    def ratio(self) -> float:
        return self.psi / (self.norm * self.eps)


def jl_bracket(x: float, spec: PotentialSpec, k: int, family: PkFamily | None = None) -> JLValue:
    """``psi(m+(x + i eps_k)) / (||P_k|| eps_k)`` for a spec with an m-function oracle.

    Raises
    ------
    UnsupportedSpec
        For potentials without finite support.
    """
    _finite_support_values(spec)
    fam = family if family is not None else pk_family(x, spec, k)
    eps = float(fam.eps[k - 1])
    norm = float(fam.norm[k - 1])
    m = m_plus(complex(x, eps), spec)
    return JLValue(float(x), int(k), eps, norm, m, psi_sup(m))


def last_simon_diagnostics(x: float, spec: PotentialSpec, L: int):
    """Return ``((1/L) sum ||T(n)||^2, sum ||T(n)||^{-2})`` over ``n = 1..L``."""
    if L < 1:
        raise ValueError("L must be at least 1")
    vals = potential_values(spec, np.arange(1, L + 1))
    out = kernels.norm_sums(np.array([float(x)]), vals)[0]
    if not np.all(np.isfinite(out)):
        raise NumericFailure("last_simon_diagnostics", "transfer norms overflowed")
    return float(out[0] / L), float(out[1])
