"""Spectral-measure approximations, interval masses and Hoelder moduli.

Measures live on quadrature grids.  A :class:`QuadratureMeasure` built on
a grid of cells also carries the cell edges and is then read as a
piecewise-constant density (histogram): interval masses use fractional
overlap and time averages integrate the kernel over cells.  Without
edges it is a plain sum of atoms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .free import free_density, free_limit_density
from .lattice import (
    BoundaryCondition,
    PotentialSpec,
    potential_values,
    spec_digest,
    support_end,
    transfer_grid,
)
from .errors import NumericFailure, UnsupportedSpec
from .parallel import map_chunks

__all__ = [
    "QuadratureMeasure",
    "ThetaGrid",
    "NodeGrid",
    "HolderReport",
    "DominationReport",
    "carmona_density",
    "build_measure",
    "reference_measure",
    "interval_mass",
    "holder_modulus",
    "domination_ratio",
    "weak_integral",
    "carmona_weak_integral",
    "angle_of_vector",
    "bump",
    "STANDARD_BUMPS",
    "write_measure_csv",
]


@dataclass
class QuadratureMeasure:
    """Positive measure given by nodes and weights, optionally with cell edges.

    Parameters
    ----------
    nodes : array_like
        Strictly increasing abscissae.
    weights : array_like
        Nonnegative masses, one per node.
    edges : array_like, optional
        ``len(nodes) + 1`` strictly increasing cell boundaries with
        ``edges[j] < nodes[j] < edges[j + 1]``.
    window : tuple, optional
        Interval the measure was built on.
    meta : dict
        Free-form provenance (boundary angle, time, spec digest).
    """

    nodes: np.ndarray
    weights: np.ndarray
    edges: Optional[np.ndarray] = None
    window: Optional[tuple] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float)
        self.weights = np.ascontiguousarray(self.weights, dtype=float)
        if self.nodes.ndim != 1 or self.nodes.shape != self.weights.shape:
            raise ValueError("nodes and weights must be 1-d arrays of equal length")
        if self.nodes.size == 0:
            raise ValueError("empty measure")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise ValueError("weights must be finite and nonnegative")
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if self.edges is not None:
            self.edges = np.ascontiguousarray(self.edges, dtype=float)
            if self.edges.shape != (self.nodes.size + 1,):
                raise ValueError("edges must have one more entry than nodes")
            if np.any(self.edges[:-1] >= self.nodes) or np.any(self.nodes >= self.edges[1:]):
                raise ValueError("each node must lie strictly inside its cell")
        if self.window is not None:
            self.window = (float(self.window[0]), float(self.window[1]))

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def has_cells(self) -> bool:
        return self.edges is not None

    def cdf(self, x) -> np.ndarray:
        """``mu((-inf, x))``; linear inside cells when edges are present."""
        x = np.asarray(x, dtype=float)
        if self.edges is None:
            cum = np.concatenate([[0.0], np.cumsum(self.weights)])
            return cum[np.searchsorted(self.nodes, x, side="left")]
        cum = np.concatenate([[0.0], np.cumsum(self.weights)])
        return np.interp(x, self.edges, cum, left=0.0, right=cum[-1])

    def scaled(self, c: float) -> "QuadratureMeasure":
        return QuadratureMeasure(self.nodes, c * self.weights, self.edges, self.window, dict(self.meta))

    def atoms(self) -> "QuadratureMeasure":
        """The same nodes and weights without cell structure."""
        return QuadratureMeasure(self.nodes, self.weights, None, self.window, dict(self.meta))


# -- grids ------------------------------------------------------------------


@dataclass(frozen=True)
class ThetaGrid:
    """Midpoint rule in ``theta`` under ``x = 2 cos theta``.

    The window is ``[-2 + eps, 2 - eps]`` unless `lo` and `hi` are both
    given.  Nodes are cell midpoints in ``theta`` so they never touch the
    window ends, and ``eps = 0`` is allowed.
    """

    n_nodes: int = 8192
    eps: float = 0.0
    lo: Optional[float] = None
    hi: Optional[float] = None

    def window(self) -> tuple:
        if self.lo is not None or self.hi is not None:
            if self.lo is None or self.hi is None:
                raise ValueError("give both lo and hi")
            lo, hi = float(self.lo), float(self.hi)
        else:
            if not 0.0 <= self.eps < 2.0:
                raise ValueError("eps must lie in [0, 2)")
            lo, hi = -2.0 + self.eps, 2.0 - self.eps
        if not -2.0 <= lo < hi <= 2.0:
            raise ValueError("window must lie inside [-2, 2]")
        return lo, hi

    def build(self):
        """Return ``(nodes, edges, jacobian_weights)`` in increasing ``x``."""
        if self.n_nodes < 1:
            raise ValueError("grid must have at least one node")
        lo, hi = self.window()
        t_lo, t_hi = math.acos(hi / 2.0), math.acos(lo / 2.0)
        te = np.linspace(t_hi, t_lo, self.n_nodes + 1)
        tm = 0.5 * (te[1:] + te[:-1])
        edges = 2.0 * np.cos(te)
        edges[0], edges[-1] = lo, hi
        nodes = 2.0 * np.cos(tm)
        jac = 2.0 * np.sin(tm) * ((t_hi - t_lo) / self.n_nodes)
        return nodes, edges, jac


@dataclass(frozen=True)
class NodeGrid:
    """Explicit atoms: abscissae and plain quadrature weights (no cells)."""

    nodes: tuple
    weights: tuple

    def window(self) -> tuple:
        return float(min(self.nodes)), float(max(self.nodes))

    def build(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.size == 0:
            raise ValueError("grid must have at least one node")
        if np.any(np.abs(nodes) >= 2.0):
            raise ValueError("grid nodes must satisfy |x| < 2")
        return nodes, None, np.asarray(self.weights, dtype=float)


# -- Carmona approximants -----------------------------------------------------


def _vector_sweep(xs: np.ndarray, spec: PotentialSpec, n: int, u: np.ndarray, threads: int):
    vals = potential_values(spec, np.arange(1, n + 1))
    parts = map_chunks(lambda c: [kernels.propagate_vector(np.asarray(c), vals, u[0], u[1])],
                       list(xs), threads, chunk=512)
    w = np.concatenate(parts, axis=0)
    if not np.all(np.isfinite(w)):
        raise NumericFailure("carmona_density", "solution vector overflowed")
    return w


def carmona_density(x, spec: PotentialSpec, beta: BoundaryCondition, n: int, threads: int = 1):
    """Carmona approximant ``cos^2(beta) / (pi ||T(x, n, 0) u_beta||^2)``.

    Only integrals against test functions converge as ``n`` grows; the
    pointwise values oscillate.  The ``cos^2(beta)`` factor normalizes
    the weak limit to the spectral measure of ``delta_1``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    bc = beta if isinstance(beta, BoundaryCondition) else BoundaryCondition(float(beta))
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    w = _vector_sweep(xs, spec, int(n), bc.vector, threads)
    c2 = math.cos(bc.beta) ** 2
    out = c2 / (math.pi * (w[:, 0] ** 2 + w[:, 1] ** 2))
    return float(out[0]) if np.ndim(x) == 0 else out


def _limit_density(xs, spec, bc: BoundaryCondition, threads: int):
    end = support_end(spec)
    if end is None:
        raise UnsupportedSpec("the limit method needs a potential that vanishes beyond some site")
    w = _vector_sweep(xs, spec, max(int(end), 0), bc.vector, threads)
    return free_limit_density(xs, w[:, 0], w[:, 1], bc.beta)


def build_measure(spec: PotentialSpec, beta, n: int, grid=None, method: str = "approximant",
                  threads: int = 1) -> QuadratureMeasure:
    """Discretize the half-line spectral measure on a quadrature grid.

    Parameters
    ----------
    method : {"approximant", "limit"}
        ``"approximant"`` weights the grid with the Carmona density at time
        `n`.  ``"limit"`` uses its weak limit, available when the
        potential vanishes beyond a finite site; `n` is then ignored.
    """
    bc = beta if isinstance(beta, BoundaryCondition) else BoundaryCondition(float(beta))
    grid = grid if grid is not None else ThetaGrid()
    nodes, edges, jac = grid.build()
    if method == "approximant":
        dens = carmona_density(nodes, spec, bc, n, threads)
    elif method == "limit":
        dens = _limit_density(nodes, spec, bc, threads)
    else:
        raise ValueError(f"unknown method {method!r}")
    meta = {"beta": bc.beta, "n": n if method == "approximant" else "limit",
            "method": method, "spec": spec_digest(spec), "nodes": nodes.size}
    return QuadratureMeasure(nodes, dens * jac, edges, grid.window(), meta)


def reference_measure(beta, grid=None) -> QuadratureMeasure:
    """Free closed-form density discretized with the same rule as :func:`build_measure`."""
    bc = beta if isinstance(beta, BoundaryCondition) else BoundaryCondition(float(beta))
    grid = grid if grid is not None else ThetaGrid()
    nodes, edges, jac = grid.build()
    meta = {"beta": bc.beta, "n": "exact", "method": "reference", "spec": "zero",
            "nodes": nodes.size}
    return QuadratureMeasure(nodes, free_density(nodes, bc.beta) * jac, edges, grid.window(), meta)


# -- masses and moduli --------------------------------------------------------


def interval_mass(mu: QuadratureMeasure, left: float, right: float) -> float:
    """``mu([left, right))``.

    For atoms this is the sum of weights with nodes in the interval; with
    cells, each cell contributes in proportion to its overlap.
    """
    if not left < right:
        raise ValueError("need left < right")
    f = mu.cdf(np.array([left, right]))
    return float(f[1] - f[0])


@dataclass(frozen=True)
class DepthSup:
    depth: int
    sup_ratio: float
    interval: tuple


@dataclass(frozen=True)
class HolderReport:
    """Sup of ``mu(I) / |I|^alpha`` over dyadic intervals, with per-depth sups."""

    alpha: float
    sup_ratio: float
    argmax_interval: tuple
    depth: int
    per_depth: tuple

    def at_depth(self, d: int) -> DepthSup:
        for p in self.per_depth:
            if p.depth == d:
                return p
        raise KeyError(d)


def _dyadic_masses(mu: QuadratureMeasure, depth: int, domain: tuple):
    lo, hi = domain
    m = 1 << depth
    pts = lo + (hi - lo) * (np.arange(m + 1) / m)
    return pts, np.diff(mu.cdf(pts))


def holder_modulus(mu: QuadratureMeasure, alpha: float, max_depth: int, min_depth: int = 0,
                   domain: tuple = (-2.0, 2.0)) -> HolderReport:
    """Dyadic Hoelder modulus ``sup mu(I) / |I|^alpha``.

    Intervals are the dyadic subintervals of `domain` at depths
    ``min_depth..max_depth``; depth ``0`` is the domain itself.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if not 0 <= min_depth <= max_depth <= 24:
        raise ValueError("need 0 <= min_depth <= max_depth <= 24")
    per = []
    for d in range(min_depth, max_depth + 1):
        pts, mass = _dyadic_masses(mu, d, domain)
        length = (domain[1] - domain[0]) / (1 << d)
        ratio = mass / length ** alpha
        j = int(np.argmax(ratio))
        per.append(DepthSup(d, float(ratio[j]), (float(pts[j]), float(pts[j + 1]))))
    best = max(per, key=lambda p: p.sup_ratio)
    return HolderReport(float(alpha), best.sup_ratio, best.interval, best.depth, tuple(per))


@dataclass(frozen=True)
class DominationReport:
    ratio: float
    per_depth: tuple
    excluded: int
    argmax_interval: tuple


def domination_ratio(mu: QuadratureMeasure, mu_ref: QuadratureMeasure, depth: int,
                     min_depth: int = 1, floor: float = 1e-12,
                     domain: tuple = (-2.0, 2.0)) -> DominationReport:
    """Max over dyadic intervals of ``mu(I) / mu_ref(I)``.

    Intervals with ``mu_ref(I) < floor * mu_ref.total_mass`` are skipped
    and counted.

    Raises
    ------
    ValueError
        If the measures were built on different windows or every interval
        falls below the floor.
    """
    if mu.window is not None and mu_ref.window is not None and mu.window != mu_ref.window:
        raise ValueError("measures live on different windows")
    cut = floor * mu_ref.total_mass
    per = []
    excluded = 0
    best = (-math.inf, None)
    for d in range(min_depth, depth + 1):
        pts, m = _dyadic_masses(mu, d, domain)
        _, r = _dyadic_masses(mu_ref, d, domain)
        keep = r >= cut
        excluded += int(np.count_nonzero(~keep))
        if not np.any(keep):
            per.append((d, math.nan))
            continue
        ratio = np.where(keep, m / np.where(keep, r, 1.0), -math.inf)
        j = int(np.argmax(ratio))
        per.append((d, float(ratio[j])))
        if ratio[j] > best[0]:
            best = (float(ratio[j]), (float(pts[j]), float(pts[j + 1])))
    if best[1] is None:
        raise ValueError("reference mass floor excludes every interval")
    return DominationReport(best[0], tuple(per), excluded, best[1])


# -- weak integrals -------------------------------------------------------------


def weak_integral(mu: QuadratureMeasure, f: Callable) -> float:
    """``sum_j w_j f(x_j)``."""
    return float(np.dot(mu.weights, f(mu.nodes)))


def bump(center: float, radius: float) -> Callable:
    """Smooth bump ``exp(1 - 1 / (1 - s^2))`` with ``s = (x - center) / radius``."""

    def f(x):
        s = (np.asarray(x, dtype=float) - center) / radius
        out = np.zeros(np.shape(s))
        inside = np.abs(s) < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
        return out

    f.center, f.radius = center, radius
    return f


# Five fixed test functions with supports inside [-1.95, 1.95].
STANDARD_BUMPS = (
    bump(0.0, 1.0),
    bump(-1.0, 0.8),
    bump(1.0, 0.8),
    bump(-1.5, 0.45),
    bump(0.5, 0.5),
)


def angle_of_vector(v) -> float:
    """Boundary angle ``beta`` in ``(-pi/2, pi/2]`` with ``u_beta`` parallel to ``v``."""
    b = math.atan2(-float(v[1]), float(v[0]))
    if b > math.pi / 2:
        b -= math.pi
    elif b <= -math.pi / 2:
        b += math.pi
    return b


def carmona_weak_integral(f: Callable, spec: PotentialSpec, beta, n: int, grid=None) -> float:
    """``int f(x) cos^2(beta(x)) / (pi ||T(x, n, 0) u_{beta(x)}||^2) dx``.

    `beta` may be a number or a callable angle field ``x -> beta(x)``.
    """
    grid = grid if grid is not None else ThetaGrid()
    nodes, _, jac = grid.build()
    if callable(beta):
        b = np.array([float(beta(x)) for x in nodes])
    else:
        b = np.full(nodes.shape, float(beta))
    t = transfer_grid(nodes, spec, int(n))
    c, s = np.cos(b), -np.sin(b)
    w1 = t[:, 0] * c + t[:, 1] * s
    w2 = t[:, 2] * c + t[:, 3] * s
    dens = np.cos(b) ** 2 / (math.pi * (w1 * w1 + w2 * w2))
    return float(np.dot(f(nodes) * jac, dens))


# -- serialization -------------------------------------------------------------


def write_measure_csv(mu: QuadratureMeasure, fh, header: Optional[dict] = None) -> None:
    """Write ``node,weight`` rows (plus cell edges when present) with ``#`` headers."""
    head = dict(header or {})
    if mu.window is not None:
        head.setdefault("window", f"[{mu.window[0]!r}, {mu.window[1]!r}]")
    for k in ("n", "beta", "method", "spec"):
        if k in mu.meta:
            head.setdefault(k, mu.meta[k])
    for k, v in head.items():
        fh.write(f"# {k}: {v}\n")
    if mu.edges is None:
        fh.write("node,weight\n")
        for x, w in zip(mu.nodes.tolist(), mu.weights.tolist()):
            fh.write(f"{x!r},{w!r}\n")
    else:
        fh.write("node,weight,cell_left,cell_right\n")
        e = mu.edges.tolist()
        for j, (x, w) in enumerate(zip(mu.nodes.tolist(), mu.weights.tolist())):
            fh.write(f"{x!r},{w!r},{e[j]!r},{e[j + 1]!r}\n")
