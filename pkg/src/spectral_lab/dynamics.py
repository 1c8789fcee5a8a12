"""Fourier transforms of measures and time-averaged return probabilities.

For a measure ``mu`` the time average
``(1/t) int_0^t |mu_hat(s)|^2 ds`` equals
``int int k_t(x - y) dmu(x) dmu(y)`` with ``k_t(d) = sin(2 pi t d) / (2 pi t d)``.
It is evaluated in closed form, never by quadrature in ``s``.

Measures with cells are treated as step densities.  The double integral
then reduces to sums over density jumps of the second antiderivative of
the kernel.  Cells narrower than ``eta / (2 pi t)`` are folded into
point masses, since the kernel barely varies across them and their huge
densities would otherwise cancel catastrophically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .measure import QuadratureMeasure
from .parallel import map_chunks

__all__ = [
    "mu_hat",
    "time_averaged_return",
    "gaussian_smoothed_average",
    "decay_curve",
    "log_time_grid",
    "example31_measure",
    "DecayCurve",
    "DecayFit",
    "decay_fit",
    "SingularityClass",
    "strichartz_classify",
    "singular_fourier_decay",
    "SMOOTHING_CONSTANT",
]

# Plain time average <= SMOOTHING_CONSTANT * Gaussian-smoothed average.
SMOOTHING_CONSTANT = math.exp(4.0 * math.pi ** 2) * math.sqrt(math.pi) / (2.0 * math.pi)


def mu_hat(mu: QuadratureMeasure, s):
    """``sum_j w_j exp(-2 pi i s x_j)`` for scalar or array ``s``."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.empty(s_arr.shape, dtype=complex)
    for i, si in enumerate(s_arr):
        out[i] = np.dot(mu.weights, np.exp(-2j * math.pi * si * mu.nodes))
    return complex(out[0]) if np.ndim(s) == 0 else out


def _split(mu: QuadratureMeasure, scale: float, eta: float):
    """Partition cells into wide ones (kept as steps) and narrow ones (atoms)."""
    h = np.diff(mu.edges)
    narrow = h * scale < eta
    wide = ~narrow
    rho = mu.weights[wide] / h[wide]
    left, right = mu.edges[:-1][wide], mu.edges[1:][wide]
    # jumps: +rho at each left edge, -rho at each right edge, merged where cells touch
    pts = np.concatenate([left, right])
    jumps = np.concatenate([rho, -rho])
    order = np.lexsort((jumps, pts))
    pts, jumps = pts[order], jumps[order]
    uniq, inv = np.unique(pts, return_inverse=True)
    c = np.zeros(uniq.size)
    np.add.at(c, inv, jumps)
    return uniq, c, mu.nodes[narrow], mu.weights[narrow]


def _pair_integral(mu: QuadratureMeasure, a: float, kind: int, scale: float, eta: float) -> float:
    if mu.edges is None:
        return kernels.atom_sum(mu.nodes, mu.weights, a, kind)
    e, c, y, w = _split(mu, scale, eta)
    total = 0.0
    if e.size:
        total += kernels.jump_sum(e, c, a, kind)
    if e.size and y.size:
        total += 2.0 * kernels.cross_sum(e, c, y, w, a, kind)
    if y.size:
        total += kernels.atom_sum(y, w, a, kind)
    return total


def time_averaged_return(mu: QuadratureMeasure, t: float, eta: float = 0.01) -> float:
    """``(1/t) int_0^t |mu_hat(s)|^2 ds`` via the closed-form kernel.

    Parameters
    ----------
    eta : float
        Cells with ``2 pi t * width < eta`` are treated as atoms.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    a = 2.0 * math.pi * t
    return _pair_integral(mu, a, kernels.SINC, a, eta)


def gaussian_smoothed_average(mu: QuadratureMeasure, t: float, eta: float = 0.01) -> float:
    """``int int exp(-t^2 (x - y)^2 / 4) dmu(x) dmu(y)``."""
    if not t > 0:
        raise ValueError("t must be positive")
    b = 0.25 * t * t
    return _pair_integral(mu, b, kernels.GAUSS, math.sqrt(b), eta)


def log_time_grid(t_min: float = 1e2, t_max: float = 1e4, per_decade: int = 64) -> np.ndarray:
    """Log-spaced times with `per_decade` intervals per decade, endpoints included."""
    if not 0 < t_min < t_max:
        raise ValueError("need 0 < t_min < t_max")
    n = int(round(per_decade * math.log10(t_max / t_min)))
    return np.logspace(math.log10(t_min), math.log10(t_max), max(n, 1) + 1)


@dataclass
class DecayFit:
    """Power-law and ``log(t)/t`` fits of a decay curve.

    ``exponent`` and ``r_squared`` come from least squares on
    ``(log t, log value)``.  ``log_coefficient`` and ``log_r_squared``
    come from fitting ``t * value`` linearly in ``log t``;
    ``log_relative_slope`` is that slope divided by the mean of ``t * value``.
    """

    exponent: float
    intercept: float
    r_squared: float
    log_coefficient: float
    log_intercept: float
    log_r_squared: float
    log_relative_slope: float
    window: tuple
    samples: int


@dataclass
class DecayCurve:
    """Sampled time averages with an optional fit."""

    t: np.ndarray
    values: np.ndarray
    fit: Optional[DecayFit] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.t.shape != self.values.shape:
            raise ValueError("t and values must match")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("t must be strictly increasing")

    def write_csv(self, fh, header: Optional[dict] = None) -> None:
        for k, v in (header or {}).items():
            fh.write(f"# {k}: {v}\n")
        fh.write("t,value\n")
        for t, v in zip(self.t.tolist(), self.values.tolist()):
            fh.write(f"{t!r},{v!r}\n")

    def write_sidecar(self, fh) -> None:
        """``key: value`` lines describing the fit."""
        f = self.fit
        if f is None:
            fh.write("fit: none\n")
            return
        for k in ("exponent", "intercept", "r_squared", "log_coefficient", "log_intercept",
                  "log_r_squared", "log_relative_slope", "samples"):
            fh.write(f"{k}: {getattr(f, k)!r}\n")
        fh.write(f"window: [{f.window[0]!r}, {f.window[1]!r}]\n")


def decay_curve(mu: QuadratureMeasure, t_values: Sequence[float], kernel: str = "exact",
                threads: int = 1, eta: float = 0.01) -> DecayCurve:
    """Evaluate the time average (or its Gaussian surrogate) on a time grid."""
    fn = {"exact": time_averaged_return, "gaussian": gaussian_smoothed_average}[kernel]
    ts = [float(t) for t in t_values]
    vals = map_chunks(lambda c: [fn(mu, t, eta) for t in c], ts, threads, chunk=1)
    return DecayCurve(np.array(ts), np.array(vals), meta={"kernel": kernel})


def _linfit(x: np.ndarray, y: np.ndarray):
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 0.0
    return float(slope), float(icpt), r2


def decay_fit(curve: DecayCurve, t_min: float, t_max: float) -> DecayFit:
    """Fit the samples with ``t_min <= t <= t_max``.

    Raises
    ------
    ValueError
        With fewer than 8 samples in the window or nonpositive values.
    """
    sel = (curve.t >= t_min * (1 - 1e-12)) & (curve.t <= t_max * (1 + 1e-12))
    if np.count_nonzero(sel) < 8:
        raise ValueError("need at least 8 samples in the fit window")
    t, v = curve.t[sel], curve.values[sel]
    if np.any(v <= 0):
        raise ValueError("decay values must be positive to fit")
    lt = np.log(t)
    ex, ic, r2 = _linfit(lt, np.log(v))
    tv = t * v
    ls, li, lr2 = _linfit(lt, tv)
    fit = DecayFit(ex, ic, r2, ls, li, lr2, ls / float(np.mean(tv)),
                   (float(t[0]), float(t[-1])), int(t.size))
    curve.fit = fit
    return fit


@dataclass(frozen=True)
class SingularityClass:
    rho: float
    regime: str
    exponent: float

    def describe(self) -> str:
        if self.regime == "log_over_t":
            return "log(t)/t"
        if self.regime == "inverse_t":
            return "1/t"
        return f"t^{self.exponent:g}"


def strichartz_classify(rho: float) -> SingularityClass:
    """Decay regime for a weak singularity of order ``rho``.

    ``rho < 1/2`` gives ``1/t``, ``rho = 1/2`` gives ``log(t)/t`` and
    ``rho > 1/2`` gives ``t^{-2(1 - rho)}``.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    if rho < 0.5:
        return SingularityClass(float(rho), "inverse_t", -1.0)
    if rho == 0.5:
        return SingularityClass(float(rho), "log_over_t", -1.0)
    return SingularityClass(float(rho), "power_2_1mrho", -2.0 * (1.0 - rho))


def example31_measure(beta: float, n_nodes: int) -> QuadratureMeasure:
    """``x^{-beta} dx`` on ``(0, 1]`` as a cell measure.

    Cells come from a uniform grid in ``u`` under ``x = u^{1/(1 - beta)}``;
    each cell carries its exact mass ``du / (1 - beta)``.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if n_nodes < 1:
        raise ValueError("need at least one node")
    p = 1.0 / (1.0 - beta)
    ue = np.linspace(0.0, 1.0, n_nodes + 1)
    edges = ue ** p
    nodes = (0.5 * (ue[1:] + ue[:-1])) ** p
    weights = np.diff(ue) / (1.0 - beta)
    return QuadratureMeasure(nodes, weights, edges, (0.0, 1.0),
                             {"beta": beta, "method": "power", "spec": f"x^-{beta!r} on (0,1]"})


def singular_fourier_decay(beta: float, s_values, a: float = 0.0, c: float = 1.0,
                           panels: int = 256, order: int = 16, fit_at: Optional[float] = None):
    """Fourier transform of ``|x - a|^{-beta}`` on ``[-c, c]`` against its envelope.

    Each side of ``a`` is mapped by ``v = L w^{1/(1 - beta)}``, which makes
    the integrand bounded, then integrated with composite Gauss-Legendre.

    Returns
    -------
    list of (s, |f_hat(s)|, bound)
        ``bound = gamma |s|^{beta - 1}`` with ``gamma`` fitted at the largest
        ``|s|`` (or at `fit_at`); ``inf`` at ``s = 0``.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if not -c <= a <= c:
        raise ValueError("singular point must lie in [-c, c]")
    p = 1.0 / (1.0 - beta)
    g, gw = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    w_nodes = (0.5 * (edges[1:, None] - edges[:-1, None]) * (g[None, :] + 1.0)
               + edges[:-1, None]).ravel()
    w_wts = (0.5 * (edges[1:, None] - edges[:-1, None]) * gw[None, :]).ravel()

    def side(length: float, sign: float, s: float) -> complex:
        if length <= 0:
            return 0.0
        v = length * w_nodes ** p
        x = a + sign * v
        scale = length ** (1.0 - beta) / (1.0 - beta)
        return scale * np.dot(w_wts, np.exp(-2j * math.pi * s * x))

    s_arr = [float(s) for s in s_values]
    vals = [abs(side(c - a, 1.0, s) + side(a + c, -1.0, s)) for s in s_arr]
    s_fit = fit_at if fit_at is not None else max(s_arr, key=abs)
    j = s_arr.index(s_fit) if s_fit in s_arr else None
    f_fit = vals[j] if j is not None else abs(side(c - a, 1.0, s_fit) + side(a + c, -1.0, s_fit))
    gamma = f_fit * abs(s_fit) ** (1.0 - beta) if s_fit != 0 else math.inf
    out = []
    for s, v in zip(s_arr, vals):
        bound = gamma * abs(s) ** (beta - 1.0) if s != 0 else math.inf
        out.append((s, float(v), float(bound)))
    return out
