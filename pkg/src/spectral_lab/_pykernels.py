"""Pure numpy implementations of the hot loops.

Every function here has a twin in ``_ckernels.pyx`` with the same
signature.  Transfer products use the same operation order in both
backends, so with FMA contraction disabled in the compiled build they
agree bit for bit.  Pair sums agree to rounding only.
"""

import numpy as np
from scipy.special import erf, sici

SINC = 0
GAUSS = 1


def transfer_final(xs, vals, inverse):
    """Return the flattened products ``(m11, m12, m21, m22)`` per energy.

    Forward mode applies ``A = [[x - v, -1], [1, 0]]`` for each entry of
    `vals` in order.  Inverse mode applies ``A^{-1} = [[0, 1], [-1, x - v]]``.
    """
    xs = np.asarray(xs, dtype=np.float64)
    m11 = np.ones_like(xs)
    m12 = np.zeros_like(xs)
    m21 = np.zeros_like(xs)
    m22 = np.ones_like(xs)
    for v in vals:
        c = xs - v
        if inverse:
            n21 = c * m21 - m11
            n22 = c * m22 - m12
            m11, m12, m21, m22 = m21, m22, n21, n22
        else:
            n11 = c * m11 - m21
            n12 = c * m12 - m22
            m11, m12, m21, m22 = n11, n12, m11, m12
    return np.stack([m11, m12, m21, m22], axis=-1)


def transfer_path(xs, vals, inverse):
    """All partial products, shape ``(len(xs), len(vals) + 1, 4)``."""
    xs = np.asarray(xs, dtype=np.float64)
    out = np.empty((xs.size, len(vals) + 1, 4))
    m11 = np.ones_like(xs)
    m12 = np.zeros_like(xs)
    m21 = np.zeros_like(xs)
    m22 = np.ones_like(xs)
    out[:, 0, 0] = m11
    out[:, 0, 1] = m12
    out[:, 0, 2] = m21
    out[:, 0, 3] = m22
    for j, v in enumerate(vals):
        c = xs - v
        if inverse:
            n21 = c * m21 - m11
            n22 = c * m22 - m12
            m11, m12, m21, m22 = m21, m22, n21, n22
        else:
            n11 = c * m11 - m21
            n12 = c * m12 - m22
            m11, m12, m21, m22 = n11, n12, m11, m12
        out[:, j + 1, 0] = m11
        out[:, j + 1, 1] = m12
        out[:, j + 1, 2] = m21
        out[:, j + 1, 3] = m22
    return out


def propagate_vector(xs, vals, u1, u2):
    """Apply the forward steps to the fixed vector ``(u1, u2)``."""
    xs = np.asarray(xs, dtype=np.float64)
    a = np.full_like(xs, u1)
    b = np.full_like(xs, u2)
    for v in vals:
        c = xs - v
        a, b = c * a - b, a
    return np.stack([a, b], axis=-1)


def pk_cumulative(xs, vals, k_max):
    """Cumulative ``sum_{n<=k} T*T(2n-1)`` as ``(p11, p12, p22)``."""
    xs = np.asarray(xs, dtype=np.float64)
    out = np.empty((xs.size, k_max, 3))
    m11 = np.ones_like(xs)
    m12 = np.zeros_like(xs)
    m21 = np.zeros_like(xs)
    m22 = np.ones_like(xs)
    s11 = np.zeros_like(xs)
    s12 = np.zeros_like(xs)
    s22 = np.zeros_like(xs)
    for j in range(2 * k_max - 1):
        c = xs - vals[j]
        n11 = c * m11 - m21
        n12 = c * m12 - m22
        m11, m12, m21, m22 = n11, n12, m11, m12
        if j % 2 == 0:
            s11 = s11 + (m11 * m11 + m21 * m21)
            s12 = s12 + (m11 * m12 + m21 * m22)
            s22 = s22 + (m12 * m12 + m22 * m22)
            k = j // 2
            out[:, k, 0] = s11
            out[:, k, 1] = s12
            out[:, k, 2] = s22
    return out


def norm_sums(xs, vals):
    """Return ``(sum ||T(n)||^2, sum ||T(n)||^-2)`` over ``n = 1..len(vals)``."""
    xs = np.asarray(xs, dtype=np.float64)
    m11 = np.ones_like(xs)
    m12 = np.zeros_like(xs)
    m21 = np.zeros_like(xs)
    m22 = np.ones_like(xs)
    sq = np.zeros_like(xs)
    inv = np.zeros_like(xs)
    for v in vals:
        c = xs - v
        n11 = c * m11 - m21
        n12 = c * m12 - m22
        m11, m12, m21, m22 = n11, n12, m11, m12
        f = m11 * m11 + m12 * m12 + m21 * m21 + m22 * m22
        sq = sq + f
        inv = inv + 1.0 / f
    return np.stack([sq, inv], axis=-1)


def _k1(d, a, kind):
    if kind == SINC:
        return sici(a * d)[0] / a
    r = np.sqrt(a)
    return 0.5 * np.sqrt(np.pi) / r * erf(r * d)


def _k2(d, a, kind):
    d = np.abs(d)
    if kind == SINC:
        z = a * d
        s = np.sin(0.5 * z)
        return (d * sici(z)[0] - 2.0 * s * s / a) / a
    return d * _k1(d, a, kind) - (1.0 - np.exp(-a * d * d)) / (2.0 * a)


def _k0(d, a, kind):
    if kind == SINC:
        z = a * d
        out = np.ones_like(z)
        nz = z != 0.0
        out[nz] = np.sin(z[nz]) / z[nz]
        return out
    return np.exp(-a * d * d)


def atom_sum(x, w, a, kind):
    """``sum_{i,j} w_i w_j k(x_i - x_j)`` for the sinc or Gaussian kernel."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    total = 0.0
    for i in range(x.size):
        off = np.dot(w[i + 1:], _k0(x[i + 1:] - x[i], a, kind))
        total += w[i] * (w[i] + 2.0 * off)
    return total


def jump_sum(e, c, a, kind):
    """Double integral of a step density from its jump points ``e`` and sizes ``c``."""
    e = np.asarray(e, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    total = 0.0
    for p in range(e.size):
        total += c[p] * np.dot(c[p + 1:], _k2(e[p + 1:] - e[p], a, kind))
    return -2.0 * total


def cross_sum(e, c, y, w, a, kind):
    """``sum_i w_i * int rho(x) k(x - y_i) dx`` for a step density ``rho``."""
    e = np.asarray(e, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    total = 0.0
    for i in range(len(y)):
        total += w[i] * -np.dot(c, _k1(e - y[i], a, kind))
    return total
