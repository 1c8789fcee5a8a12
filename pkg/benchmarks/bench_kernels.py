"""Time the compiled kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat R]``.  Each row
reports the best wall time of ``R`` repetitions per backend and the
largest difference between their outputs.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from spectral_lab.kernels import SINC, backend_module


def _cases():
    rng = np.random.default_rng(7)
    xs = np.linspace(-1.9, 1.9, 256)
    vals = 0.02 * rng.uniform(-1.0, 1.0, 5000)
    e = np.sort(rng.uniform(-2.0, 2.0, 1024))
    c = rng.uniform(0.0, 1e-3, 1024)
    y = np.sort(rng.uniform(-2.0, 2.0, 256))
    w = rng.uniform(0.0, 1e-3, 256)
    a = 2.0 * np.pi * 1e3
    return [
        ("transfer_final 256x5000", lambda k: k.transfer_final(xs, vals, False)),
        ("pk_cumulative 64x500", lambda k: k.pk_cumulative(xs[::4], vals[:1000], 500)),
        ("propagate_vector 256x5000", lambda k: k.propagate_vector(xs, vals, 1.0, 0.0)),
        ("atom_sum 1024 sinc", lambda k: k.atom_sum(e, c, a, SINC)),
        ("jump_sum 1024 sinc", lambda k: k.jump_sum(e, c, a, SINC)),
        ("cross_sum 1024x256 sinc", lambda k: k.cross_sum(e, c, y, w, a, SINC)),
    ]


def _best(fn, mod, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(mod)
        best = min(best, time.perf_counter() - t0)
    return best, np.asarray(out, dtype=float)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    py = backend_module("python")
    try:
        cy = backend_module("compiled")
    except ImportError:
        print("compiled backend unavailable; nothing to compare")
        return 1
    print(f"{'kernel':28s} {'python s':>10s} {'compiled s':>11s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, fn in _cases():
        tp, op = _best(fn, py, args.repeat)
        tc, oc = _best(fn, cy, args.repeat)
        diff = float(np.max(np.abs(op - oc)))
        print(f"{name:28s} {tp:10.4f} {tc:11.4f} {tp / tc:8.1f} {diff:11.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
