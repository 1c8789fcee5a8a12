"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run under pytest (the lines are repeated in the terminal summary) or
directly with ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import contextlib
import io
import math
import sys
import tempfile
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.special import j1

from spectral_lab.asymptotics import (
    cauchy_spread,
    jl_bracket,
    perturbation_expansion,
    pk_comparison_grid,
    pk_family,
    psi_sup,
    sandwich_sweep,
    telescope_decompose,
)
from spectral_lab.cli import main as cli_main
from spectral_lab.dynamics import decay_curve, decay_fit, example31_measure, log_time_grid, mu_hat
from spectral_lab.free import free_density
from spectral_lab.lattice import (
    DecayEnvelope,
    Perturbed,
    Sampled,
    Zero,
    potential_values,
    transfer_grid,
    transfer_path,
)
from spectral_lab.measure import (
    STANDARD_BUMPS,
    ThetaGrid,
    build_measure,
    domination_ratio,
    holder_modulus,
    reference_measure,
    weak_integral,
)
from spectral_lab.quasiperiodic import (
    GOLDEN_MEAN,
    almost_mathieu_spec,
    approximant_band_energies,
    exp_decay_perturbation,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
ENV = DecayEnvelope(1.0, 4.0, 5.0)
KAPPA = 0.05


def _b(lam: float = 0.0, vnorm: float = 0.0):
    return exp_decay_perturbation(1.0, 4.0, 5.0, lam, vnorm, seed=1, n_range=200)


def _perturbed():
    return Perturbed(Zero(), KAPPA, _b())


# -- criteria -----------------------------------------------------------------


def _path_checks(xs, spec, n):
    """Worst |det - 1| and an exact recursion check along ``0..n``."""
    path = transfer_path(xs, spec, n)
    det = path[..., 0] * path[..., 3] - path[..., 1] * path[..., 2]
    worst = float(np.max(np.abs(det - 1.0)))
    sites = np.arange(1, n + 1) if n > 0 else np.arange(0, n, -1)
    vals = potential_values(spec, sites)
    c = xs[:, None] - vals[None, :]
    prev = path[:, :-1]
    if n > 0:
        nxt = np.stack([c * prev[..., 0] - prev[..., 2], c * prev[..., 1] - prev[..., 3],
                        prev[..., 0], prev[..., 1]], axis=-1)
    else:
        nxt = np.stack([prev[..., 2], prev[..., 3], c * prev[..., 2] - prev[..., 0],
                        c * prev[..., 3] - prev[..., 1]], axis=-1)
    exact = bool(np.array_equal(nxt, path[:, 1:]))
    for k in (1, abs(n) // 3, abs(n)):
        kk = k if n > 0 else -k
        exact &= bool(np.array_equal(transfer_grid(xs, spec, kk), path[:, k]))
    return worst, exact


def criterion_1():
    rng = np.random.default_rng(20240601)
    rand = Sampled(tuple(0.02 * rng.uniform(-1.0, 1.0, 10_001)), offset=-5000)
    grid = np.linspace(-1.95, 1.95, 256)
    am_xs = approximant_band_energies(0.1, GOLDEN_MEAN, 0.0, 256, q_max=3000, margin=0.5)
    cases = (("free", Zero(), grid), ("random(0.02)", rand, grid),
             ("almost_mathieu(0.1)", almost_mathieu_spec(0.1), am_xs))
    parts, ok = [], True
    for name, spec, xs in cases:
        worst, exact = 0.0, True
        for n in (5000, -5000):
            w, e = _path_checks(xs, spec, n)
            worst, exact = max(worst, w), exact and e
        ok &= worst <= 1e-10 and exact
        parts.append(f"{name}: max|det-1|={worst:.2e} recursion_exact={exact}")
    return ok, "; ".join(parts) + " (256 energies, |n|<=5000)"


def criterion_2():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 33))
        F = rng.uniform(-1, 1, (n, 2, 2))
        G = rng.uniform(-1, 1, (n, 2, 2))
        pf, pg = np.eye(2), np.eye(2)
        for k in range(n):
            pf, pg = F[k] @ pf, G[k] @ pg
        direct = pf - pg
        got = telescope_decompose(F, G).to_array()
        worst = max(worst, np.linalg.norm(got - direct) / max(np.linalg.norm(direct), 1e-300))
    return worst <= 1e-12, f"max relative Frobenius error {worst:.2e} over 1000 sequences, lengths 1..32"


def criterion_3():
    hand = perturbation_expansion(0.0, Zero(), Sampled((1.0,), offset=1), 0.3,
                                  DecayEnvelope(4.0 ** 5, 4.0, 5.0), 10)
    hand_ok = np.allclose(hand.Q.flat(), [0.0, 0.0, -0.3, 0.0], atol=1e-15)
    fr = perturbation_expansion(0.7, Zero(), Sampled((1.0, -0.5, 0.25, 0.8, -1.0), offset=1), 0.5,
                                DecayEnvelope(4.0 ** 25, 4.0, 5.0), 40)
    zero_ok = all(np.array_equal(fr.R[n].flat(), np.zeros(4)) for n in range(6, 41))
    b = _b()
    xs = np.linspace(-1.9, 1.9, 128)
    bound = 4.0 ** (3 - 5) + 0.05
    worst = 0.0
    for x in xs:
        ex = perturbation_expansion(float(x), Zero(), b, KAPPA, ENV, 200).require_converged()
        worst = max(worst, max(ex.residual_rate(n) for n in range(20, 201)))
    sand, gamma_hat = sandwich_sweep(xs, Zero(), b, KAPPA, ENV, 500)
    holds = all(s.holds for s in sand)
    ok = hand_ok and zero_ok and worst <= bound and holds and gamma_hat <= 2
    return ok, (f"hand Q ok={hand_ok}; finite-rank R_n==0 (n>=6)={zero_ok}; "
                f"max ||R_n||^(1/n)={worst:.3e} (bound {bound:.4f}); sandwich holds={holds}, "
                f"gamma_hat={gamma_hat:.6f} (<=2) on 128 energies")


def criterion_4():
    worst = 0.0
    for beta in (0.0, math.pi / 4):
        mu = build_measure(Zero(), beta, 2000, ThetaGrid(8192))
        for f in STANDARD_BUMPS:
            oracle = quad(lambda x: f(np.array([x]))[0] * free_density(x, beta),
                          f.center - f.radius, f.center + f.radius, limit=400)[0]
            worst = max(worst, abs(weak_integral(mu, f) - oracle) / oracle)
    return worst <= 0.02, f"max relative error {worst:.2e} (tol 0.02), n=2000, 5 bumps, beta in {{0, pi/4}}"


def criterion_5():
    mu = reference_measure(0.0, ThetaGrid(8192))
    s = np.linspace(0.0, 50.0, 5001)
    with np.errstate(invalid="ignore", divide="ignore"):
        oracle = np.where(s == 0, 1.0, j1(4 * np.pi * s) / (2 * np.pi * s))
    err = float(np.max(np.abs(mu_hat(mu, s) - oracle)))
    return err < 1e-6, f"max |mu_hat - J1(4 pi s)/(2 pi s)| = {err:.2e} on s in [0, 50], 8192 nodes"


def criterion_6():
    ts = log_time_grid(1e2, 1e4, 16)
    grid = ThetaGrid(1024)
    parts, ok = [], True
    for label, spec in (("free", Zero()), ("perturbed", _perturbed())):
        for beta in (0.0, math.pi / 4):
            mu = build_measure(spec, beta, 1, grid, method="limit")
            fit = decay_fit(decay_curve(mu, ts), 1e2, 1e4)
            if beta == 0.0:
                good = -1.15 <= fit.exponent <= -0.85
                parts.append(f"(a) {label} slope={fit.exponent:.4f}")
            else:
                good = fit.log_r_squared >= 0.98
                parts.append(f"(b) {label} r2={fit.log_r_squared:.6f}")
            ok &= good
    for beta in (0.6, 0.75, 0.9):
        fit = decay_fit(decay_curve(example31_measure(beta, 1024), ts), 1e2, 1e4)
        target = -2 * (1 - beta)
        ok &= abs(fit.exponent - target) <= 0.1
        parts.append(f"(c) beta={beta} exponent={fit.exponent:.4f} vs {target:.2f}")
    return ok, "; ".join(parts)


def criterion_7():
    spec = _perturbed()
    parts, ok = [], True
    for eps in (0.1, 0.01, 0.001):
        mu = build_measure(spec, 0.0, 1, ThetaGrid(8192, eps), method="limit")
        rep = holder_modulus(mu, 1.0, 14)
        s = [rep.at_depth(d).sup_ratio for d in range(10, 15)]
        spread = (max(s) - min(s)) / min(s)
        ok &= spread <= 0.05
        parts.append(f"Dirichlet eps={eps} M_1 spread={spread:.1e}")
    mu = build_measure(spec, math.pi / 4, 1, ThetaGrid(8192), method="limit")
    half = holder_modulus(mu, 0.5, 14)
    s = [half.at_depth(d).sup_ratio for d in range(8, 15)]
    spread = (max(s) - min(s)) / min(s)
    g = holder_modulus(mu, 0.6, 14)
    growth = g.at_depth(14).sup_ratio / g.at_depth(8).sup_ratio
    edge = g.at_depth(14).interval[0] == -2.0
    ok &= spread <= 0.05 and growth >= 2.0 and edge
    parts.append(f"pi/4 M_1/2 spread={spread:.1e}; M_0.6 growth 8->14 = {growth:.4f} (need >= 2); "
                 f"maximizer at -2={edge}")
    return ok, "; ".join(parts)


def criterion_8():
    parts, ok = [], True
    grid = ThetaGrid(8192)
    for beta in (0.0, math.pi / 4):
        mu = build_measure(_perturbed(), beta, 1, grid, method="limit")
        rep = domination_ratio(mu, reference_measure(beta, grid), 12, min_depth=6)
        vals = [r for _, r in rep.per_depth]
        spread = (max(vals) - min(vals)) / min(vals)
        ok &= rep.ratio <= 4.0 and spread <= 0.05
        parts.append(f"beta={beta:.4f} ratio={rep.ratio:.5f} depth spread={spread:.1e}")
    return ok, "; ".join(parts) + " (kappa=0.05, depths 6..12)"


def criterion_9():
    base = almost_mathieu_spec(0.1, GOLDEN_MEAN, 0.0)
    b = _b(0.1, 2.0)
    env = DecayEnvelope(1.0, 4.0, 5.0, vnorm=0.2)
    xs = approximant_band_energies(0.1, GOLDEN_MEAN, 0.0, 64, q_max=400)
    nr, dr = pk_comparison_grid(xs, base, b, KAPPA, env, 500)
    lo, hi = min(nr.min(), dr.min()), max(nr.max(), dr.max())
    cn = max(cauchy_spread(r[249:]) for r in nr)
    cd = max(cauchy_spread(r[249:]) for r in dr)
    ok = lo >= 0.5 and hi <= 2.0 and cn <= 0.01 and cd <= 0.01
    return ok, (f"ratios in [{lo:.6f}, {hi:.6f}] (bracket [0.5, 2]); Cauchy spread k=250..500: "
                f"norm {cn:.1e}, det {cd:.1e}; 64 band energies")


def criterion_10():
    xs = np.linspace(-1.9, 1.9, 32)
    ratios, viol = [], 0
    for x in xs:
        fam = pk_family(float(x), Zero(), 200)
        for k in range(1, 201):
            v = jl_bracket(float(x), Zero(), k, fam)
            ratios.append(v.ratio)
            if not (1 / v.psi <= v.m.imag <= abs(v.m) <= v.psi * (1 + 1e-12)):
                viol += 1
    p = psi_sup(1j)
    lo, hi = min(ratios), max(ratios)
    ok = lo >= 0.1 and hi <= 10 and viol == 0 and abs(p - 1.0) <= 1e-6
    return ok, f"JL ratios in [{lo:.4f}, {hi:.4f}]; psi sandwich violations={viol}; psi(i)={p!r}"


def criterion_11():
    cfgs = sorted(CONFIGS.glob("*.cfg"))
    mismatched = []
    with tempfile.TemporaryDirectory() as tmp:
        for cfg in cfgs:
            exp = next(ln.split("=", 1)[1].strip() for ln in cfg.read_text().splitlines()
                       if ln.startswith("experiment"))
            outs = []
            for tag, threads in (("a", 1), ("b", 1), ("c", 8)):
                prefix = Path(tmp) / tag / cfg.stem
                with contextlib.redirect_stdout(io.StringIO()):
                    code = cli_main([exp, "--config", str(cfg), "--out", str(prefix),
                                     "--threads", str(threads)])
                if code != 0:
                    return False, f"{cfg.name} exited nonzero"
                outs.append({p.name: p.read_bytes() for p in sorted(prefix.parent.glob(cfg.stem + ".*"))})
            if not (outs[0] == outs[1] == outs[2]):
                mismatched.append(cfg.name)
    return not mismatched, (f"{len(cfgs)} configs run twice at threads=1 and once at threads=8; "
                            f"byte mismatches: {mismatched or 'none'}")


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 12)}


def _check(record, number):
    ok, detail = CRITERIA[number]()
    record(number, ok, detail)
    assert ok, detail


def test_criterion_01_unimodularity_and_recursion(record_criterion):
    _check(record_criterion, 1)


def test_criterion_02_telescoping(record_criterion):
    _check(record_criterion, 2)


def test_criterion_03_expansion_one(record_criterion):
    _check(record_criterion, 3)


def test_criterion_04_free_density_oracle(record_criterion):
    _check(record_criterion, 4)


def test_criterion_05_bessel_oracle(record_criterion):
    _check(record_criterion, 5)


def test_criterion_06_decay_regimes(record_criterion):
    _check(record_criterion, 6)


def test_criterion_07_holder_moduli(record_criterion):
    _check(record_criterion, 7)


def test_criterion_08_domination(record_criterion):
    _check(record_criterion, 8)


def test_criterion_09_expansion_two(record_criterion):
    _check(record_criterion, 9)


def test_criterion_10_jl_bracket(record_criterion):
    _check(record_criterion, 10)


def test_criterion_11_reproducibility(record_criterion):
    _check(record_criterion, 11)


if __name__ == "__main__":
    failed = 0
    for i, fn in CRITERIA.items():
        ok, detail = fn()
        failed += not ok
        print(f"criterion {i:2d}: {'PASS' if ok else 'FAIL'} | {detail}", flush=True)
    sys.exit(1 if failed else 0)
