import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import j1, roots_legendre

import functools

from spectral_lab.dynamics import (
    SMOOTHING_CONSTANT,
    DecayCurve,
    decay_curve,
    decay_fit,
    example31_measure,
    gaussian_smoothed_average,
    log_time_grid,
    mu_hat,
    singular_fourier_decay,
    strichartz_classify,
    time_averaged_return,
)
from spectral_lab.measure import QuadratureMeasure, ThetaGrid, holder_modulus, reference_measure


def _atoms(x, w):
    return QuadratureMeasure(np.asarray(x, float), np.asarray(w, float))


@functools.lru_cache(maxsize=None)
def _rule(n):
    return roots_legendre(n)


def _brute_average(hat, t, n=10_000):
    g, gw = _rule(n)
    s = 0.5 * t * (g + 1.0)
    return float(np.dot(0.5 * t * gw, np.abs(hat(s)) ** 2)) / t


def _cell_hat(mu):
    left, right = mu.edges[:-1], mu.edges[1:]
    h = right - left

    def hat(s):
        s = np.asarray(s)[:, None]
        k = -2j * math.pi * s
        ph = (np.exp(k * right) - np.exp(k * left)) / (k * h)
        return ph @ mu.weights

    return hat


def test_mu_hat_examples():
    a = _atoms([0.3], [1.0])
    for s in (0.0, 1.7, 40.0):
        assert abs(mu_hat(a, s)) == pytest.approx(1.0)
    mu = reference_measure(0.0, ThetaGrid(256))
    assert mu_hat(mu, 0.0) == pytest.approx(mu.total_mass)
    rng = np.random.default_rng(0)
    s = rng.uniform(-100, 100, 1000)
    assert np.all(np.abs(mu_hat(mu, s)) <= mu.total_mass * (1 + 1e-12))


def test_mu_hat_bessel():
    mu = reference_measure(0.0, ThetaGrid(8192))
    s = np.linspace(1e-3, 50, 400)
    assert np.max(np.abs(mu_hat(mu, s) - j1(4 * np.pi * s) / (2 * np.pi * s))) < 1e-6


def test_single_atom_and_two_atoms():
    a = _atoms([0.1], [1.0])
    for t in (0.5, 10.0, 1e4):
        assert time_averaged_return(a, t) == pytest.approx(1.0)
        assert gaussian_smoothed_average(a, t) == pytest.approx(1.0)
    two = _atoms([0.0, 0.3], [0.5, 0.5])
    d = 0.3
    for t in (1.0, 5.0):
        a2 = 2 * math.pi * t * d
        assert time_averaged_return(two, t) == pytest.approx(0.5 + 0.5 * math.sin(a2) / a2)
    assert time_averaged_return(two, 1e6) == pytest.approx(0.5, abs=1e-5)


def test_time_must_be_positive():
    with pytest.raises(ValueError):
        time_averaged_return(_atoms([0.0], [1.0]), 0.0)
    with pytest.raises(ValueError):
        gaussian_smoothed_average(_atoms([0.0], [1.0]), -1.0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(0.01, 1)), min_size=1, max_size=8,
                unique_by=lambda a: a[0]),
       st.floats(0.2, 20))
def test_kernel_exactness_atoms(atoms, t):
    atoms = sorted(atoms)
    x = np.array([a[0] for a in atoms])
    w = np.array([a[1] for a in atoms])
    mu = _atoms(x, w)
    brute = _brute_average(lambda s: (np.exp(-2j * np.pi * np.outer(s, x)) @ w), t)
    assert time_averaged_return(mu, t) == pytest.approx(brute, rel=1e-6)


@pytest.mark.parametrize("t", [0.5, 3.0, 20.0])
def test_kernel_exactness_cells(t):
    mu = reference_measure(math.pi / 4, ThetaGrid(8))
    brute = _brute_average(_cell_hat(mu), t)
    assert time_averaged_return(mu, t, eta=1e-300) == pytest.approx(brute, rel=1e-6)


def test_narrow_cells_as_atoms_changes_little():
    mu = reference_measure(0.0, ThetaGrid(256))
    exact = time_averaged_return(mu, 50.0, eta=1e-300)
    assert time_averaged_return(mu, 50.0) == pytest.approx(exact, rel=1e-3)


def test_average_range_and_continuity():
    mu = reference_measure(0.3, ThetaGrid(256))
    ts = log_time_grid(1.0, 100.0, 32)
    v = np.array([time_averaged_return(mu, t) for t in ts])
    assert np.all(v >= 0) and np.all(v <= mu.total_mass ** 2 * (1 + 1e-12))
    assert np.max(np.abs(np.diff(v))) < 0.1


def test_gaussian_direct_sum_and_bound():
    rng = np.random.default_rng(4)
    x = np.sort(rng.uniform(-2, 2, 12))
    w = rng.uniform(0, 1, 12)
    mu = _atoms(x, w)
    t = 3.0
    d = x[:, None] - x[None, :]
    direct = float(w @ np.exp(-t * t * d * d / 4) @ w)
    assert gaussian_smoothed_average(mu, t) == pytest.approx(direct, rel=1e-12)
    for m in (mu, reference_measure(0.0, ThetaGrid(512))):
        for t in (1.0, 10.0, 100.0):
            assert gaussian_smoothed_average(m, t) >= time_averaged_return(m, t) / SMOOTHING_CONSTANT


def test_gaussian_cells_match_fine_atoms():
    mu = reference_measure(0.0, ThetaGrid(64))
    fine = reference_measure(0.0, ThetaGrid(8192))
    a = gaussian_smoothed_average(mu, 20.0, eta=1e-300)
    b = gaussian_smoothed_average(fine.atoms(), 20.0)
    assert a == pytest.approx(b, rel=1e-3)


def test_log_time_grid():
    ts = log_time_grid(1e2, 1e4, 16)
    assert ts.size == 33 and ts[0] == pytest.approx(1e2) and ts[-1] == pytest.approx(1e4)
    assert np.all(np.diff(ts) > 0)


def _synthetic(f):
    t = log_time_grid(1e2, 1e4, 16)
    return DecayCurve(t, f(t))


def test_decay_fit_synthetic():
    fit = decay_fit(_synthetic(lambda t: 3.0 / t), 1e2, 1e4)
    assert fit.exponent == pytest.approx(-1.0, abs=1e-3)
    assert abs(fit.log_relative_slope) < 1e-9
    fit = decay_fit(_synthetic(lambda t: 2.0 * np.log(t) / t), 1e2, 1e4)
    assert fit.log_r_squared >= 0.999
    fit = decay_fit(_synthetic(lambda t: t ** -0.5), 1e2, 1e4)
    assert fit.exponent == pytest.approx(-0.5, abs=1e-3)


def test_decay_fit_needs_samples():
    with pytest.raises(ValueError):
        decay_fit(_synthetic(lambda t: 1 / t), 1e2, 1.5e2)


def test_classify():
    assert strichartz_classify(0.3).regime == "inverse_t"
    assert strichartz_classify(0.5).regime == "log_over_t"
    c = strichartz_classify(0.75)
    assert c.regime == "power_2_1mrho" and c.exponent == pytest.approx(-0.5)
    with pytest.raises(ValueError):
        strichartz_classify(1.0)


def test_example_measure_mass():
    assert example31_measure(0.75, 512).total_mass == pytest.approx(4.0, abs=1e-6)
    assert example31_measure(0.5, 512).total_mass == pytest.approx(2.0, abs=1e-12)


def test_singular_fourier_decay():
    rows = singular_fourier_decay(0.5, [0.0])
    assert rows[0][1] == pytest.approx(4.0, rel=1e-8)
    s = list(np.linspace(1, 100, 60))
    rows = singular_fourier_decay(0.5, s)
    scaled = [v * si ** 0.5 for si, v, _ in rows]
    assert max(scaled) < 3 * min(scaled)
    # the jumps at +-c add an O(s^-1) term, relative size 1/(pi sqrt(s)) here
    assert all(v <= b * (1 + 1 / (math.pi * math.sqrt(si)) + 1e-3) for si, v, b in rows)
    assert all(v <= 1.05 * b for si, v, b in rows if si > 41)


def test_curve_serialization():
    mu = reference_measure(0.0, ThetaGrid(64))
    curve = decay_curve(mu, log_time_grid(1, 10, 8))
    decay_fit(curve, 1, 10)
    buf, side = io.StringIO(), io.StringIO()
    curve.write_csv(buf)
    curve.write_sidecar(side)
    assert "t,value" in buf.getvalue()
    assert "exponent:" in side.getvalue()


def test_decay_curve_thread_independent():
    mu = reference_measure(0.0, ThetaGrid(256))
    ts = log_time_grid(10, 100, 8)
    a = decay_curve(mu, ts, threads=1).values
    b = decay_curve(mu, ts, threads=8).values
    assert np.array_equal(a, b)


def test_strichartz_converse_power_measure():
    # fitted exponent -alpha should come with a depth-stable alpha/2 modulus
    mu = example31_measure(0.6, 1024)
    curve = decay_curve(mu, log_time_grid(1e2, 1e4, 16))
    alpha = -decay_fit(curve, 1e2, 1e4).exponent
    rep = holder_modulus(mu, alpha / 2, 14, domain=(0.0, 1.0))
    s = [rep.at_depth(d).sup_ratio for d in range(10, 15)]
    assert (max(s) - min(s)) / min(s) < 0.05
