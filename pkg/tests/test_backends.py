import numpy as np
import pytest

from spectral_lab import kernels
from spectral_lab.kernels import GAUSS, SINC, backend_module

py = backend_module("python")
try:
    cy = backend_module("compiled")
except ImportError:  # pragma: no cover - exercised only without a compiler
    cy = None

needs_compiled = pytest.mark.skipif(cy is None, reason="compiled backend not built")

RNG = np.random.default_rng(2024)
XS = np.linspace(-2.3, 2.3, 37)
VALS = RNG.uniform(-0.5, 0.5, 300)


def test_backend_reported():
    assert kernels.BACKEND in ("compiled", "python")


def test_unknown_backend():
    with pytest.raises(ValueError):
        backend_module("fortran")


@needs_compiled
@pytest.mark.parametrize("inverse", [False, True])
def test_transfer_bit_identical(inverse):
    assert np.array_equal(py.transfer_final(XS, VALS, inverse), cy.transfer_final(XS, VALS, inverse))
    assert np.array_equal(py.transfer_path(XS, VALS, inverse), cy.transfer_path(XS, VALS, inverse))


@needs_compiled
def test_vector_pk_norms_bit_identical():
    assert np.array_equal(py.propagate_vector(XS, VALS, 0.6, -0.8),
                          cy.propagate_vector(XS, VALS, 0.6, -0.8))
    assert np.array_equal(py.pk_cumulative(XS, VALS, 150), cy.pk_cumulative(XS, VALS, 150))
    assert np.array_equal(py.norm_sums(XS, VALS[:100]), cy.norm_sums(XS, VALS[:100]))


@needs_compiled
@pytest.mark.parametrize("kind", [SINC, GAUSS])
def test_pair_sums_agree(kind):
    e = np.sort(RNG.uniform(-2, 2, 200))
    c = RNG.normal(0, 1e-2, 200)
    y = np.sort(RNG.uniform(-2, 2, 50))
    w = RNG.uniform(0, 1e-2, 50)
    a = 40.0
    calls = (lambda k: k.atom_sum(y, w, a, kind),
             lambda k: k.jump_sum(e, c, a, kind),
             lambda k: k.cross_sum(e, c, y, w, a, kind))
    for f in calls:
        assert f(cy) == pytest.approx(f(py), rel=1e-12, abs=1e-15)


def test_pure_fallback_selected_by_env(monkeypatch):
    import importlib

    monkeypatch.setenv("SPECTRAL_LAB_PURE", "1")
    try:
        mod = importlib.reload(kernels)
        assert mod.BACKEND == "python"
        assert mod.transfer_final is py.transfer_final
    finally:
        monkeypatch.delenv("SPECTRAL_LAB_PURE")
        importlib.reload(kernels)
