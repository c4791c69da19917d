"""The compiled and numpy kernel backends must agree."""
import numpy as np
import pytest

from projection_filter import kernels

pytestmark = pytest.mark.skipif("cython" not in kernels.BACKENDS, reason="compiled backend not built")


@pytest.mark.parametrize("n, p, q", [(1, 1, 1), (17, 6, 4), (300, 20, 14)])
def test_lse_dual2_backends_agree(rng, n, p, q):
    stats = rng.normal(size=(n, p))
    log_base = rng.normal(size=n)
    signs = np.where(rng.random(n) < 0.2, -1.0, 1.0)
    signs[np.argmax(log_base)] = 1.0
    theta = 0.1 * rng.normal(size=q)
    a = kernels.lse_dual2(stats, log_base, theta, q, signs=signs, backend="cython")
    b = kernels.lse_dual2(stats, log_base, theta, q, signs=signs, backend="numpy")
    if not np.isfinite(b[0]):
        assert not np.isfinite(a[0])
        return
    assert a[0] == pytest.approx(b[0], rel=1e-13)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-11, atol=1e-13)
    np.testing.assert_allclose(a[2], b[2], rtol=1e-10, atol=1e-12)


def test_lse_dual2_nonpositive_sum_is_nan():
    stats = np.array([[1.0], [2.0]])
    for backend in ("cython", "numpy"):
        psi, g, h = kernels.lse_dual2(stats, np.zeros(2), np.zeros(1), 1, signs=np.array([1.0, -1.0]),
                                      backend=backend)
        assert np.isnan(psi) and np.isnan(g).all()


def test_lse_dual2_infinite_terms():
    stats = np.array([[1.0]])
    for backend in ("cython", "numpy"):
        psi, g, _ = kernels.lse_dual2(stats, np.array([-np.inf]), np.zeros(1), 1, backend=backend)
        assert not np.isfinite(psi)


@pytest.mark.parametrize("n", [1, 5, 1000])
def test_systematic_resample_backends_agree(rng, n):
    w = rng.random(n) ** 4
    w /= w.sum()
    for u in (0.0, 0.37, 0.999999):
        np.testing.assert_array_equal(kernels.systematic_resample(w, u, backend="cython"),
                                      kernels.systematic_resample(w, u, backend="numpy"))


@pytest.mark.parametrize("reflecting", [False, True])
def test_fp_step_backends_agree(rng, reflecting):
    n = 200
    x = np.linspace(-4, 4, n)
    p = np.exp(-x ** 2) * (1 + 0.1 * rng.random(n))
    f = -x + 0.3 * x ** 2
    alpha = 0.2 + 0.05 * x ** 2
    a = kernels.fp_step_1d(p, f, alpha, x[1] - x[0], 1e-3, reflecting, backend="cython")
    b = kernels.fp_step_1d(p, f, alpha, x[1] - x[0], 1e-3, reflecting, backend="numpy")
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-16)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_fallback_selected_when_extension_disabled():
    import os
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-c", "from projection_filter import kernels; print(kernels.BACKEND)"],
                         capture_output=True, text=True, env={**os.environ, "PROJECTION_FILTER_PURE_PYTHON": "1"},
                         check=True)
    assert out.stdout.strip() == "numpy"
