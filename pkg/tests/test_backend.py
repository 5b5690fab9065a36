import os
import subprocess
import sys

import numpy as np
import pytest

from rcca import _backend, _fallback

compiled = pytest.importorskip("rcca._kernels")


def _nodes(rng, k=40):
    return rng.uniform(-3, 6, k) + 1j * rng.uniform(0.05, 2.0, k)


def test_compiled_backend_selected_by_default():
    assert _backend.BACKEND == "cython"


def test_pure_python_switch():
    env = dict(os.environ, RCCA_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from rcca import _backend; print(_backend.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("deriv", [0, 1, 2])
def test_atom_sums_agree(rng, deriv):
    z = _nodes(rng)
    loc, w = rng.uniform(0.2, 4, 5), rng.dirichlet(np.ones(5))
    a = compiled.atoms_stieltjes(z, loc, w, deriv)
    b = _fallback.atoms_stieltjes(z, loc, w, deriv)
    assert np.allclose(a, b, rtol=1e-13, atol=0)


def test_fixed_points_agree(rng):
    z = _nodes(rng)
    loc, w = np.array([0.5, 1.5, 3.0]), np.array([0.2, 0.5, 0.3])
    m1, _ = compiled.fp_y2t(z, loc, w, 0.4)
    m2, _ = _fallback.fp_y2t(z, loc, w, 0.4)
    assert np.allclose(m1, m2, rtol=1e-10)
    a = compiled.fp_regime_a(z, loc, w, 0.6, 0.4)
    b = _fallback.fp_regime_a(z, loc, w, 0.6, 0.4)
    assert np.allclose(a[0], b[0], rtol=1e-10) and np.allclose(a[1], b[1], rtol=1e-10)
    s1, _ = compiled.fp_companion(z, loc, w, 0.3)
    s2, _ = _fallback.fp_companion(z, loc, w, 0.3)
    assert np.allclose(s1, s2, rtol=1e-10)
    assert np.all(m1.imag > 0) and np.all(s1.imag > 0)


def _lp_tableau(rng, m=8, n=14):
    A = rng.uniform(0, 1, (m, n))
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = rng.uniform(1, 2, m)
    T[m, :n] = -rng.uniform(0.1, 1, n)
    return T, np.arange(n, n + m, dtype=np.int64)


def test_simplex_pivots_agree(rng):
    for _ in range(20):
        T, basis = _lp_tableau(rng)
        T2, b2 = T.copy(), basis.copy()
        s1, it1 = compiled.simplex_pivots(T, basis)
        s2, it2 = _fallback.simplex_pivots(T2, b2)
        assert (s1, it1) == (s2, it2) == (0, it1)
        assert np.array_equal(basis, b2)
        assert np.allclose(T, T2, atol=1e-12)


def test_simplex_reports_unbounded():
    T = np.array([[1.0, -1.0, 1.0, 1.0], [-1.0, -1.0, 0.0, 0.0]])
    basis = np.array([2], dtype=np.int64)
    assert compiled.simplex_pivots(T.copy(), basis.copy())[0] == 1
    assert _fallback.simplex_pivots(T.copy(), basis.copy())[0] == 1
