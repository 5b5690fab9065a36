import numpy as np
import pytest

from rcca.cca_core import (AspectRatios, classical_sqcorr, cross_products, mlr_stat,
                           moore_penrose, regularized_sqcorr, trace_stat)
from rcca.errors import (DegenerateError, DimensionError, IllConditionedError, NumericalError,
                         ParameterError, RegimeError)
from rcca.lsd import classical_centering


def test_aspect_ratios_hand_values():
    r = AspectRatios(25, 50, 100)
    assert r.ybar1 == pytest.approx(0.5)
    assert r.ybar2 == pytest.approx(0.5)
    assert r.h == pytest.approx(np.sqrt(0.75))
    assert r.a1 == pytest.approx(0.07180, abs=1e-5)
    assert r.a2 == pytest.approx(13.9282, abs=1e-4)
    assert AspectRatios(100, 50, 80).q == pytest.approx(0.625 / 0.375)


def test_cross_products_small():
    cp = cross_products([[1.0, -1.0]], [[1.0, -1.0]])
    for k in ("Axx", "Ayy", "Axy"):
        assert np.allclose(cp[k], [[1.0]])
    cp = cross_products([[1.0, 0.0], [0.0, 1.0]], [[2.0, 0.0]])
    assert np.allclose(cp["Axy"], [[1.0], [0.0]])


def test_cross_products_uncentered_and_psd(rng):
    X = rng.standard_normal((3, 50)) + 5.0
    cp = cross_products(X, X)
    assert np.allclose(cp["Axx"], X @ X.T / 50)
    assert np.allclose(cp["Axx"], cp["Axx"].T)
    assert np.linalg.eigvalsh(cp["Axx"]).min() > 0


def test_cross_products_mismatch():
    with pytest.raises(DimensionError):
        cross_products(np.ones((2, 5)), np.ones((2, 6)))


def test_moore_penrose_examples():
    assert np.allclose(moore_penrose(np.eye(3)), np.eye(3))
    assert np.allclose(moore_penrose(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))
    with pytest.raises(NumericalError):
        moore_penrose(np.array([[np.nan]]))


def test_moore_penrose_matches_numpy_on_low_rank(rng):
    B = rng.standard_normal((8, 3))
    M = B @ B.T
    assert np.allclose(moore_penrose(M), np.linalg.pinv(M, rcond=1e-10, hermitian=True), atol=1e-10)


def test_self_correlation_is_one(rng):
    X = rng.standard_normal((5, 30))
    r2 = classical_sqcorr(X, X)
    assert np.allclose(r2.values, 1.0, atol=1e-12)
    assert trace_stat(r2) == pytest.approx(1.0, abs=1e-12)


def _det_roots(X, Y):
    # generalized eigenproblem Axy Ayy^-1 Ayx v = r^2 Axx v, solved without the congruent form
    from scipy.linalg import eigh
    cp = cross_products(X, Y)
    A = cp["Axy"] @ np.linalg.solve(cp["Ayy"], cp["Axy"].T)
    return np.sort(eigh(0.5 * (A + A.T), cp["Axx"], eigvals_only=True))[::-1]


def test_classical_matches_determinant_roots(rng):
    for _ in range(5):
        X = rng.standard_normal((3, 12))
        Y = rng.standard_normal((3, 12))
        assert np.allclose(classical_sqcorr(X, Y).values, _det_roots(X, Y), atol=1e-10)


def test_single_row_is_squared_multiple_correlation(rng):
    x = rng.standard_normal(40)
    Y = rng.standard_normal((4, 40))
    beta, *_ = np.linalg.lstsq(Y.T, x, rcond=None)
    fit = Y.T @ beta
    r2 = fit @ fit / (x @ x)
    assert classical_sqcorr(x[None, :], Y).values[0] == pytest.approx(r2, rel=1e-10)


def test_classical_invariance(rng):
    X = rng.standard_normal((4, 30))
    Y = rng.standard_normal((6, 30))
    L = rng.standard_normal((4, 4)) + 3 * np.eye(4)
    R = rng.standard_normal((6, 6)) + 3 * np.eye(6)
    a = classical_sqcorr(X, Y).values
    b = classical_sqcorr(L @ X, R @ Y).values
    assert np.allclose(a, b, atol=1e-8)


def test_classical_badly_scaled_rows(rng):
    X = rng.standard_normal((3, 40))
    Y = rng.standard_normal((5, 40))
    Ys = Y * np.array([1e-5, 1, 1e5, 1, 1e7])[:, None]
    assert np.allclose(classical_sqcorr(X, Y).values, classical_sqcorr(X, Ys).values, atol=1e-9)


def test_classical_errors(rng):
    with pytest.raises(RegimeError):
        classical_sqcorr(rng.standard_normal((10, 8)), rng.standard_normal((2, 8)))
    X = rng.standard_normal((3, 20))
    X[2] = X[0] + X[1]
    with pytest.raises(IllConditionedError):
        classical_sqcorr(X, rng.standard_normal((3, 20)))
    X[2] = 0.0
    with pytest.raises(DegenerateError):
        classical_sqcorr(X, rng.standard_normal((3, 20)))


def test_classical_mean_near_centering(rng):
    vals = [trace_stat(classical_sqcorr(rng.standard_normal((10, 40)),
                                        rng.standard_normal((20, 40)))) for _ in range(400)]
    center = classical_centering(lambda x: x, 0.25, 0.5).value
    se = np.std(vals) / np.sqrt(len(vals))
    assert abs(np.mean(vals) - center) < 4 * se + 1e-3


def test_regularized_reduces_to_classical(rng):
    X = rng.standard_normal((6, 30))
    Y = rng.standard_normal((9, 30))
    assert np.allclose(regularized_sqcorr(X, Y, 1e-12).values, classical_sqcorr(X, Y).values,
                       atol=1e-6)


def test_regularized_self_pair_decreasing_in_t(rng):
    X = rng.standard_normal((5, 30))
    prev = np.ones(5)
    for t in (0.1, 1.0, 10.0, 100.0):
        v = regularized_sqcorr(X, X, t).values
        assert np.all(v < 1)
        assert np.all(v < prev)
        prev = v


def test_regularized_rank_bound(rng):
    X = rng.standard_normal((30, 10))
    Y = rng.standard_normal((40, 10))
    v = regularized_sqcorr(X, Y, 1.0).values
    assert v.size == 30
    assert np.sum(v > 1e-10) <= 10


def test_regularized_matches_direct_product(rng):
    X = rng.standard_normal((12, 10))
    Y = rng.standard_normal((15, 10))
    t = 2.0
    cp = cross_products(X, Y)
    T = np.linalg.solve(cp["Axx"] + t * np.eye(12), cp["Axy"]) @ np.linalg.pinv(cp["Ayy"]) @ cp["Axy"].T
    direct = np.sort(np.linalg.eigvals(T).real)[::-1]
    assert np.allclose(regularized_sqcorr(X, Y, t).values, direct, atol=1e-9)


def test_regularized_bad_t(rng):
    with pytest.raises(ParameterError):
        regularized_sqcorr(rng.standard_normal((2, 5)), rng.standard_normal((2, 5)), 0.0)


def test_trace_and_mlr_arithmetic():
    assert trace_stat([1.0, 1.0]) == 1.0
    assert trace_stat([0.5, 0.25, 0.25]) == pytest.approx(1 / 3)
    assert mlr_stat([0.0, 0.0]) == 0.0
    assert mlr_stat([0.5]) == pytest.approx(-0.6931, abs=1e-4)
    with pytest.raises(DegenerateError):
        mlr_stat([1.0])
