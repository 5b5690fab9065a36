import numpy as np
import pytest
from scipy.optimize import linprog
from scipy.stats import kstest

from rcca.cca_core import AspectRatios
from rcca.errors import DegenerateError, InternalError, ParameterError
from rcca.estimators import (Dictionary, cv_threshold, elkaroui_estimate, elkaroui_fit,
                             fit_from_transform, mhat_Ht, prop5_estimators, round_grid,
                             simplex_lp, solve_mhat_n1t, solve_mhat_nt, threshold_cov)
from rcca.lsd import CompanionMP, RegularizedLaw, solve_m_1t, solve_m_nt
from rcca.spectral import SpectralMeasure


def random_lp(rng):
    nv, mu, me = rng.integers(2, 9), rng.integers(1, 8), rng.integers(0, 3)
    c = rng.normal(size=nv)
    A = np.vstack([rng.normal(size=(mu, nv)), np.eye(nv)])
    b = np.concatenate([rng.normal(size=mu) + 1, np.full(nv, 3.0)])
    Ae = rng.normal(size=(me, nv))
    be = Ae @ rng.random(nv)
    return c, A, b, (Ae if me else None), (be if me else None)


def test_simplex_matches_highs_on_random_lps():
    rng = np.random.default_rng(0)
    for _ in range(150):
        c, A, b, Ae, be = random_lp(rng)
        ref = linprog(c, A, b, Ae, be, method="highs")
        if ref.status != 0:
            continue
        res = simplex_lp(c, A, b, Ae, be)
        assert res.status == 0
        assert res.objective == pytest.approx(ref.fun, abs=1e-7)
        assert np.all(res.x >= -1e-9)
        assert np.all(A @ res.x <= b + 1e-8)


def test_simplex_hand_example():
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6
    res = simplex_lp(np.array([-1.0, -1.0]), np.array([[1.0, 2.0], [3.0, 1.0]]),
                     np.array([4.0, 6.0]))
    assert res.x == pytest.approx([1.6, 1.2], abs=1e-12)
    assert res.objective == pytest.approx(-2.8, abs=1e-12)


def test_simplex_infeasible_raises():
    with pytest.raises(InternalError, match="infeasible"):
        simplex_lp(np.array([1.0]), np.array([[1.0]]), np.array([1.0]),
                   np.array([[1.0]]), np.array([2.0]))


def test_lp_recovers_dictionary_mixtures_exactly():
    rng = np.random.default_rng(0)
    D = Dictionary(0.3, 5.0)
    z = np.linspace(0.15, 7.5, 20) + 0.5j
    worst = 0.0
    for _ in range(100):
        w = np.zeros(len(D))
        w[rng.choice(len(D), 3, replace=False)] = rng.dirichlet(np.ones(3))
        s = CompanionMP(0.3, D.measure(w)).s(z)
        worst = max(worst, fit_from_transform(z, s, 0.3, D).objective)
    assert worst < 1e-9


def test_round_grid_contains_round_values():
    g = round_grid(0.37, 4.2, 30)
    assert np.any(np.isclose(g, 1.0, atol=1e-12)) and np.any(np.isclose(g, 3.0, atol=1e-12))
    assert g.min() >= 0.37 and g.max() <= 4.2
    steps = np.diff(g)
    assert np.allclose(steps, steps[0])


def test_dictionary_rejects_empty_range():
    with pytest.raises(DegenerateError):
        Dictionary(1.0, 1.0)


def test_dictionary_integrals_match_atoms():
    D = Dictionary(0.5, 2.0)
    s = np.array([0.3 + 0.2j])
    t = D.elements[0].atoms[0][0]
    assert D.integrals(s)[0, 0] == pytest.approx(t / (1 + t * s[0]), rel=1e-12)


def test_threshold_cov_zeroes_small_entries_and_keeps_diagonal():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((30, 200))
    T = threshold_cov(X, 1.0)
    S = X @ X.T / 200
    small = np.abs(S) < T.threshold
    np.fill_diagonal(small, False)
    assert np.all(T.matrix[small] == 0)
    assert np.allclose(np.diag(T.matrix), 1.0)
    assert T.threshold == pytest.approx(np.sqrt(np.log(30) / 200))


def test_cv_threshold_is_reproducible_and_on_grid():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((40, 120))
    M = cv_threshold(X, seed=1)
    assert M == cv_threshold(X, seed=1)
    assert M in np.arange(1, 13) * 0.25
    with pytest.raises(ParameterError):
        cv_threshold(X[:, :10])


def test_cv_threshold_keeps_strong_band():
    rng = np.random.default_rng(4)
    p, n = 40, 400
    Sig = np.eye(p) + 0.4 * (np.eye(p, k=1) + np.eye(p, k=-1))
    X = np.linalg.cholesky(Sig) @ rng.standard_normal((p, n))
    T = threshold_cov(X, cv_threshold(X))
    band = np.abs(np.diag(T.matrix, 1))
    assert np.mean(band > 0) > 0.9
    assert np.mean(T.matrix[np.triu_indices(p, 3)] == 0) > 0.9


def test_plugin_centering_solvers_agree_with_population():
    Sig = np.diag(np.r_[np.ones(20), 3 * np.ones(20)])
    H = SpectralMeasure(atoms=[(1.0, 0.5), (3.0, 0.5)])
    assert solve_mhat_nt(Sig, 40.0, 0.8) == pytest.approx(solve_m_nt(40.0, 0.8, H)[0], rel=1e-10)
    assert solve_mhat_n1t(Sig, 40.0, 2.0) == pytest.approx(solve_m_1t(40.0, 2.0, H)[0], rel=1e-10)


def test_mhat_ht_errors():
    H = SpectralMeasure(atoms=[(1.0, 1.0)])
    with pytest.raises(ParameterError):
        mhat_Ht(np.array([1j]), H, 40.0, 1.2)


def test_elkaroui_identity_and_two_atoms():
    rng = np.random.default_rng(0)
    p, n = 200, 800
    X = rng.standard_normal((p, n))
    H = elkaroui_estimate(X)
    assert H.mean() == pytest.approx(1.0, abs=0.05)
    tau = np.r_[np.ones(p // 2), 3 * np.ones(p // 2)]
    X2 = np.sqrt(tau)[:, None] * rng.standard_normal((p, n))
    fit = elkaroui_fit(X2)
    low = fit.measure.cdf(2.0)
    assert low == pytest.approx(0.5, abs=0.1)
    assert fit.measure.mean() == pytest.approx(2.0, abs=0.1)
    assert fit.weights.min() >= 0 and fit.weights.sum() == pytest.approx(1.0)


def test_elkaroui_ks_against_sample_free_law():
    # the fit should track the population much better than the sample ESD does
    rng = np.random.default_rng(0)
    p, n = 200, 800
    tau = np.r_[np.ones(p // 2), 3 * np.ones(p // 2)]
    X = np.sqrt(tau)[:, None] * rng.standard_normal((p, n))
    fit = elkaroui_estimate(X)
    grid = np.linspace(0.5, 3.5, 301)
    pop = np.where(grid < 1, 0, np.where(grid < 3, 0.5, 1.0))
    est = np.array([fit.cdf(g) for g in grid])
    ev = np.linalg.eigvalsh(X @ X.T / n)
    samp = np.searchsorted(np.sort(ev), grid, side="right") / p
    assert np.max(np.abs(est - pop)) < np.max(np.abs(samp - pop))


def test_elkaroui_degenerate_input():
    with pytest.raises(DegenerateError):
        elkaroui_fit(np.zeros((5, 40)))


def test_prop5_plugins_match_population_transforms():
    rng = np.random.default_rng(0)
    p1, p2, n = 400, 200, 800
    X, Y = rng.standard_normal((p1, n)), rng.standard_normal((p2, n))
    z = np.array([0.05 + 0.05j, 0.1 + 0.1j, 0.3 + 0.2j])
    H = SpectralMeasure(atoms=[(1.0, 1.0)])
    P = prop5_estimators(z, X, Y, 40.0, H)
    law = RegularizedLaw(40.0, AspectRatios(p1, p2, n), H)
    assert np.allclose(P.m_y, law.m_y(z), rtol=0.01)
    v3, v4 = CompanionMP(p1 / n, H).varpi(CompanionMP(p1 / n, H).s(z))
    assert np.allclose(P.varpi3, v3, rtol=0.02, atol=0.02)
    assert np.allclose(P.varpi4, v4, rtol=0.02, atol=0.02)
    assert P.s(0, 0) == 0
    assert np.allclose(P.mbar_y, -(1 - law.y1) / z + law.y1 * P.m_y)
