import csv

import numpy as np
import pytest

from rcca.errors import ParameterError
from rcca.simulate import (ARCH_PARAMS, POWER_ROWS, TABLES, DgpSpec, arch_preprocess,
                           empirical_power, empirical_size, even_moment, generate,
                           population_sigma_x, run_table, sigma_ar, sigma_sp, write_table,
                           z_scores)


def test_even_moment():
    assert [even_moment(k) for k in (1, 2, 5)] == [1, 3, 945]


def test_null_a_cross_correlation_is_small():
    X, Y = generate(DgpSpec("null_a", 20, 30, 2000, seed=1))
    C = X @ Y.T / 2000
    assert np.abs(C).max() < 4 / np.sqrt(2000) * 1.5


def test_covariance_builders():
    S = sigma_sp(64)
    assert np.all(np.linalg.eigvalsh(S) > 0)
    assert S[0, 1] == pytest.approx(0.2) and S[0, 3] == pytest.approx(0.2)
    assert S[0, 4] == 0 and S[1, 2] == 0
    A = sigma_ar(5)
    assert A[0, 3] == pytest.approx(0.8 ** 3 / (1 - 0.8 ** 2))
    assert population_sigma_x(DgpSpec("null_a", 5, 5, 10)) is None


def test_dgp_covariance_matches_population():
    spec = DgpSpec("null_c_ar", 6, 3, 40000, seed=2)
    X, _ = generate(spec)
    S = population_sigma_x(spec)
    # entrywise sd is about sqrt(2 / n) times the variance scale
    assert np.allclose(X @ X.T / spec.n, S, atol=6 * np.sqrt(2 / spec.n) * S[0, 0])


def test_powerdep_is_uncorrelated_but_dependent():
    spec = DgpSpec("powerdep", 10, 20, 20000, seed=3, param=2)
    X, Y = generate(spec)
    corr = np.corrcoef(X[0], Y[0])[0, 1]
    assert abs(corr) < 4 / np.sqrt(spec.n)
    assert Y[:10].mean() == pytest.approx(0.0, abs=0.5)
    assert np.corrcoef(X[0] ** 2, Y[0])[0, 1] > 0.5


def test_arch_squares_are_correlated():
    X, Y = generate(DgpSpec("arch", 10, 20, 20000, seed=4, param=(0.5, 0.5)))
    assert abs(np.corrcoef(X[0], Y[0])[0, 1]) < 4 / np.sqrt(20000)
    assert np.corrcoef(X[0] ** 2, Y[0] ** 2)[0, 1] > 0.1


def test_arch_preprocess_rows():
    rng = np.random.default_rng(0)
    X, Y = rng.standard_normal((5, 100)), rng.standard_normal((7, 100))
    A, B = arch_preprocess(X, Y)
    assert np.allclose(A.mean(axis=1), 0) and np.allclose(B.std(axis=1), 1)
    A, B = arch_preprocess(X, Y, standardize=False)
    assert np.allclose(A, X ** 2)


def test_decoupled_null_keeps_marginals_but_breaks_dependence():
    spec = DgpSpec("arch", 10, 20, 20000, seed=4, param=(0.5, 0.5))
    X, Y = generate(spec.null())
    assert spec.null().is_null and not spec.is_null
    assert abs(np.corrcoef(X[0] ** 2, Y[0] ** 2)[0, 1]) < 4 / np.sqrt(20000)
    assert np.var(Y[0]) == pytest.approx(0.5 + 0.5, rel=0.1)


def test_generation_is_reproducible():
    spec = DgpSpec("factor_alt", 10, 20, 40, seed=5, param=3)
    a, b = generate(spec, 7), generate(spec, 7)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert not np.array_equal(generate(spec, 8)[0], a[0])
    # loadings are fixed per spec and shared by every replicate
    assert not np.array_equal(generate(DgpSpec("factor_alt", 10, 20, 40, seed=6, param=3))[0],
                              a[0])


def test_spec_validation():
    with pytest.raises(ParameterError):
        DgpSpec("nope", 1, 1, 1)
    with pytest.raises(ParameterError):
        DgpSpec("factor_alt", 5, 5, 10)
    with pytest.raises(ParameterError):
        DgpSpec("arch", 5, 5, 10, param=(-1.0, 0.5))
    with pytest.raises(ParameterError):
        empirical_size(DgpSpec("powerdep", 5, 10, 20, param=2), "sn", K=5)
    with pytest.raises(ParameterError):
        z_scores(DgpSpec("null_a", 5, 10, 20), "bogus", K=2)
    with pytest.raises(ParameterError):
        z_scores(DgpSpec("null_a", 5, 10, 20), "sn", K=2, preprocess="cube")


def test_alpha_one_rejects_everything():
    res = empirical_size(DgpSpec("null_a", 5, 10, 20), "sn", K=20, alpha=1.0)
    assert res.rate == 1.0 and res.se == 0.0


def test_size_result_is_reproducible_and_serial_equals_parallel():
    spec = DgpSpec("null_a", 10, 20, 40, seed=9)
    a = empirical_size(spec, "sn", K=40)
    b = empirical_size(spec, "sn", K=40, workers=2)
    assert np.array_equal(a.z_scores, b.z_scores)
    assert a.rejections == b.rejections


def test_power_increases_with_factor_rank():
    rates = [empirical_power(DgpSpec("factor_alt", 20, 40, 80, seed=0, param=r), "sn",
                             K=100).rate for r in (1, 10)]
    assert rates[1] > rates[0]


def test_raw_statistic_misses_arch_dependence():
    spec = DgpSpec("arch", 20, 40, 80, seed=0, param=(0.5, 0.5))
    raw = empirical_power(spec, "sn", K=200)
    squared = empirical_power(spec, "sn", K=200, preprocess="square")
    assert raw.rate < 0.05 + 3 * np.sqrt(0.05 * 0.95 / 200)
    assert squared.rate > raw.rate + 0.2


def test_asymptotic_calibration_threshold():
    res = empirical_power(DgpSpec("factor_alt", 10, 20, 40, param=3), "sn", K=20,
                          calibration="asymptotic")
    assert res.threshold == pytest.approx(1.6448536, rel=1e-6)
    with pytest.raises(ParameterError):
        empirical_power(DgpSpec("factor_alt", 10, 20, 40, param=3), "sn", K=5,
                        calibration="magic")


def test_table_specs():
    assert set(TABLES) == set(range(1, 9))
    assert POWER_ROWS[1] == (30, 60, 120)
    assert len(ARCH_PARAMS) == 5 and TABLES[7].columns[0][3] == "square"
    with pytest.raises(ParameterError):
        run_table(9)


def test_run_table_and_write(tmp_path):
    rows = run_table(1, rows=[(10, 20, 40)], K=30, families=("null_a",))
    assert {r["method"] for r in rows} == {"sn", "mlr"}
    path = tmp_path / "t.csv"
    write_table(rows, path)
    with open(path) as fh:
        back = list(csv.DictReader(fh))
    assert back[0]["rate"] == rows[0]["rate"] and back[0]["p1"] == "10"


@pytest.mark.slow
@pytest.mark.parametrize("family,method,dims", [("null_a", "sn", (50, 100, 200)),
                                                ("null_a", "mlr", (10, 20, 40)),
                                                ("null_a", "tn", (100, 50, 80)),
                                                ("null_b_sparse", "tn-sparse", (140, 70, 120)),
                                                ("null_c_ar", "tn-split", (180, 90, 150))])
def test_size_is_valid(family, method, dims):
    res = empirical_size(DgpSpec(family, *dims, seed=1), method, K=1000)
    assert 0.03 <= res.rate <= 0.07
    assert res.failures == 0
