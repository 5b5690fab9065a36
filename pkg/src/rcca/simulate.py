"""Data-generating processes and the Monte Carlo size/power harness."""
from __future__ import annotations

import csv
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cca_core import DEFAULT_T
from .errors import ParameterError, RccaError
from .testing import METHODS

NULL_FAMILIES = ("null_a", "null_b_sparse", "null_c_ar", "null_d_factorcov")
ALT_FAMILIES = ("factor_alt", "powerdep", "arch")
SP_THETA = 0.2
AR_PHI = 0.8
FACTORCOV_RANK = 3
LOADING_MEAN = 0.8


@dataclass(frozen=True)
class DgpSpec:
    """``param`` is r for factor families, k for powerdep, (a0, a1) for arch.

    ``decoupled`` keeps the marginal laws of an alternative but draws the
    shared component independently for X and Y, giving its matched null.
    """

    family: str
    p1: int
    p2: int
    n: int
    seed: int = 0
    param: object = None
    decoupled: bool = False

    def __post_init__(self):
        if self.family not in NULL_FAMILIES + ALT_FAMILIES:
            raise ParameterError(f"unknown DGP family {self.family!r}")
        if min(self.p1, self.p2, self.n) < 1:
            raise ParameterError("dimensions must be positive")
        if self.family == "factor_alt" and not int(self.param or 0) >= 1:
            raise ParameterError("factor_alt needs r >= 1")
        if self.family == "powerdep" and not int(self.param or 0) >= 1:
            raise ParameterError("powerdep needs k >= 1")
        if self.family == "arch":
            a0, a1 = self.param
            if a0 < 0 or a1 < 0:
                raise ParameterError("arch needs a0, a1 >= 0")

    @property
    def is_null(self):
        return self.family in NULL_FAMILIES or self.decoupled

    def null(self):
        """Matched null of an alternative family."""
        if self.family in NULL_FAMILIES:
            return self
        return replace(self, decoupled=True)


# ------------------------------------------------------------ covariances
def sigma_sp(p, theta=SP_THETA):
    S = np.eye(p)
    k = int(math.floor(p ** (1.0 / 3.0) + 1e-12))
    S[0, 1:k] = theta
    S[1:k, 0] = theta
    return S


def sigma_ar(p, phi=AR_PHI):
    idx = np.arange(p)
    return phi ** np.abs(idx[:, None] - idx[None, :]) / (1.0 - phi ** 2)


def sigma_factorcov(p, r, rng):
    B = rng.normal(1.0, 1.0, size=(r, p)) / np.sqrt(p)
    return B.T @ B + np.eye(p)


def _sqrtm(S):
    vals, vecs = np.linalg.eigh(S)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def _fixed_rng(spec):
    """Generator for quantities held fixed across replicates (loadings)."""
    return np.random.default_rng(np.random.SeedSequence([spec.seed, 0x5EED]))


def replicate_rng(spec, i):
    return np.random.default_rng(np.random.SeedSequence([spec.seed, int(i) + 1]))


def population_sigma_x(spec):
    """Covariance of X (None for the identity)."""
    fam, p = spec.family, spec.p1
    if fam == "null_b_sparse":
        return sigma_sp(p)
    if fam == "null_c_ar":
        return sigma_ar(p)
    if fam == "null_d_factorcov":
        r = int(spec.param) if spec.param is not None else FACTORCOV_RANK
        return sigma_factorcov(p, r, _fixed_rng(spec))
    if fam == "factor_alt":
        L1, _ = factor_loadings(spec)
        return L1 @ L1.T + np.eye(p)
    return None


def factor_loadings(spec):
    rng = _fixed_rng(spec)
    r = int(spec.param)
    L1 = rng.normal(LOADING_MEAN, 1.0, size=(spec.p1, r)) / np.sqrt(spec.p1)
    L2 = rng.normal(LOADING_MEAN, 1.0, size=(spec.p2, r)) / np.sqrt(spec.p2)
    return L1, L2


# -------------------------------------------------------------- generation
def generate(spec, replicate=0, rng=None):
    """Draw (X, Y) as p x n matrices for one replicate."""
    rng = rng if rng is not None else replicate_rng(spec, replicate)
    p1, p2, n = spec.p1, spec.p2, spec.n
    fam = spec.family
    if fam in NULL_FAMILIES:
        S = population_sigma_x(spec)
        W = rng.standard_normal((p1, n))
        X = W if S is None else _sqrtm(S) @ W
        return X, rng.standard_normal((p2, n))
    if fam == "factor_alt":
        L1, L2 = factor_loadings(spec)
        r = L1.shape[1]
        f = rng.standard_normal((r, n))
        g = rng.standard_normal((r, n)) if spec.decoupled else f
        X = L1 @ f + rng.standard_normal((p1, n))
        Y = L2 @ g + rng.standard_normal((p2, n))
        return X, Y
    X = rng.standard_normal((p1, n))
    src = rng.standard_normal((p1, n)) if spec.decoupled else X
    q = min(p1, p2)
    if fam == "powerdep":
        k = int(spec.param)
        Y = rng.standard_normal((p2, n))
        Y[:q] = src[:q] ** (2 * k) - even_moment(k)
        return X, Y
    a0, a1 = spec.param
    Y = rng.standard_normal((p2, n))
    Y[:q] *= np.sqrt(a0 + a1 * src[:q] ** 2)
    return X, Y


def even_moment(k):
    """E Z^{2k} for standard normal Z."""
    return math.factorial(2 * k) / (2 ** k * math.factorial(k))


def arch_preprocess(X, Y, standardize=True):
    """Elementwise squares, then each row centered and scaled to unit variance.

    ``standardize=False`` returns the raw squares.
    """
    def sq(A):
        B = np.asarray(A, dtype=float) ** 2
        if not standardize:
            return B
        B = B - B.mean(axis=1, keepdims=True)
        sd = B.std(axis=1, keepdims=True)
        return B / np.where(sd > 0, sd, 1.0)
    return sq(X), sq(Y)


# ---------------------------------------------------------------- harness
@dataclass
class MonteCarloResult:
    K: int
    rejections: int
    rate: float
    se: float
    seeds: list = field(default_factory=list)
    z_scores: np.ndarray = field(default_factory=lambda: np.zeros(0))
    failures: int = 0
    threshold: float | None = None


def _method_kwargs(spec, method, t):
    if method in ("tn", "tn-sparse", "tn-split"):
        kw = {"t": t}
        if method == "tn":
            kw["Sigma"] = population_sigma_x(spec)
        return kw
    return {}


def _one(args):
    spec, method, i, t, preprocess, extra = args
    X, Y = generate(spec, i)
    if preprocess in ("square", "square-raw"):
        X, Y = arch_preprocess(X, Y, standardize=preprocess == "square")
    elif preprocess is not None:
        raise ParameterError(f"unknown preprocessing {preprocess!r}")
    kw = _method_kwargs(spec, method, t)
    kw.update(extra or {})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            rep = METHODS[method](X, Y, **kw)
        except RccaError:
            return np.nan
    return rep.z_score


def _workers(requested):
    cap = os.environ.get("RCCA_THREADS")
    n = requested if requested is not None else 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def z_scores(spec, method, K, t=DEFAULT_T, preprocess=None, workers=None, extra=None):
    """Standardized statistics for replicates 0..K-1 (NaN where a test fails)."""
    if method not in METHODS:
        raise ParameterError(f"unknown method {method!r}")
    jobs = [(spec, method, i, t, preprocess, extra) for i in range(K)]
    nw = _workers(workers)
    if nw == 1:
        out = [_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=nw) as ex:
            out = list(ex.map(_one, jobs, chunksize=max(1, K // (4 * nw))))
    return np.asarray(out, dtype=float)


def _result(reject, z, spec, K, threshold=None):
    ok = np.isfinite(z)
    rej = int(np.sum(reject & ok))
    rate = rej / K
    return MonteCarloResult(K, rej, rate, math.sqrt(rate * (1 - rate) / K),
                            [int(spec.seed), K], z, int(np.sum(~ok)), threshold)


def two_sided_p(z):
    from scipy.special import erfc
    return erfc(np.abs(z) / math.sqrt(2.0))


def empirical_size(spec, method, K=1000, alpha=0.05, t=DEFAULT_T, preprocess=None,
                   workers=None, extra=None):
    """Fraction of null replicates whose two-sided p-value falls below alpha."""
    if not spec.is_null:
        raise ParameterError("empirical_size needs a null family")
    z = z_scores(spec, method, K, t, preprocess, workers, extra)
    with np.errstate(invalid="ignore"):
        reject = two_sided_p(z) < alpha if alpha < 1 else np.ones(K, dtype=bool)
    return _result(reject, z, spec, K)


def empirical_power(spec, method, K=1000, alpha=0.05, t=DEFAULT_T, calibration="empirical",
                    two_sided=False, preprocess=None, null_K=None, workers=None, extra=None,
                    null="matched"):
    """Rejection rate under an alternative.

    With ``calibration="empirical"`` the threshold is the (1 - alpha) quantile
    of the null z-scores from the matched null; the default rejects in the
    upper tail, ``two_sided=True`` compares |z| instead.  ``"asymptotic"``
    uses normal quantiles.

    ``null="matched"`` calibrates on the decoupled version of ``spec`` with
    the same preprocessing.  ``null="gaussian"`` calibrates on independent
    standard normal X, Y of the same dimensions without preprocessing; for
    squared ARCH data this threshold does not hold its level.
    """
    z_alt = z_scores(spec, method, K, t, preprocess, workers, extra)
    stat = np.abs(z_alt) if two_sided else z_alt
    if calibration == "empirical":
        if null == "matched":
            ns, npre = replace(spec.null(), seed=spec.seed + 7919), preprocess
        elif null == "gaussian":
            ns, npre = DgpSpec("null_a", spec.p1, spec.p2, spec.n, spec.seed + 7919), None
        else:
            raise ParameterError(f"unknown null calibration {null!r}")
        z0 = z_scores(ns, method, null_K or K, t, npre, workers, extra)
        z0 = z0[np.isfinite(z0)]
        thr = float(np.quantile(np.abs(z0) if two_sided else z0, 1 - alpha))
    elif calibration == "asymptotic":
        from scipy.stats import norm
        thr = float(norm.ppf(1 - alpha / 2) if two_sided else norm.ppf(1 - alpha))
    else:
        raise ParameterError(f"unknown calibration {calibration!r}")
    with np.errstate(invalid="ignore"):
        reject = stat >= thr
    return _result(reject, z_alt, spec, K, thr)


TABLE_COLUMNS = ("p1", "p2", "n", "method", "dgp", "param", "K", "rate", "se")


def table_row(spec, method, res):
    return {"p1": spec.p1, "p2": spec.p2, "n": spec.n, "method": method, "dgp": spec.family,
            "param": "" if spec.param is None else str(spec.param), "K": res.K,
            "rate": f"{res.rate:.4f}", "se": f"{res.se:.4f}"}


def write_table(rows, path):
    """Write table rows to CSV atomically (temporary file, then rename)."""
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TABLE_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow(row)
    os.replace(tmp, path)


# ------------------------------------------------------------ table specs
CLASSICAL_ROWS = [(10 * k, 20 * k, 40 * k) for k in range(1, 26)]
CLASSICAL_ROWS[1] = (20, 30, 60)
REGULARIZED_ROWS = [(100, 50, 80), (140, 70, 120), (180, 90, 150), (200, 100, 170),
                    (240, 120, 180), (280, 140, 250), (320, 160, 270), (360, 180, 290),
                    (400, 190, 300), (440, 220, 330), (480, 240, 350)]
REGULARIZED_POWER_ROWS = REGULARIZED_ROWS[:8] + [(400, 200, 310)] + REGULARIZED_ROWS[9:]
POWER_ROWS = [(10, 20, 40)] + [(10 + 20 * k, 20 + 40 * k, 40 + 80 * k) for k in range(1, 13)]
ARCH_PARAMS = [(0.9, 0.1), (0.8, 0.2), (0.7, 0.3), (0.6, 0.4), (0.5, 0.5)]


@dataclass(frozen=True)
class TableSpec:
    """Columns are (family, method, param, preprocess); kind is size or power."""

    number: int
    kind: str
    columns: tuple
    rows: tuple


TABLES = {
    1: TableSpec(1, "size", (("null_a", "sn", None, None), ("null_b_sparse", "sn", None, None),
                             ("null_a", "mlr", None, None), ("null_b_sparse", "mlr", None, None)),
                 tuple(CLASSICAL_ROWS)),
    2: TableSpec(2, "size", (("null_a", "tn", None, None),
                             ("null_b_sparse", "tn-sparse", None, None),
                             ("null_c_ar", "tn-split", None, None),
                             ("null_d_factorcov", "tn-split", None, None)),
                 tuple(REGULARIZED_ROWS)),
    3: TableSpec(3, "power", tuple(("factor_alt", "sn", r, None) for r in (3, 5, 7, 10)),
                 tuple(POWER_ROWS)),
    4: TableSpec(4, "power", tuple(("factor_alt", "tn-split", r, None) for r in (3, 5, 7, 10)),
                 tuple(REGULARIZED_POWER_ROWS)),
    5: TableSpec(5, "power", tuple(("powerdep", "sn", k, None) for k in (2, 5)), tuple(POWER_ROWS)),
    6: TableSpec(6, "power", tuple(("powerdep", "tn", k, None) for k in (2, 5)),
                 tuple(REGULARIZED_POWER_ROWS)),
    7: TableSpec(7, "power", tuple(("arch", "sn", a, "square") for a in ARCH_PARAMS),
                 tuple(POWER_ROWS)),
    8: TableSpec(8, "power", tuple(("arch", "tn", a, "square") for a in ARCH_PARAMS),
                 tuple(REGULARIZED_POWER_ROWS)),
}


def run_table(number, rows=None, K=1000, alpha=0.05, seed=0, t=DEFAULT_T, workers=None,
              families=None):
    """Rates for every (row, column) of a size or power table."""
    if number not in TABLES:
        raise ParameterError(f"no table {number}; choose from {sorted(TABLES)}")
    spec_t = TABLES[number]
    out = []
    for p1, p2, n in (rows or spec_t.rows):
        for fam, method, param, pre in spec_t.columns:
            if families and fam not in families:
                continue
            spec = DgpSpec(fam, p1, p2, n, seed=seed, param=param)
            if spec_t.kind == "size":
                res = empirical_size(spec, method, K, alpha, t, pre, workers)
            else:
                res = empirical_power(spec, method, K, alpha, t, preprocess=pre, workers=workers)
            out.append(table_row(spec, method, res))
    return out
