"""Independence tests built from the spectral statistics and their CLTs."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .cca_core import (DEFAULT_T, AspectRatios, as_data_matrix, classical_sqcorr,
                       mlr_stat, regularized_sqcorr, trace_stat)
from .clt import CltMoments, LogOneMinus, regularized_moments, thm1_cov, thm1_mean
from .errors import BoundaryWarning, DimensionError, ParameterError, RegimeError
from .estimators import cv_threshold, elkaroui_estimate, threshold_cov
from .lsd import as_measure, classical_centering, regularized_centering
from .spectral import SpectralMeasure

SCHEMA_VERSION = 1
LEVELS = (0.01, 0.05, 0.10)


def pvalue(z):
    """Two-sided normal p-value 2(1 - Phi(|z|))."""
    return float(math.erfc(abs(float(z)) / math.sqrt(2.0)))


@dataclass
class TestReport:
    method: str
    statistic_raw: float
    centering: float
    mean: float
    variance: float
    z_score: float
    p_value: float
    reject_at: dict
    p1: int
    diagnostics: dict = field(default_factory=dict)

    # keep pytest from collecting this class
    __test__ = False

    def as_dict(self):
        out = asdict(self)
        out["schema_version"] = SCHEMA_VERSION
        out["reject_at"] = {str(k): bool(v) for k, v in self.reject_at.items()}
        return out

    def to_json(self, **kw):
        return json.dumps(_plain(self.as_dict()), **kw)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _report(method, stat, center, p1, mom: CltMoments, alpha, diag, scale=None):
    """Standardize p1 (stat - center); ``scale`` overrides p1 for split statistics."""
    k = p1 if scale is None else scale
    z = (k * (stat - center) - mom.mean) / math.sqrt(mom.variance)
    p = pvalue(z)
    levels = sorted(set(LEVELS) | {float(alpha)})
    diag = dict(diag)
    diag["moments"] = mom.as_dict()
    return TestReport(method, float(stat), float(center), float(mom.mean), float(mom.variance),
                      float(z), p, {a: p < a for a in levels}, int(p1), diag)


def _check_alpha(alpha):
    if not 0 < alpha <= 1:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha}")


def _pair(X, Y):
    X = as_data_matrix(X, "X")
    Y = as_data_matrix(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise DimensionError(f"sample sizes differ: {X.shape[1]} vs {Y.shape[1]}")
    return X, Y


# ------------------------------------------------------------- classical
@lru_cache(maxsize=256)
def _classical_moments(c1, c2, kind):
    if kind == "trace":
        def phi(x):
            return x
    else:
        phi = LogOneMinus()
    return CltMoments(thm1_mean(phi, c1, c2), thm1_cov(phi, phi, c1, c2), "thm1")


@lru_cache(maxsize=256)
def _classical_center(c1, c2, kind):
    if kind == "trace":
        return classical_centering(lambda x: x, c1, c2).value
    return classical_centering(lambda x: math.log1p(-x), c1, c2).value


def _classical(X, Y, alpha, kind):
    _check_alpha(alpha)
    X, Y = _pair(X, Y)
    swapped = X.shape[0] > Y.shape[0]
    if swapped:
        X, Y = Y, X
    p1, p2, n = X.shape[0], Y.shape[0], X.shape[1]
    if p1 >= n or p2 >= n:
        raise RegimeError(f"classical test needs p1, p2 < n (got {p1}, {p2}, {n})")
    r2 = classical_sqcorr(X, Y)
    c1, c2 = p1 / n, p2 / n
    if kind == "trace":
        stat = trace_stat(r2)
    else:
        stat = mlr_stat(r2) / p1
    center = _classical_center(c1, c2, kind)
    mom = _classical_moments(c1, c2, kind)
    diag = {"ratios": AspectRatios(p1, p2, n).as_dict(), "swapped": swapped}
    return _report("sn" if kind == "trace" else "mlr", stat, center, p1, mom, alpha, diag)


def test_sn(X, Y, alpha=0.05):
    """Trace of squared sample canonical correlations, classical p1, p2 < n."""
    return _classical(X, Y, alpha, "trace")


def test_mlr(X, Y, alpha=0.05):
    """Renormalized likelihood ratio sum log(1 - r_i^2); needs p1 + p2 < n."""
    X, Y = _pair(X, Y)
    if X.shape[0] + Y.shape[0] >= X.shape[1]:
        raise RegimeError("the likelihood ratio statistic needs p1 + p2 < n")
    return _classical(X, Y, alpha, "log")


# ----------------------------------------------------------- regularized
def _measure_key(H):
    return json.dumps(H.to_dict(), sort_keys=True)


@lru_cache(maxsize=128)
def _cached_regularized(t, p1, p2, n, key):
    H = SpectralMeasure.from_json(key)
    r = AspectRatios(p1, p2, n)
    return regularized_centering(t, r, H), regularized_moments(t, r, H)


def _regularized_parts(t, ratios, H):
    H = as_measure(H)
    return _cached_regularized(float(t), ratios.p1, ratios.p2, ratios.n, _measure_key(H))


def test_tn_known_sigma(X, Y, t=DEFAULT_T, Sigma=None, alpha=0.05):
    """Regularized trace test with known population covariance of X.

    ``Sigma`` may be a p1 x p1 matrix, its eigenvalues, a SpectralMeasure or
    None for the identity.
    """
    _check_alpha(alpha)
    X, Y = _pair(X, Y)
    r = AspectRatios(X.shape[0], Y.shape[0], X.shape[1])
    stat = trace_stat(regularized_sqcorr(X, Y, t))
    cen, mom = _regularized_parts(t, r, Sigma)
    diag = {"ratios": r.as_dict(), "t": float(t), "centering_residual": cen.residual,
            "regime": cen.regime}
    return _report("tn", stat, cen.value, r.p1, mom, alpha, diag)


def test_tn_sparse(X, Y, t=DEFAULT_T, alpha=0.05, M=None, seed=0):
    """Regularized test with a thresholded estimate of the covariance of X."""
    _check_alpha(alpha)
    X, Y = _pair(X, Y)
    r = AspectRatios(X.shape[0], Y.shape[0], X.shape[1])
    if M is None:
        M = cv_threshold(X, seed=seed)
    Sig = threshold_cov(X, M)
    vals = np.linalg.eigvalsh(Sig.matrix)
    floor = 1e-8 * max(vals.max(), 1.0)
    H = SpectralMeasure.from_eigenvalues(np.maximum(vals, floor))
    stat = trace_stat(regularized_sqcorr(X, Y, t))
    cen = regularized_centering(t, r, H)
    mom = regularized_moments(t, r, H)
    diag = {"ratios": r.as_dict(), "t": float(t), "M": float(M),
            "threshold": Sig.threshold, "centering_residual": cen.residual,
            "regime": cen.regime, "min_eigenvalue": float(vals.min())}
    return _report("tn-sparse", stat, cen.value, r.p1, mom, alpha, diag)


# -------------------------------------------------------------- splitting
@dataclass(frozen=True)
class SplitPlan:
    """Sample halves and y-row halves used by the split statistics."""

    group1: np.ndarray
    group2: np.ndarray
    y_first: np.ndarray
    y_last: np.ndarray

    @classmethod
    def make(cls, n, p2):
        half = n // 2
        k = p2 // 2
        return cls(np.arange(half), np.arange(half, 2 * half),
                   np.arange(k), np.arange(p2 - k, p2))


def _split_regime(c2n):
    if c2n >= 1:
        return "b"
    if c2n >= 0.5:
        return "c"
    return "a"


def test_tn_split(X, Y, t=DEFAULT_T, alpha=0.05, H=None):
    """Split-sample regularized test whose unknown centerings cancel.

    The population law of X is estimated from the full sample unless ``H``
    is given.
    """
    _check_alpha(alpha)
    X, Y = _pair(X, Y)
    p1, p2, n = X.shape[0], Y.shape[0], X.shape[1]
    if n < 8:
        raise DimensionError(f"split test needs n >= 8, got {n}")
    if p2 < 4:
        raise DimensionError(f"split test needs p2 >= 4, got {p2}")
    c2n = p2 / n
    regime = _split_regime(c2n)
    diag = {"ratios": AspectRatios(p1, p2, n).as_dict(), "t": float(t), "split_regime": regime}
    for edge in (0.5, 1.0):
        if abs(c2n - edge) <= 0.02:
            msg = f"p2/n = {c2n:.3f} is within 0.02 of {edge}; split asymptotics are fragile"
            warnings.warn(msg, BoundaryWarning, stacklevel=2)
            diag["boundary_warning"] = msg
    plan = SplitPlan.make(n, p2)
    Hhat = as_measure(H) if H is not None else elkaroui_estimate(X)
    diag["H_hat"] = Hhat.to_dict()
    X1, X2 = X[:, plan.group1], X[:, plan.group2]
    half = plan.group1.size
    k = plan.y_first.size
    if regime == "a":
        # group 1 keeps 2k y-rows so the two centerings cancel exactly
        rows1 = np.concatenate([plan.y_first, plan.y_last])
        Y1 = Y[np.ix_(rows1, plan.group1)]
        Y2 = Y[np.ix_(plan.y_first, plan.group2)]
        T1 = trace_stat(regularized_sqcorr(X1, Y1, t))
        T2 = trace_stat(regularized_sqcorr(X2, Y2, t))
        m1 = regularized_moments(t, AspectRatios(p1, 2 * k, half), Hhat)
        m2 = regularized_moments(t, AspectRatios(p1, k, half), Hhat)
        mom = CltMoments(m1.mean - 2 * m2.mean, m1.variance + 4 * m2.variance, "thm3a",
                         m1.nodes, {"group1": m1.as_dict(), "group2": m2.as_dict()})
        stat = T1 - 2 * T2
    elif regime == "c":
        Y1 = Y[np.ix_(plan.y_last, plan.group1)]
        Y2 = Y[np.ix_(plan.y_first, plan.group2)]
        T1 = trace_stat(regularized_sqcorr(X1, Y1, t))
        T2 = trace_stat(regularized_sqcorr(X2, Y2, t))
        m = regularized_moments(t, AspectRatios(p1, k, half), Hhat)
        mom = CltMoments(0.0, 2 * m.variance, "thm3a", m.nodes, {"half": m.as_dict()})
        stat = T1 - T2
    else:
        T1 = trace_stat(regularized_sqcorr(X1, Y[:, plan.group1], t))
        T2 = trace_stat(regularized_sqcorr(X2, Y[:, plan.group2], t))
        m = regularized_moments(t, AspectRatios(p1, p2, half), Hhat)
        mom = CltMoments(0.0, 2 * m.variance, "thm3b", m.nodes, {"half": m.as_dict()})
        stat = T1 - T2
    diag["group_statistics"] = [T1, T2]
    return _report("tn-split", stat, 0.0, p1, mom, alpha, diag)


METHODS = {
    "sn": test_sn,
    "mlr": test_mlr,
    "tn": test_tn_known_sigma,
    "tn-sparse": test_tn_sparse,
    "tn-split": test_tn_split,
}
