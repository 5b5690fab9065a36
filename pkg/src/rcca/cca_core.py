"""Cross products, squared canonical correlations and raw statistics.

Data matrices are p x n with columns as observations.  Cross products are
formed without mean-centering.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateError, DimensionError, IllConditionedError,
                     NumericalError, ParameterError, RegimeError)

DEFAULT_T = 40.0
PINV_TOL = 1e-12
CLAMP_TOL = 1e-10
COND_MAX = 1e12


@dataclass(frozen=True)
class AspectRatios:
    """Dimension ratios and the derived F-matrix quantities."""

    p1: int
    p2: int
    n: int

    @property
    def c1n(self):
        return self.p1 / self.n

    @property
    def c2n(self):
        return self.p2 / self.n

    @property
    def ybar1(self):
        return self.c1n / (1.0 - self.c2n)

    @property
    def ybar2(self):
        return self.c1n / self.c2n

    @property
    def h(self):
        return float(np.sqrt(self.ybar1 + self.ybar2 - self.ybar1 * self.ybar2))

    @property
    def a1(self):
        return (1.0 - self.h) ** 2 / (1.0 - self.ybar2) ** 2

    @property
    def a2(self):
        return (1.0 + self.h) ** 2 / (1.0 - self.ybar2) ** 2

    @property
    def q(self):
        return self.c2n / (1.0 - self.c2n)

    @property
    def y1(self):
        return self.c1n / self.c2n

    @property
    def y2(self):
        return self.c1n / (1.0 - self.c2n)

    def as_dict(self):
        out = {"p1": self.p1, "p2": self.p2, "n": self.n,
               "c1n": self.c1n, "c2n": self.c2n}
        if self.c2n < 1:
            out.update(q=self.q, y1=self.y1, y2=self.y2)
        return out


@dataclass(frozen=True)
class SquaredCorrelations:
    values: np.ndarray
    source: str
    t: float | None = None

    @property
    def p1(self):
        return self.values.size


def as_data_matrix(A, name="X"):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[None, :]
    if A.ndim != 2:
        raise DimensionError(f"{name} must be a p x n matrix")
    p, n = A.shape
    if p < 1 or n < 2:
        raise DimensionError(f"{name} needs p >= 1 and n >= 2, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericalError(f"{name} has non-finite entries")
    return A


def cross_products(X, Y):
    """Uncentered cross products (Axx, Ayy, Axy) scaled by 1/n."""
    X = as_data_matrix(X, "X")
    Y = as_data_matrix(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise DimensionError(f"sample sizes differ: {X.shape[1]} vs {Y.shape[1]}")
    n = X.shape[1]
    Axx = X @ X.T / n
    Ayy = Y @ Y.T / n
    Axy = X @ Y.T / n
    return {"Axx": 0.5 * (Axx + Axx.T), "Ayy": 0.5 * (Ayy + Ayy.T), "Axy": Axy}


def moore_penrose(M, tol=PINV_TOL):
    """Pseudoinverse of a symmetric PSD matrix by spectral truncation."""
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise NumericalError("matrix has non-finite entries")
    vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
    lmax = vals.max() if vals.size else 0.0
    if lmax <= 0:
        return np.zeros_like(M)
    keep = vals > tol * lmax
    inv = np.zeros_like(vals)
    inv[keep] = 1.0 / vals[keep]
    return (vecs * inv) @ vecs.T


def _projector(M, tol=PINV_TOL):
    """Return (V, d) with M^- = V diag(d) V^T restricted to the range of M."""
    vals, vecs = np.linalg.eigh(M)
    keep = vals > tol * max(vals.max(), 0.0)
    return vecs[:, keep], 1.0 / vals[keep]


def _clamp(vals, upper=1.0):
    vals = np.array(vals, dtype=float)
    if np.any(vals < -CLAMP_TOL) or np.any(vals > upper + CLAMP_TOL):
        raise NumericalError(
            f"squared correlations outside [0, 1]: min={vals.min()}, max={vals.max()}")
    vals[vals < 0] = 0.0
    vals[vals > 1.0] = 1.0
    return np.sort(vals)[::-1]


def _inv_sqrt_spd(A):
    vals, vecs = np.linalg.eigh(A)
    if vals.min() <= 0 or vals.max() / vals.min() > COND_MAX:
        raise IllConditionedError(
            f"matrix not numerically invertible (eigenvalues {vals.min():.3g}..{vals.max():.3g})")
    return (vecs / np.sqrt(vals)) @ vecs.T


def _unit_scale(A):
    d = np.diag(A)
    if np.any(d <= 0):
        raise DegenerateError("a row of the data matrix is identically zero")
    return 1.0 / np.sqrt(d)


def classical_sqcorr(X, Y):
    """Eigenvalues of Axx^-1 Axy Ayy^-1 Axy^T via a symmetric congruent form."""
    cp = cross_products(X, Y)
    p1, p2, n = cp["Axx"].shape[0], cp["Ayy"].shape[0], np.shape(X)[-1]
    if p1 >= n or p2 >= n:
        raise RegimeError(f"classical CCA needs p1, p2 < n (got {p1}, {p2}, {n})")
    # unit-diagonal scaling leaves the correlations unchanged and keeps
    # rows of very different magnitude from tripping the condition check
    dx, dy = _unit_scale(cp["Axx"]), _unit_scale(cp["Ayy"])
    Rx = _inv_sqrt_spd(dx[:, None] * cp["Axx"] * dx[None, :])
    Ry = _inv_sqrt_spd(dy[:, None] * cp["Ayy"] * dy[None, :])
    B = Rx @ (dx[:, None] * cp["Axy"] * dy[None, :]) @ Ry
    # singular values of the whitened cross product are the correlations
    r = np.linalg.svd(B, compute_uv=False)
    vals = np.zeros(p1)
    vals[: r.size] = r ** 2
    return SquaredCorrelations(_clamp(vals), "classical")


def regularized_sqcorr(X, Y, t=DEFAULT_T):
    """Eigenvalues of (Axx + tI)^-1 Axy Ayy^- Axy^T."""
    if not (np.isfinite(t) and t > 0):
        raise ParameterError(f"ridge t must be positive, got {t}")
    cp = cross_products(X, Y)
    Axx, Ayy, Axy = cp["Axx"], cp["Ayy"], cp["Axy"]
    p1 = Axx.shape[0]
    vals, vecs = np.linalg.eigh(Axx)
    vals = np.maximum(vals, 0.0)
    Rx = (vecs / np.sqrt(vals + t)) @ vecs.T
    V, d = _projector(Ayy)
    B = Rx @ Axy @ (V * np.sqrt(d))
    r = np.linalg.svd(B, compute_uv=False) if B.size else np.zeros(0)
    out = np.zeros(p1)
    k = min(p1, r.size)
    out[:k] = r[:k] ** 2
    return SquaredCorrelations(_clamp(out), "regularized", float(t))


def trace_stat(r2):
    v = r2.values if isinstance(r2, SquaredCorrelations) else np.asarray(r2, float)
    return float(np.sum(v) / v.size)


def mlr_stat(r2):
    v = r2.values if isinstance(r2, SquaredCorrelations) else np.asarray(r2, float)
    if np.any(v >= 1.0 - 1e-12):
        raise DegenerateError("a squared correlation equals one; log(1 - r^2) undefined")
    return float(np.sum(np.log1p(-v)))
