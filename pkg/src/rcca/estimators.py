"""Data-driven plug-ins for the regularized tests.

Thresholded covariance with a cross-validated threshold, fixed-point
centering estimators, an LP estimate of the population spectral law from
the sample companion transform, and plug-in versions of every transform
entering the regularized CLT moments.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .cca_core import AspectRatios, regularized_sqcorr
from .errors import DegenerateError, InternalError, ParameterError, SingularityError
from .lsd import CompanionMP, RegularizedLaw, solve_m_1t, solve_m_nt
from .spectral import InverseScaledMeasure, SpectralMeasure

__all__ = ["SpectralMeasure", "ThresholdedCovariance", "threshold_cov", "cv_threshold",
           "solve_mhat_nt", "solve_mhat_n1t", "Dictionary", "LpResult", "simplex_lp",
           "elkaroui_fit", "elkaroui_estimate", "fit_from_transform", "companion_esd",
           "mhat_H", "mhat_Ht", "mhat_y2t", "prop5_estimators"]

M_GRID = np.arange(1, 13) * 0.25


# ------------------------------------------------------------ thresholding
@dataclass(frozen=True)
class ThresholdedCovariance:
    matrix: np.ndarray
    threshold: float
    M: float


def _threshold(S, ell):
    T = np.where(np.abs(S) >= ell, S, 0.0)
    np.fill_diagonal(T, 1.0)
    return 0.5 * (T + T.T)


def threshold_cov(X, M):
    """Zero off-diagonal sample covariances below M sqrt(log p / n)."""
    X = np.asarray(X, dtype=float)
    p, n = X.shape
    S = X @ X.T / n
    ell = M * np.sqrt(np.log(p) / n) if p > 1 else 0.0
    return ThresholdedCovariance(_threshold(S, ell), float(ell), float(M))


def cv_threshold(X, grid=M_GRID, splits=20, seed=0):
    """Threshold constant M from random half splits with Frobenius loss."""
    X = np.asarray(X, dtype=float)
    p, n = X.shape
    if n < 20:
        raise ParameterError(f"cross-validation needs n >= 20, got {n}")
    rng = np.random.default_rng(seed)
    half = n // 2
    loss = np.zeros(len(grid))
    for _ in range(splits):
        perm = rng.permutation(n)
        A, B = X[:, perm[:half]], X[:, perm[half:]]
        SA = A @ A.T / A.shape[1]
        SB = B @ B.T / B.shape[1]
        scale = np.sqrt(np.log(p) / A.shape[1])
        for k, M in enumerate(grid):
            loss[k] += np.sum((_threshold(SA, M * scale) - SB) ** 2)
    # first minimizer; ties go to the smallest M
    return float(grid[int(np.argmin(np.round(loss, 12)))])


# --------------------------------------------------------- centering plug-ins
def _esd(S):
    vals = np.linalg.eigvalsh(0.5 * (S + S.T))
    if vals.min() < -1e-10 * max(1.0, vals.max()):
        raise ParameterError("covariance estimate is not positive semi-definite")
    return SpectralMeasure.from_eigenvalues(np.maximum(vals, 1e-12 * vals.max()))


def solve_mhat_nt(Sigma_hat, t, c1n):
    """Scalar fixed point of the c2n < 1 centering with H = ESD(Sigma_hat)."""
    return solve_m_nt(t, c1n, _esd(np.asarray(Sigma_hat, dtype=float)))[0]


def solve_mhat_n1t(Sigma_hat, t, c1n):
    """Scalar fixed point of the c2n >= 1 centering with H = ESD(Sigma_hat)."""
    return solve_m_1t(t, c1n, _esd(np.asarray(Sigma_hat, dtype=float)))[0]


# --------------------------------------------------------------------- LP
@dataclass
class LpResult:
    x: np.ndarray
    objective: float
    status: int
    iterations: int


def _tableau(A, b, cost, basis):
    """Tableau B^-1 [A | b] with reduced costs, rebuilt from the original data."""
    m = A.shape[0]
    Binv_A = np.linalg.solve(A[:, basis], np.hstack([A, b[:, None]]))
    T = np.empty((m + 1, A.shape[1] + 1))
    T[:m] = Binv_A
    T[m, :-1] = cost
    T[m, -1] = 0.0
    T[m] -= cost[basis] @ Binv_A
    return np.ascontiguousarray(T)


def _run(A, b, cost, basis, chunk=64, maxiter=50_000, stop_below=None):
    """Pivot in chunks, refactorizing between chunks to stop error build-up.

    A chunk that fails to lower the objective hands the next one to Bland's
    rule from its first pivot, so anti-cycling survives the refactorization.
    """
    iters = 0
    stall = 20
    last = np.inf
    while iters < maxiter:
        T = _tableau(A, b, cost, basis)
        obj = -T[-1, -1]
        if stop_below is not None and obj <= stop_below:
            return 0, iters
        stall = 0 if obj >= last - 1e-12 * (1.0 + abs(last)) else 20
        last = obj
        status, it = kernels.simplex_pivots(T, basis, chunk, stall=stall)
        iters += it
        if status != 2:
            return status, iters
    return 2, iters


def simplex_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bound=None):
    """Two-phase simplex for min c.x, A_ub x <= b_ub, A_eq x = b_eq, x >= 0.

    Pivoting runs on a dense tableau (``rcca._backend`` kernel) with
    Dantzig pricing and a Bland fallback on degenerate runs; the tableau is
    refactorized from the original data every few dozen pivots.  ``bound``
    is an optional known lower bound on the objective: phase two stops as
    soon as it is reached to within 1e-10.
    """
    c = np.asarray(c, dtype=float)
    nv = c.size
    A_ub = np.zeros((0, nv)) if A_ub is None else np.asarray(A_ub, dtype=float)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    A_eq = np.zeros((0, nv)) if A_eq is None else np.asarray(A_eq, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    mu, me = A_ub.shape[0], A_eq.shape[0]
    m = mu + me
    A = np.zeros((m, nv + mu))
    A[:mu, :nv] = A_ub
    A[:mu, nv:] = np.eye(mu)
    A[mu:, :nv] = A_eq
    b = np.concatenate([b_ub, b_eq])
    scale = np.maximum(np.abs(A).max(axis=1), 1e-300)
    A /= scale[:, None]
    b = b / scale
    neg = b < 0
    A[neg] *= -1
    b = np.abs(b)
    # rows whose slack is feasible start on it; the rest get artificials
    need_art = np.ones(m, dtype=bool)
    need_art[:mu] = neg[:mu]
    art_rows = np.nonzero(need_art)[0]
    na = art_rows.size
    basis = np.empty(m, dtype=np.int64)
    basis[:mu] = nv + np.arange(mu)
    iters = 0
    if na:
        Aart = np.zeros((m, na))
        Aart[art_rows, np.arange(na)] = 1.0
        A1 = np.hstack([A, Aart])
        basis[art_rows] = nv + mu + np.arange(na)
        cost1 = np.concatenate([np.zeros(nv + mu), np.ones(na)])
        status, it = _run(A1, b, cost1, basis, stop_below=1e-10 * (1 + b.max()))
        iters += it
        if status == 2:
            raise InternalError("simplex hit its iteration limit in phase one")
        T = _tableau(A1, b, cost1, basis)
        if -T[-1, -1] > 1e-8 * (1 + b.max()):
            raise InternalError("linear program is infeasible")
        # pivot leftover artificials out; drop rows that are redundant
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= nv + mu:
                row = np.abs(T[r, : nv + mu])
                row[basis[basis < nv + mu]] = 0.0
                if row.max() <= 1e-9:
                    keep[r] = False
                    continue
                basis[r] = int(np.argmax(row))
                T = _tableau(A1, b, cost1, basis)
        A, b, basis = A[keep], b[keep], np.ascontiguousarray(basis[keep])
    cost = np.concatenate([c, np.zeros(mu)])
    stop = None if bound is None else bound + 1e-10 * (1.0 + abs(bound))
    status, it = _run(A, b, cost, basis, stop_below=stop)
    iters += it
    if status == 1:
        raise InternalError("linear program is unbounded")
    if status == 2:
        raise InternalError("simplex hit its iteration limit")
    xb = np.linalg.solve(A[:, basis], b)
    x = np.zeros(nv + mu)
    x[basis] = xb
    x = np.clip(x, 0.0, None)
    return LpResult(x[:nv], float(c @ x[:nv]), status, int(iters))


# ------------------------------------------------- spectral law estimation
def round_grid(lo, hi, n):
    """Uniform grid in [lo, hi] with about n points and a step of 1, 2, 2.5 or 5 x 10^k.

    Anchoring at multiples of a round step makes round population
    eigenvalues exactly representable.
    """
    raw = (hi - lo) / max(n - 1, 1)
    base = 10.0 ** np.floor(np.log10(raw))
    step = next(m * base for m in (1, 2, 2.5, 5, 10) if m * base >= raw * (1 - 1e-12))
    k = np.arange(np.ceil(lo / step - 1e-9), np.floor(hi / step + 1e-9) + 1)
    grid = k * step
    return grid if grid.size else np.array([0.5 * (lo + hi)])


@dataclass
class Dictionary:
    """Atoms, uniform pieces and linear pieces on a grid of [lo, hi]."""

    lo: float
    hi: float
    n_atoms: int = 30
    n_uniform: int = 10
    n_linear: int = 10

    def __post_init__(self):
        if not self.hi > self.lo:
            raise DegenerateError(f"degenerate eigenvalue range [{self.lo}, {self.hi}]")
        self.elements = []
        for t in round_grid(self.lo, self.hi, self.n_atoms):
            self.elements.append(SpectralMeasure(atoms=[(t, 1.0)]))
        edges = np.linspace(self.lo, self.hi, self.n_uniform + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            self.elements.append(SpectralMeasure(uniform=[(a, b, 1.0)]))
        edges = np.linspace(self.lo, self.hi, self.n_linear + 1)
        for s in (1, -1):
            for d, h in zip(edges[:-1], edges[1:]):
                self.elements.append(SpectralMeasure(linear=[(d, h, 1.0, s)]))

    def __len__(self):
        return len(self.elements)

    def measure(self, weights, tol=1e-10):
        atoms, uni, lin = [], [], []
        for w, el in zip(weights, self.elements):
            if w <= tol:
                continue
            atoms += [(t, w) for t, _ in el.atoms]
            uni += [(a, b, w) for a, b, _ in el.uniform]
            lin += [(d, h, w, s) for d, h, _, s in el.linear]
        return SpectralMeasure(atoms, uni, lin).pruned(0.0)

    def integrals(self, s):
        """A[j, i] = int lam/(1 + lam s_j) dM_i, from closed-form transforms."""
        s = np.asarray(s, dtype=complex)
        A = np.empty((s.size, len(self.elements)), dtype=complex)
        u = -1.0 / s
        for i, el in enumerate(self.elements):
            A[:, i] = (1.0 - el.stieltjes(u, check=False) / s) / s
        return A


def companion_esd(X):
    """Eigenvalues of (1/n) X^T X, whose ESD gives the companion transform."""
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    G = X.T @ X / n
    return np.clip(np.linalg.eigvalsh(0.5 * (G + G.T)), 0.0, None)


def _s_hat(z, ev):
    return np.mean(1.0 / (ev[None, :] - np.asarray(z)[:, None]), axis=1)


@dataclass
class ElKarouiFit:
    measure: SpectralMeasure
    objective: float
    weights: np.ndarray
    z: np.ndarray
    dictionary: Dictionary = field(repr=False)


def fit_from_transform(z, s, c1, dictionary):
    """Solve min u with |Re e_j|, |Im e_j| <= u over dictionary weights.

    e_j = 1/s_j + z_j - c1 sum_i w_i int lam/(1 + lam s_j) dM_i.
    """
    z = np.asarray(z, dtype=complex)
    s = np.asarray(s, dtype=complex)
    A = c1 * dictionary.integrals(s)
    b = 1.0 / s + z
    K = len(dictionary)
    rows, rhs = [], []
    for part in (np.real, np.imag):
        Ap, bp = part(A), part(b)
        ones = np.ones((z.size, 1))
        rows.append(np.hstack([-Ap, -ones]))  # b - A w <= u
        rhs.append(-bp)
        rows.append(np.hstack([Ap, -ones]))   # A w - b <= u
        rhs.append(bp)
    A_ub = np.vstack(rows)
    b_ub = np.concatenate(rhs)
    A_eq = np.hstack([np.ones((1, K)), np.zeros((1, 1))])
    cost = np.zeros(K + 1)
    cost[-1] = 1.0
    res = simplex_lp(cost, A_ub, b_ub, A_eq, np.ones(1), bound=0.0)
    w = np.clip(res.x[:K], 0.0, None)
    w /= w.sum()
    return ElKarouiFit(dictionary.measure(w), float(res.x[K]), w, z, dictionary)


def elkaroui_fit(X, J=20, n_atoms=30, n_uniform=10, n_linear=10, imag=0.5):
    """Estimate the population spectral law of the rows of X."""
    X = np.asarray(X, dtype=float)
    p, n = X.shape
    ev = companion_esd(X)
    nz = ev[ev > 1e-10 * max(ev.max(), 1e-300)]
    if nz.size == 0:
        raise DegenerateError("data matrix has no nonzero sample eigenvalue")
    lo, hi = float(nz.min()), float(nz.max())
    if hi - lo <= 1e-12 * max(hi, 1.0):
        raise DegenerateError("sample eigenvalues do not spread; spectrum range is degenerate")
    z = np.linspace(0.5 * lo, 1.5 * hi, J) + 1j * imag
    dictionary = Dictionary(lo, hi, n_atoms, n_uniform, n_linear)
    return fit_from_transform(z, _s_hat(z, ev), p / n, dictionary)


def elkaroui_estimate(X, J=20, **kw):
    return elkaroui_fit(X, J, **kw).measure


# ------------------------------------------------------- transform plug-ins
def mhat_H(z, H):
    return H.stieltjes(np.asarray(z, dtype=complex), 0, check=True)


def mhat_Ht(z, H, t, c2n, deriv=0):
    if not c2n < 1:
        raise ParameterError("the H_t transform needs p2 < n")
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise SingularityError("z = 0")
    return InverseScaledMeasure(H, t / (1.0 - c2n)).stieltjes(z, deriv)


def mhat_y2t(z, H, t, ratios):
    from .lsd import solve_m_y2t
    return solve_m_y2t(z, t, ratios, H).m


@dataclass
class PlugInTransforms:
    """Plug-in values of the transforms entering the regularized moments."""

    z: np.ndarray
    m_y: np.ndarray | None = None
    mbar_y: np.ndarray | None = None
    varpi: np.ndarray | None = None
    m2: np.ndarray | None = None
    m3: np.ndarray | None = None
    g: np.ndarray | None = None
    h: np.ndarray | None = None
    varpi1: np.ndarray | None = None
    varpi2: np.ndarray | None = None
    varpi3: np.ndarray | None = None
    varpi4: np.ndarray | None = None

    def s(self, i, j):
        """s(z_i, z_j) = varpi(z_i) - varpi(z_j); zero on the diagonal."""
        return self.varpi[i] - self.varpi[j]


def prop5_estimators(z, X, Y, t, H_hat):
    """Data-driven transform estimates at contour points z.

    m_y comes from the eigenvalues of T_xy through lam = q z/(1 + q z); the
    H_t pieces come from ``H_hat``; varpi3 and varpi4 use the sample
    companion transform of (1/n) X^T X.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    r = AspectRatios(X.shape[0], Y.shape[0], X.shape[1])
    out = PlugInTransforms(z)
    if r.c2n < 1:
        law = RegularizedLaw(t, r, H_hat)
        q, y1, y2 = r.q, r.y1, r.y2
        lam = regularized_sqcorr(X, Y, t).values
        w = q * z / (1 + q * z)
        mT = np.mean(1.0 / (lam[None, :] - w[:, None]), axis=1)
        out.m_y = q / (1 + q * z) ** 2 * (mT - 1 - q * z)
        out.mbar_y = -(1 - y1) / z + y1 * out.m_y
        m_at_z = law.m_y2t(z)
        out.varpi = 1.0 / (1.0 + y2 * m_at_z)
        zeta = z - out.varpi
        out.m2 = law.mHt(zeta, 1)
        out.m3 = law.mHt(zeta, 2) / 2.0
        wb = -out.mbar_y
        m_w = law.m_y2t(wb)
        mp, mpp = law.y2t_derivs(wb, m_w)
        mb = out.mbar_y
        out.g = y2 * mp / (1 + y2 * m_w) ** 2
        out.h = -mb ** 2 / (1 - y1 * mb ** 2 * mp)
        out.varpi1 = mb ** 3 * mp - 0.5 * mb ** 4 * mpp
        out.varpi2 = mb ** 2 * mp
    ev = companion_esd(X)
    s = _s_hat(z, ev)
    v3, v4 = CompanionMP(r.c1n, H_hat).varpi(s)
    out.varpi3, out.varpi4 = v3, v4
    return out
