"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Every function here has the same signature and return convention as its
compiled twin; ``rcca._backend`` picks one implementation at import.
"""
import math

import numpy as np


def atoms_stieltjes(z, loc, w, deriv=0):
    z = np.asarray(z, dtype=complex)
    return math.factorial(deriv) * np.sum(
        w / (loc - z[..., None]) ** (deriv + 1), axis=-1)


def _damped(step, x0, damping, tol, maxit):
    """Vectorized damped iteration; each node stops once it has converged."""
    x = np.array(x0, dtype=complex)
    iters = np.zeros(x.shape[0], dtype=np.int64)
    active = np.ones(x.shape[0], dtype=bool)
    for it in range(maxit):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        new = step(x[idx], idx)
        diff = np.max(np.abs(new - x[idx]), axis=tuple(range(1, new.ndim)))
        x[idx] = (1.0 - damping) * x[idx] + damping * new
        iters[idx] += 1
        done = diff < tol * (1.0 + np.max(np.abs(new), axis=tuple(range(1, new.ndim))))
        active[idx[done]] = False
    return x, iters


def fp_y2t(z, loc, w, y2, damping=0.5, tol=1e-13, maxit=10000):
    """Fixed point m = sum_k w_k / (loc_k - z + 1/(1 + y2 m))."""
    z = np.asarray(z, dtype=complex)

    def step(m, idx):
        return np.sum(w / (loc - (z[idx] - 1.0 / (1.0 + y2 * m))[:, None]), axis=-1)

    m, iters = _damped(step, -1.0 / z, damping, tol, maxit)
    return m, iters


def fp_regime_a(z, loc, w, y1, y2, damping=0.5, tol=1e-13, maxit=10000):
    """Joint iteration for (mbar, m2) with m2 = m_{y2t}(-mbar).

    The companion transform satisfies z = -1/mbar + y1 m_{y2t}(-mbar), so
    mbar = 1/(y1 m2 - z) while m2 solves the H_t equation at -mbar.
    """
    z = np.asarray(z, dtype=complex)
    x0 = np.empty((z.shape[0], 2), dtype=complex)
    x0[:, 0] = -1.0 / z
    x0[:, 1] = np.sum(w / loc)

    def step(x, idx):
        mb, m2 = x[:, 0], x[:, 1]
        om = 1.0 / (1.0 + y2 * m2)
        m2n = np.sum(w / (loc - (-mb - om)[:, None]), axis=-1)
        mbn = 1.0 / (y1 * m2n - z[idx])
        return np.stack([mbn, m2n], axis=1)

    x, iters = _damped(step, x0, damping, tol, maxit)
    return x[:, 0], x[:, 1], iters


def fp_companion(z, tau, w, c1, damping=0.5, tol=1e-13, maxit=10000):
    """Companion Marchenko-Pastur transform s = 1/(-z + c1 sum w tau/(1 + tau s))."""
    z = np.asarray(z, dtype=complex)

    def step(s, idx):
        return 1.0 / (-z[idx] + c1 * np.sum(w * tau / (1.0 + tau * s[:, None]), axis=-1))

    s, iters = _damped(step, -1.0 / z, damping, tol, maxit)
    return s, iters


def simplex_pivots(T, basis, maxiter=50000, tol=1e-11, ptol=1e-9, ctol=1e-9, stall=20):
    """Primal simplex on a dense tableau, in place.

    ``T`` has constraint rows first and the reduced-cost row last; the last
    column is the right-hand side.  Entering columns follow Dantzig's rule
    and tied leaving rows take the largest pivot.  After ``stall``
    consecutive degenerate pivots both choices switch to Bland's rule until
    the objective moves again, which rules out cycling.  Reduced costs count
    as negative below -ctol * (1 + max |cost|) and pivots must exceed
    ptol * max(1, max |col|).  Returns (status, iterations) where status
    0 = optimal, 1 = unbounded, 2 = iteration limit.
    """
    m = T.shape[0] - 1
    ncol = T.shape[1] - 1
    degenerate = 0
    for it in range(maxiter):
        cost = T[m, :ncol]
        cand = np.nonzero(cost < -ctol * (1.0 + np.abs(cost).max()))[0]
        if cand.size == 0:
            return 0, it
        bland = degenerate >= stall
        j = int(cand[0]) if bland else int(cand[np.argmin(cost[cand])])
        col = T[:m, j]
        pos = col > ptol * max(np.abs(col).max(), 1.0)
        if not np.any(pos):
            return 1, it
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, ncol][pos] / col[pos]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + tol * (1.0 + abs(best)))[0]
        if bland:
            r = int(ties[np.argmin(basis[ties])])
        else:
            r = int(ties[np.argmax(col[ties])])
        degenerate = degenerate + 1 if best <= tol else 0
        T[r] /= T[r, j]
        others = np.arange(m + 1) != r
        T[others] -= np.outer(T[others, j], T[r])
        basis[r] = j
    return 2, maxiter
