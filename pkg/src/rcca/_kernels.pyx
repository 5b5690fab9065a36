# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: atomic Stieltjes sums, per-node damped fixed points
and the simplex pivot loop.  ``_fallback.py`` mirrors every function."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()

cdef extern from "complex.h":
    double cabs(double complex) nogil


cdef inline double complex _atom_sum(double complex z, const double[:] loc,
                                     const double[:] w, int power) noexcept nogil:
    cdef Py_ssize_t k
    cdef double complex acc = 0, d, p
    cdef int j
    for k in range(loc.shape[0]):
        d = 1.0 / (loc[k] - z)
        p = d
        for j in range(1, power):
            p = p * d
        acc = acc + w[k] * p
    return acc


def atoms_stieltjes(z, loc, w, int deriv=0):
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] zz = np.ascontiguousarray(
        np.asarray(z, dtype=np.complex128).ravel())
    cdef const double[:] lv = np.ascontiguousarray(loc, dtype=np.float64)
    cdef const double[:] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t i, n = zz.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(n, dtype=np.complex128)
    cdef double fact = 1.0
    cdef int j
    for j in range(2, deriv + 1):
        fact *= j
    with nogil:
        for i in range(n):
            out[i] = fact * _atom_sum(zz[i], lv, wv, deriv + 1)
    return out.reshape(np.shape(z))


def fp_y2t(z, loc, w, double y2, double damping=0.5, double tol=1e-13,
           long maxit=10000):
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] zz = np.ascontiguousarray(
        np.asarray(z, dtype=np.complex128).ravel())
    cdef const double[:] lv = np.ascontiguousarray(loc, dtype=np.float64)
    cdef const double[:] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t i, n = zz.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(n, dtype=np.complex128)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] iters = np.zeros(n, dtype=np.int64)
    cdef double complex m, new, zi
    cdef long it
    with nogil:
        for i in range(n):
            zi = zz[i]
            m = -1.0 / zi
            for it in range(maxit):
                new = _atom_sum(zi - 1.0 / (1.0 + y2 * m), lv, wv, 1)
                iters[i] = it + 1
                if cabs(new - m) < tol * (1.0 + cabs(new)):
                    m = (1.0 - damping) * m + damping * new
                    break
                m = (1.0 - damping) * m + damping * new
            out[i] = m
    return out, iters


def fp_regime_a(z, loc, w, double y1, double y2, double damping=0.5,
                double tol=1e-13, long maxit=10000):
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] zz = np.ascontiguousarray(
        np.asarray(z, dtype=np.complex128).ravel())
    cdef const double[:] lv = np.ascontiguousarray(loc, dtype=np.float64)
    cdef const double[:] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t i, k, n = zz.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] mb_out = np.empty(n, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] m2_out = np.empty(n, dtype=np.complex128)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] iters = np.zeros(n, dtype=np.int64)
    cdef double complex mb, m2, mbn, m2n, om, zi
    cdef double start = 0.0, d1, d2, scale
    cdef long it
    for k in range(lv.shape[0]):
        start += wv[k] / lv[k]
    with nogil:
        for i in range(n):
            zi = zz[i]
            mb = -1.0 / zi
            m2 = start
            for it in range(maxit):
                om = 1.0 / (1.0 + y2 * m2)
                m2n = _atom_sum(-mb - om, lv, wv, 1)
                mbn = 1.0 / (y1 * m2n - zi)
                iters[i] = it + 1
                d1 = cabs(mbn - mb)
                d2 = cabs(m2n - m2)
                scale = 1.0 + (cabs(mbn) if cabs(mbn) > cabs(m2n) else cabs(m2n))
                mb = (1.0 - damping) * mb + damping * mbn
                m2 = (1.0 - damping) * m2 + damping * m2n
                if (d1 if d1 > d2 else d2) < tol * scale:
                    break
            mb_out[i] = mb
            m2_out[i] = m2
    return mb_out, m2_out, iters


def fp_companion(z, tau, w, double c1, double damping=0.5, double tol=1e-13,
                 long maxit=10000):
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] zz = np.ascontiguousarray(
        np.asarray(z, dtype=np.complex128).ravel())
    cdef const double[:] tv = np.ascontiguousarray(tau, dtype=np.float64)
    cdef const double[:] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t i, k, n = zz.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(n, dtype=np.complex128)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] iters = np.zeros(n, dtype=np.int64)
    cdef double complex s, new, acc, zi
    cdef long it
    with nogil:
        for i in range(n):
            zi = zz[i]
            s = -1.0 / zi
            for it in range(maxit):
                acc = 0
                for k in range(tv.shape[0]):
                    acc = acc + wv[k] * tv[k] / (1.0 + tv[k] * s)
                new = 1.0 / (-zi + c1 * acc)
                iters[i] = it + 1
                if cabs(new - s) < tol * (1.0 + cabs(new)):
                    s = (1.0 - damping) * s + damping * new
                    break
                s = (1.0 - damping) * s + damping * new
            out[i] = s
    return out, iters


def simplex_pivots(cnp.ndarray[cnp.float64_t, ndim=2] T,
                   cnp.ndarray[cnp.int64_t, ndim=1] basis,
                   long maxiter=50000, double tol=1e-11, double ptol=1e-9,
                   double ctol=1e-9, long stall=20):
    cdef double[:, ::1] t = T
    cdef long[:] b = basis
    cdef Py_ssize_t m = t.shape[0] - 1, ncol = t.shape[1] - 1
    cdef Py_ssize_t i, j, r, c
    cdef long it, degenerate = 0
    cdef bint bland
    cdef double best, ratio, piv, f, cmax, colmax, cmin
    with nogil:
        for it in range(maxiter):
            cmax = 0.0
            for c in range(ncol):
                if fabs(t[m, c]) > cmax:
                    cmax = fabs(t[m, c])
            bland = degenerate >= stall
            j = -1
            cmin = -ctol * (1.0 + cmax)
            for c in range(ncol):
                if t[m, c] < cmin:
                    j = c
                    if bland:
                        break
                    cmin = t[m, c]
            if j < 0:
                with gil:
                    return 0, it
            colmax = 1.0
            for i in range(m):
                if fabs(t[i, j]) > colmax:
                    colmax = fabs(t[i, j])
            best = INFINITY
            for i in range(m):
                if t[i, j] > ptol * colmax:
                    ratio = t[i, ncol] / t[i, j]
                    if ratio < best:
                        best = ratio
            r = -1
            if best < INFINITY:
                for i in range(m):
                    if t[i, j] > ptol * colmax:
                        ratio = t[i, ncol] / t[i, j]
                        if ratio <= best + tol * (1.0 + fabs(best)):
                            if r < 0:
                                r = i
                            elif bland:
                                if b[i] < b[r]:
                                    r = i
                            elif t[i, j] > t[r, j]:
                                r = i
            if r < 0:
                with gil:
                    return 1, it
            if best <= tol:
                degenerate += 1
            else:
                degenerate = 0
            piv = t[r, j]
            for c in range(ncol + 1):
                t[r, c] = t[r, c] / piv
            for i in range(m + 1):
                if i != r:
                    f = t[i, j]
                    if f != 0.0:
                        for c in range(ncol + 1):
                            t[i, c] = t[i, c] - f * t[r, c]
            b[r] = j
    return 2, maxiter
