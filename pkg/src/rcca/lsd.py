"""Limiting spectral laws under independence.

Classical side: the Wachter law of canonical correlations and the F-matrix
law behind the CLT.  Regularized side: Stieltjes-transform fixed points for
the ridge-regularized CCA matrix and its centering term.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from ._backend import kernels
from .cca_core import AspectRatios
from .errors import ConvergenceError, NumericalError, RegimeError
from .spectral import InverseScaledMeasure, SpectralMeasure

DAMPING = 0.5
MAX_ITER = 10_000
FP_TOL = 1e-13


# ---------------------------------------------------------------- classical
@dataclass(frozen=True)
class WachterLaw:
    c1: float
    c2: float
    L1: float
    L2: float
    atom0: float
    atom1: float


def wachter_params(c1, c2):
    if not (0 < c1 < 1 and 0 < c2 < 1):
        raise RegimeError(f"Wachter law needs ratios in (0, 1), got {c1}, {c2}")
    u = np.sqrt(c2 - c2 * c1)
    v = np.sqrt(c1 - c1 * c2)
    atom1 = max(0.0, 1.0 - (1.0 - c2) / c1)
    # zero atom of the canonical-correlation law (nonzero only if c1 > c2)
    atom0 = max(0.0, 1.0 - c2 / c1)
    return WachterLaw(c1, c2, abs(u - v), abs(u + v), atom0, atom1)


def wachter_density(x, law):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = (x > law.L1) & (x < law.L2) & (x != 0) & (x != 1)
    xi = x[inside]
    num = (xi - law.L1) * (xi + law.L1) * (law.L2 - xi) * (law.L2 + xi)
    out[inside] = np.sqrt(np.maximum(num, 0.0)) / (np.pi * law.c1 * xi * (1 - xi) * (1 + xi))
    return out


def _wachter_integral(f, law):
    """Integral of f(x) rho(x) over (L1, L2) with x = L1 + (L2-L1) sin^2(theta)."""
    L1, L2 = law.L1, law.L2
    w = L2 - L1

    def g(theta):
        s, c = np.sin(theta), np.cos(theta)
        x = L1 + w * s * s
        # sqrt((x-L1)(L2-x)) = w s c cancels the Jacobian's 1/(s c) factor
        rest = np.sqrt(max((x + L1) * (L2 + x), 0.0))
        denom = np.pi * law.c1 * x * (1 - x) * (1 + x)
        return f(x) * 2.0 * w * w * s * s * c * c * rest / denom

    val, err = integrate.quad(g, 0.0, np.pi / 2, epsabs=1e-11, epsrel=1e-11, limit=200)
    if not np.isfinite(val) or err > 1e-7:
        raise NumericalError(f"quadrature did not converge (error estimate {err:.2e})")
    return val


@dataclass(frozen=True)
class NullCentering:
    value: float
    regime: str
    aux: float | None = None
    residual: float = 0.0


def classical_centering(phi, c1n, c2n):
    """Integral of phi against the limiting law of squared correlations."""
    law = wachter_params(c1n, c2n)
    total = _wachter_integral(lambda x: phi(x * x), law)
    if law.atom0 > 0:
        total += law.atom0 * float(phi(0.0))
    if law.atom1 > 0:
        total += law.atom1 * float(phi(1.0))
    return NullCentering(float(total), "classical")


def f_support(ratios: AspectRatios):
    if not 0 < ratios.ybar2 < 1:
        raise RegimeError(f"F-matrix law needs ybar2 in (0, 1), got {ratios.ybar2}")
    return {"h": ratios.h, "a1": ratios.a1, "a2": ratios.a2}


def f_density(lam, ratios: AspectRatios):
    f_support(ratios)
    y1, y2 = ratios.ybar1, ratios.ybar2
    a1, a2 = ratios.a1, ratios.a2
    lam = np.asarray(lam, dtype=float)
    out = np.zeros_like(lam)
    ok = (lam > a1) & (lam < a2)
    x = lam[ok]
    out[ok] = (1 - y2) / (2 * np.pi * x * (y1 + y2 * x)) * np.sqrt((a2 - x) * (x - a1))
    return out


# ---------------------------------------------------------------- solvers
@dataclass
class StieltjesSolution:
    z: np.ndarray
    m: np.ndarray
    residual: float
    iterations: int = 0
    extra: dict = field(default_factory=dict)


def as_measure(H=None):
    """Accept None (identity), a SpectralMeasure, eigenvalues or a covariance."""
    if H is None:
        return SpectralMeasure.point(1.0)
    if isinstance(H, SpectralMeasure):
        return H
    A = np.asarray(H, dtype=float)
    if A.ndim == 2:
        A = np.linalg.eigvalsh(0.5 * (A + A.T))
    return SpectralMeasure.from_eigenvalues(A)


def kernels_fallback_damped(step, x0):
    from ._fallback import _damped
    return _damped(step, x0, DAMPING, FP_TOL, MAX_ITER)


def _upper(z):
    """Map z to the closed upper half plane; return (z_up, flipped mask)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    flip = z.imag < 0
    return np.where(flip, np.conj(z), z), flip


class RegularizedLaw:
    """Transforms attached to the regularized CCA law when p2 < n.

    ``Ht`` is the law of t n/(n - p2) times the inverse population covariance;
    m_{y2t} solves m = m_Ht(z - 1/(1 + y2 m)); the companion transform mbar of
    the limiting S1 S2t^-1 law satisfies z = -1/mbar + y1 m_{y2t}(-mbar).
    """

    def __init__(self, t, ratios: AspectRatios, H=None):
        if not ratios.c2n < 1:
            raise RegimeError("this law needs p2 < n")
        self.t = float(t)
        self.ratios = ratios
        self.H = as_measure(H)
        self.y1, self.y2, self.q = ratios.y1, ratios.y2, ratios.q
        self.tprime = self.t / (1.0 - ratios.c2n)
        self.Ht = InverseScaledMeasure(self.H, self.tprime)

    # m_Ht and its derivatives
    def mHt(self, z, deriv=0):
        if self.Ht.is_atomic:
            return kernels.atoms_stieltjes(z, self.Ht.atom_loc, self.Ht.atom_w, deriv)
        return self.Ht.stieltjes(z, deriv)

    def _newton_y2t(self, w, m, steps=30):
        y2 = self.y2
        for _ in range(steps):
            om = 1.0 / (1.0 + y2 * m)
            zeta = w - om
            g = m - self.mHt(zeta)
            gp = 1.0 - self.mHt(zeta, 1) * y2 * om ** 2
            dm = g / gp
            m = m - dm
            if np.max(np.abs(dm)) < 1e-15 * (1 + np.max(np.abs(m))):
                break
        return m

    def m_y2t(self, w):
        """Stieltjes transform of F_{y2t} at complex w (conjugate-symmetric)."""
        wu, flip = _upper(w)
        if self.Ht.is_atomic:
            m, it = kernels.fp_y2t(wu, self.Ht.atom_loc, self.Ht.atom_w, self.y2,
                                   DAMPING, FP_TOL, MAX_ITER)
        else:
            m, it = kernels_fallback_damped(
                lambda m, idx: self.mHt(wu[idx] - 1.0 / (1.0 + self.y2 * m)), -1.0 / wu)
        m = self._newton_y2t(wu, m)
        return np.where(flip, np.conj(m), m)

    def y2t_residual(self, w, m):
        return np.abs(m - self.mHt(w - 1.0 / (1.0 + self.y2 * m)))

    def y2t_derivs(self, w, m):
        """First and second derivatives of m_{y2t} by implicit differentiation."""
        y2 = self.y2
        om = 1.0 / (1.0 + y2 * m)
        zeta = w - om
        H1 = self.mHt(zeta, 1)
        H2 = self.mHt(zeta, 2)
        mp = H1 / (1.0 - y2 * om ** 2 * H1)
        zp = 1.0 + y2 * om ** 2 * mp
        omp = -y2 * om ** 2 * mp
        mpp = (H2 * zp ** 2 + H1 * y2 * 2 * om * omp * mp) / (1.0 - H1 * y2 * om ** 2)
        return mp, mpp

    def companion(self, z):
        """Return (mbar_y(z), m_{y2t}(-mbar_y(z))) for z off the real axis."""
        zu, flip = _upper(z)
        y1, y2 = self.y1, self.y2
        if self.Ht.is_atomic:
            mb, m2, it = kernels.fp_regime_a(zu, self.Ht.atom_loc, self.Ht.atom_w,
                                             y1, y2, DAMPING, FP_TOL, MAX_ITER)
        else:
            x0 = np.empty((zu.size, 2), dtype=complex)
            x0[:, 0] = -1.0 / zu
            # m_Ht(0) = int x^-1 dHt(x) = E[tau]/t'
            x0[:, 1] = self.H.mean() / self.tprime

            def step(x, idx):
                mbv, m2v = x[:, 0], x[:, 1]
                om = 1.0 / (1.0 + y2 * m2v)
                m2n = self.mHt(-mbv - om)
                return np.stack([1.0 / (y1 * m2n - zu[idx]), m2n], axis=1)

            x, it = kernels_fallback_damped(step, x0)
            mb, m2 = x[:, 0], x[:, 1]
        # Newton on the scalar equation in m2 = m_{y2t}(-mbar)
        for _ in range(30):
            a = zu - y1 * m2
            om = 1.0 / (1.0 + y2 * m2)
            zeta = 1.0 / a - om
            g = m2 - self.mHt(zeta)
            gp = 1.0 - self.mHt(zeta, 1) * (y1 / a ** 2 + y2 * om ** 2)
            dm = g / gp
            m2 = m2 - dm
            if np.max(np.abs(dm)) < 1e-15 * (1 + np.max(np.abs(m2))):
                break
        mb = 1.0 / (y1 * m2 - zu)
        res = np.abs(m2 - self.mHt(-mb - 1.0 / (1.0 + y2 * m2)))
        if not np.all(np.isfinite(res)) or np.max(res) > 1e-8:
            raise ConvergenceError(f"companion fixed point residual {np.max(res):.2e}")
        mb = np.where(flip, np.conj(mb), mb)
        m2 = np.where(flip, np.conj(m2), m2)
        return mb, m2

    def m_y(self, z):
        mb, _ = self.companion(z)
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return (mb + (1.0 - self.y1) / z) / self.y1

    def support_bound(self):
        """Upper bound for the support of the S1 S2t^-1 law."""
        _, tau_max = self.H.support()
        bound = (1.0 + np.sqrt(self.y1)) ** 2 * tau_max / self.tprime
        c1, c2 = self.ratios.c1n, self.ratios.c2n
        if c1 + c2 < 1:
            # ridge eigenvalues never exceed the classical squared correlations,
            # whose law does not depend on H; this caps the bound as t -> 0
            lam = wachter_params(c1, c2).L2 ** 2
            bound = min(bound, lam / (self.q * (1.0 - lam)))
        return bound


class CompanionMP:
    """Companion transform of the sample-covariance law with population H."""

    def __init__(self, c1, H=None):
        self.c1 = float(c1)
        self.H = as_measure(H)

    def integral(self, s):
        """int tau/(1 + tau s) dH as (1/s)(1 - m_H(-1/s)/s)."""
        if self.H.is_atomic:
            loc, w = self.H.atomic_arrays()
            return np.sum(w * loc / (1.0 + loc * np.asarray(s)[..., None]), axis=-1)
        mH = self.H.stieltjes(-1.0 / s, 0, check=False)
        return (1.0 - mH / s) / s

    def varpi(self, s):
        """Return (int s^3 tau^2/(1+tau s)^3 dH, int s^2 tau^2/(1+tau s)^2 dH)."""
        if self.H.is_atomic:
            loc, w = self.H.atomic_arrays()
            v = (loc * s[..., None]) / (1.0 + loc * s[..., None])
            return (np.sum(w * v ** 2 * s[..., None] / (1.0 + loc * s[..., None]), axis=-1),
                    np.sum(w * v ** 2, axis=-1))
        u = -1.0 / s
        m0 = self.H.stieltjes(u, 0, check=False)
        m1 = self.H.stieltjes(u, 1, check=False)
        m2 = self.H.stieltjes(u, 2, check=False)
        v3 = m0 - 2.0 * m1 / s + m2 / (2.0 * s ** 2)
        v4 = 1.0 - 2.0 * m0 / s + m1 / s ** 2
        return v3, v4

    def s(self, z):
        zu, flip = _upper(z)
        c1 = self.c1
        if self.H.is_atomic:
            loc, w = self.H.atomic_arrays()
            s, it = kernels.fp_companion(zu, loc, w, c1, DAMPING, FP_TOL, MAX_ITER)
        else:
            s, it = kernels_fallback_damped(
                lambda s, idx: 1.0 / (-zu[idx] + c1 * self.integral(s)), -1.0 / zu)
        for _ in range(30):
            _, v4 = self.varpi(s)
            g = zu + 1.0 / s - c1 * self.integral(s)
            gp = -1.0 / s ** 2 + c1 * v4 / s ** 2
            ds = g / gp
            s = s - ds
            if np.max(np.abs(ds)) < 1e-15 * (1 + np.max(np.abs(s))):
                break
        res = np.abs(zu + 1.0 / s - c1 * self.integral(s))
        if not np.all(np.isfinite(res)) or np.max(res) > 1e-8 * (1 + np.max(np.abs(zu))):
            raise ConvergenceError(f"companion MP residual {np.max(res):.2e}")
        return np.where(flip, np.conj(s), s)

    def s_prime(self, s):
        _, v4 = self.varpi(s)
        return 1.0 / (1.0 / s ** 2 - self.c1 * v4 / s ** 2)

    def support_bound(self):
        _, tau_max = self.H.support()
        return (1.0 + np.sqrt(self.c1)) ** 2 * tau_max


# ------------------------------------------------------------ public ops
def _ratios_of(ratios):
    if isinstance(ratios, AspectRatios):
        return ratios
    p1, p2, n = ratios
    return AspectRatios(int(p1), int(p2), int(n))


def solve_m_y2t(z, t, ratios, H=None):
    law = RegularizedLaw(t, _ratios_of(ratios), H)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    m = law.m_y2t(z)
    res = float(np.max(law.y2t_residual(z, m)))
    if res > 1e-10:
        raise ConvergenceError(f"m_y2t residual {res:.2e}")
    return StieltjesSolution(z, m, res)


def solve_m_y(z, t, ratios, H=None):
    """m_y(z) with its companion; residual measured against the nested form.

    The nested form is m_y = -(1/z)[1 + (b/z) m_{y2t}(b/z)] with
    b = 1 - y1 - y1 z m_y, evaluated with an independent m_{y2t} solve.
    """
    law = RegularizedLaw(t, _ratios_of(ratios), H)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    mb, _ = law.companion(z)
    my = (mb + (1.0 - law.y1) / z) / law.y1
    b = 1.0 - law.y1 - law.y1 * z * my
    m2 = law.m_y2t(b / z)
    nested = -(1.0 / z) * (1.0 + (b / z) * m2)
    res = float(np.max(np.abs(my - nested)))
    if res > 1e-8:
        raise ConvergenceError(f"m_y residual {res:.2e}")
    return StieltjesSolution(z, my, res, extra={"mbar": mb})


def solve_mG_tilde(z, t, c1n, H=None):
    """Sample-covariance transform m = int dH/(lam(1 - c1 - c1 z m) - z)."""
    cmp_ = CompanionMP(c1n, H)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    s = cmp_.s(z)
    m = (s + (1.0 - c1n) / z) / c1n
    Hm = cmp_.H
    if Hm.is_atomic:
        loc, w = Hm.atomic_arrays()
        rhs = np.sum(w / (loc * (1 - c1n - c1n * z[:, None] * m[:, None]) - z[:, None]), axis=-1)
    else:
        a = 1 - c1n - c1n * z * m
        rhs = Hm.stieltjes(z / a, 0, check=False) / a
    res = float(np.max(np.abs(m - rhs)))
    if res > 1e-10:
        raise ConvergenceError(f"m_G residual {res:.2e}")
    return StieltjesSolution(z, m, res, extra={"s": s})


def _scalar_fixed_point(f, x0, lo, hi):
    x = float(x0)
    for it in range(MAX_ITER):
        new = f(x)
        if not lo <= new <= hi:
            # left the admissible bracket; fall back to bisection
            x = 0.5 * (lo + hi)
            break
        if abs(new - x) < 1e-15 * (1 + abs(new)):
            x = new
            break
        x = (1 - DAMPING) * x + DAMPING * new
    if abs(f(x) - x) > 1e-12 * (1 + abs(x)):
        x = optimize.brentq(lambda v: f(v) - v, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    res = abs(f(x) - x)
    if res > 1e-10:
        raise ConvergenceError(f"scalar fixed point residual {res:.2e}")
    return x, res


def _mH_real(H, x):
    return float(np.real(H.stieltjes(np.array([complex(x)]), 0, check=False)[0]))


def solve_m_nt(t, c1n, H=None):
    """m solving m = a - a^2 t m_H(-a t) with a = 1 + c1 m (trace form)."""
    H = as_measure(H)

    def f(m):
        a = 1.0 + c1n * m
        return a - a * a * t * _mH_real(H, -a * t)

    _, tau_max = H.support()
    hi = 1.0 / (1.0 - c1n) + 1.0 if c1n < 1 else tau_max / t + 1.0
    return _scalar_fixed_point(f, 0.0, 0.0, max(hi, 10.0))


def solve_m_1t(t, c1n, H=None):
    """m solving m = int dH/((1 - c1 + c1 t m) tau + t)."""
    H = as_measure(H)

    def f(m):
        b = 1.0 - c1n + c1n * t * m
        return _mH_real(H, -t / b) / b

    # the root has b > 0; f - m is positive as b -> 0+ and negative at m = 1/t
    lo = max(0.0, (c1n - 1.0) / (c1n * t))
    hi = 1.0 / t
    lo += 1e-12 * (hi - lo)
    return _scalar_fixed_point(f, hi, lo, hi)


def regularized_centering(t, ratios, H=None):
    """Limit of E T_n under independence, for phi(lambda) = lambda."""
    r = _ratios_of(ratios)
    if r.c2n < 1:
        m, res = solve_m_nt(t, r.c1n, H)
        val = (r.p2 / r.p1) * (1.0 - 1.0 / (1.0 + r.c1n * m))
        return NullCentering(float(val), "regularized_c2lt1", float(m), res)
    m, res = solve_m_1t(t, r.c1n, H)
    return NullCentering(float(1.0 - t * m), "regularized_c2ge1", float(m), res)


def regularized_density(lam, t, ratios, H=None, eta=1e-4):
    """Limiting eigenvalue density of T_xy by Stieltjes inversion (p2 < n).

    Eigenvalues lam of T_xy map to mu = lam/(q(1 - lam)) of S1 S2t^-1.
    """
    law = RegularizedLaw(t, _ratios_of(ratios), H)
    lam = np.asarray(lam, dtype=float)
    mu = lam / (law.q * (1.0 - lam))
    my = law.m_y(mu + 1j * eta)
    dens_mu = np.maximum(my.imag, 0.0) / np.pi
    return dens_mu / (law.q * (1.0 - lam) ** 2)
