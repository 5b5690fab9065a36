"""Asymptotic null means and variances of linear spectral statistics.

Classical statistics use contour integrals over circles in the xi-plane of
the F-matrix law.  Regularized statistics use contours around the support of
the limiting law, with every transform supplied by ``rcca.lsd``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .cca_core import AspectRatios
from .errors import ContourError, NumericalError, ParameterError, RegimeError
from .lsd import CompanionMP, RegularizedLaw, as_measure


@dataclass
class CltMoments:
    mean: float
    variance: float
    source: str
    nodes: int = 0
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self):
        return {"mean": self.mean, "variance": self.variance, "source": self.source,
                "nodes": self.nodes, "diagnostics": dict(self.diagnostics)}


MAX_NODES = 4096
HALVING_TOL = 1e-4
CLUSTER_MAX = 0.95
# smallest singular radius the classical circle quadrature is asked to handle
D_MIN = 1.0005
LAURENT_MAX = 2 ** 18


# ------------------------------------------------------------------ contours
@dataclass(frozen=True)
class ContourSpec:
    """Contour around a real interval, or a circle for the classical case.

    ``kind`` is "ellipse", "rectangle" or "circle".  Ellipses use the
    trapezoid rule (geometric convergence for periodic integrands);
    rectangles use Gauss-Legendre nodes on each side.
    """

    kind: str = "ellipse"
    nodes: int = 256
    r: float | None = None
    pad: float = 0.1
    aspect: float = 0.6

    def __post_init__(self):
        if self.kind not in ("ellipse", "rectangle", "circle"):
            raise ParameterError(f"unknown contour kind {self.kind!r}")
        n = int(self.nodes)
        if n < 64 or n & (n - 1):
            raise ParameterError(f"nodes must be a power of 2 and >= 64, got {n}")
        if self.kind == "circle" and self.r is not None and not self.r > 1:
            raise ParameterError("circle contours need r > 1")

    def doubled(self):
        return ContourSpec(self.kind, 2 * self.nodes, self.r, self.pad, self.aspect)

    def around(self, lo, hi, left_limit, extra_pad=0.0, nodes=None):
        """Upper-half nodes and weights of a contour enclosing [lo, hi].

        The left crossing stays strictly between ``left_limit`` (a singular
        point that must not be enclosed) and ``lo``; padded contours cross
        further out so nested contours never touch.
        """
        width = hi - lo
        pad = (self.pad + extra_pad) * width
        frac = min(0.4 + extra_pad, 0.8)
        left = max(lo - pad, lo - frac * (lo - left_limit))
        right = hi + pad
        if not left < lo:
            raise ContourError("no room for a contour left of the support")
        cx, rx = 0.5 * (left + right), 0.5 * (right - left)
        ry = self.aspect * rx
        N = nodes or self.nodes
        if self.kind == "ellipse":
            # theta = u + beta sin(u) is periodic, so the trapezoid rule stays
            # geometric; beta > 0 packs nodes at the left vertex when a
            # singularity sits close to it
            beta = float(np.clip(1.0 - (lo - left_limit) / rx, 0.0, CLUSTER_MAX))
            u = 2 * np.pi * (np.arange(N // 2) + 0.5) / N
            th = u + beta * np.sin(u)
            dth = (1.0 + beta * np.cos(u)) * (2 * np.pi / N)
            z = cx + rx * np.cos(th) + 1j * ry * np.sin(th)
            dz = (-rx * np.sin(th) + 1j * ry * np.cos(th)) * dth
            return z, dz
        if self.kind == "rectangle":
            x, w = np.polynomial.legendre.leggauss(N // 2)
            u, uw = (x + 1) / 2, w / 2
            # right side upward, top leftward, left side downward
            z = np.concatenate([right + 1j * ry * u, right - (right - left) * u + 1j * ry,
                                left + 1j * ry * (1 - u)])
            dz = np.concatenate([1j * ry * uw, -(right - left) * uw + 0j, -1j * ry * uw])
            return z, dz
        raise ContourError("circle contours are not used around a support")


def _mirror(z, dz):
    """Full contour from its upper half (conjugate-symmetric integrands)."""
    return np.concatenate([z, np.conj(z)]), np.concatenate([dz, -np.conj(dz)])


# ------------------------------------------------------------- classical
class LogOneMinus:
    """phi(x) = log(1 - x), continued along a closed contour by unwrapping."""

    singular_x = (1.0, np.inf)

    def __call__(self, x):
        return np.log1p(-np.asarray(x, dtype=complex))

    def along_contour(self, x):
        v = 1.0 - np.asarray(x, dtype=complex)
        phase = np.unwrap(np.angle(v))
        if abs(phase[-1] - phase[0]) > np.pi:
            raise ContourError("log(1 - x) winds around the origin on this contour")
        return np.log(np.abs(v)) + 1j * phase


def _check_ratios(c1, c2):
    if not (0 < c1 < 1 and 0 < c2 < 1):
        raise RegimeError("classical moments need c1, c2 in (0, 1)")
    if c1 > c2:
        raise RegimeError("classical moments need p1 <= p2 (swap X and Y)")


def _xi_quantities(c1, c2):
    if not (0 < c1 < 1 and 0 < c2 < 1):
        raise RegimeError("classical moments need c1, c2 in (0, 1)")
    yb1 = c1 / (1.0 - c2)
    yb2 = c1 / c2
    if not yb2 < 1:
        raise RegimeError("classical moments need p1 < p2 (swap X and Y)")
    h = np.sqrt(yb1 + yb2 - yb1 * yb2)
    return yb1, yb2, h


def _phi_of_xi(phi, c1, c2, xi):
    _, yb2, h = _xi_quantities(c1, c2)
    lam = (1 + h * xi) * (1 + h / xi) / (1 - yb2) ** 2
    k = (1 - c2) / c2
    x = 1.0 / (1.0 + k * lam)
    if hasattr(phi, "along_contour"):
        return phi.along_contour(x)
    return np.asarray(phi(x), dtype=complex) * np.ones_like(xi)


def _singular_radius(phis, c1, c2):
    """Smallest modulus > 1 among singularities of phi(x(lambda(xi)))."""
    _, yb2, h = _xi_quantities(c1, c2)
    k = (1 - c2) / c2
    D = np.inf
    for phi in phis:
        for xs in getattr(phi, "singular_x", (np.inf,)):
            lam = -1.0 / k if np.isinf(xs) else (1.0 / xs - 1.0) / k
            # h xi^2 + (1 + h^2 - lam (1 - yb2)^2) xi + h = 0
            roots = np.roots([h, 1 + h * h - lam * (1 - yb2) ** 2, h])
            mods = np.abs(roots)
            if np.any(np.abs(mods - 1) < 1e-9):
                raise ContourError("phi is singular on the support of the limiting law")
            D = min(D, mods[mods > 1].min())
    return D


def _adaptive_nodes(nodes, rate):
    """Power of 2 with exp(-N rate / 2) below double precision, capped at 2^16."""
    # the N/2 rule used for the stability check must itself be converged
    need = 60.0 / max(rate, 1e-12)
    N = int(nodes)
    while N < need and N < 2 ** 16:
        N *= 2
    return N


def _circle(R, N):
    xi = R * np.exp(2j * np.pi * np.arange(N) / N)
    return xi


def _mean_deformed(phi, c1, c2, nodes):
    _, yb2, h = _xi_quantities(c1, c2)
    vals = []
    R = np.sqrt(_singular_radius([phi], c1, c2))
    nodes = _adaptive_nodes(nodes, np.log(R))
    for N in (nodes // 2, nodes):
        xi = _circle(R, N)
        ker = 1 / (xi - 1) + 1 / (xi + 1) - 2 / (xi + yb2 / h)
        vals.append(np.sum(_phi_of_xi(phi, c1, c2, xi) * ker * xi).real / (2 * N))
    err = abs(vals[1] - vals[0])
    if err > 1e-8 * (1 + abs(vals[1])):
        raise NumericalError(f"mean unstable under node doubling ({err:.2e})")
    return vals[1]


def _laurent(phi, c1, c2, N):
    """Coefficients alpha_k, k = -N/2+1 .. N/2, of phi(x(xi)) on |xi| = 1 by FFT."""
    a = np.fft.fft(_phi_of_xi(phi, c1, c2, _circle(1.0, N))) / N
    return a


def _laurent_moments(phis, c1, c2):
    """(mean of phis[0], covariance of phis[0] with phis[-1]) from Laurent series.

    With f = sum_k alpha_k xi^k on the annulus 1/D < |xi| < D, the double
    contour integral reduces to 2 sum_m m alpha_{-m} beta_m and the mean
    kernel 1/(xi-1) + 1/(xi+1) - 2/(xi + a) to
    (1/2) sum_m alpha_m (1 + (-1)^m - 2 (-a)^m) with a = ybar2/h.
    """
    _, yb2, h = _xi_quantities(c1, c2)
    D = _singular_radius(phis, c1, c2)
    N = 256
    while N < 80.0 / np.log(D) and N < LAURENT_MAX:
        N *= 2
    while True:
        coef = [_laurent(phi, c1, c2, N) for phi in phis]
        scale = max(np.abs(a).max() for a in coef)
        tail = max(np.abs(a[N // 4: 3 * N // 4]).max() for a in coef)
        if tail <= 1e-13 * scale:
            break
        if N >= LAURENT_MAX:
            raise NumericalError(f"Laurent coefficients not resolved at {N} nodes")
        N *= 2
    m = np.arange(N // 2)
    a, b = coef[0], coef[-1]
    pos_a, neg_a = a[: N // 2], np.r_[a[0], a[::-1][: N // 2 - 1]]
    pos_b, neg_b = b[: N // 2], np.r_[b[0], b[::-1][: N // 2 - 1]]
    kern = 1.0 + (-1.0) ** m - 2.0 * (-yb2 / h) ** m
    mean = 0.5 * float(np.sum(pos_a * kern).real)
    # symmetrized so cov(phi1, phi2) == cov(phi2, phi1) exactly
    cov = float(np.sum(m * (neg_a * pos_b + neg_b * pos_a)).real)
    return mean, cov


def _off_diagonal(value, phis, c1, c2, K=8):
    """Evaluate value(c2) directly, or extrapolate it from c2 values with D >= D_MIN.

    As c2 -> c1 the F-matrix map degenerates and the singular radius D -> 1,
    while the moments stay smooth in c2.  Near (or on) the diagonal, value
    is evaluated at K equally spaced c2 points starting where D = D_MIN and
    the interpolating polynomial is read off at c2.
    """
    if c2 > c1 and _singular_radius(phis, c1, c2) >= D_MIN:
        return value(c2)
    hi = 1.0 - 1e-9
    if _singular_radius(phis, c1, hi) < D_MIN:
        raise RegimeError("no room to evaluate the classical moments at these ratios")
    start = optimize.brentq(lambda b: _singular_radius(phis, c1, b) - D_MIN,
                            c1 + 1e-6 * (1.0 - c1), hi, xtol=1e-12)
    step = min(start - c1, (hi - start) / K)
    pts = start + step * np.arange(K)
    vals = [value(b) for b in pts]
    # Lagrange form in the scaled variable keeps the fit well conditioned
    u = (pts - start) / step
    u0 = (c2 - start) / step
    out = 0.0
    for i in range(K):
        w = np.prod([(u0 - u[k]) / (u[i] - u[k]) for k in range(K) if k != i])
        out += w * vals[i]
    return float(out)


def thm1_mean(phi, c1, c2, route="laurent", nodes=1024, r_values=(1.1, 1.05, 1.025)):
    """Limiting mean of p1 (int phi dF^{S} - int phi dF^{c1,c2}).

    ``phi`` acts on squared correlations.  The default route expands
    phi(x(xi)) in Laurent coefficients on |xi| = 1 and sums the kernel
    poles in closed form; ``route="deformed"`` integrates on a circle
    |xi| = R > 1 instead, and ``route="r"`` evaluates the printed r-family
    and extrapolates r -> 1.
    """
    _check_ratios(c1, c2)
    if route == "laurent":
        return _off_diagonal(lambda b: _laurent_moments([phi], c1, b)[0], [phi], c1, c2)
    if route == "deformed":
        return _off_diagonal(lambda b: _mean_deformed(phi, c1, b, nodes), [phi], c1, c2)
    if route == "r":
        _, yb2, h = _xi_quantities(c1, c2)
        vals = []
        N = max(nodes, 4096)
        xi = _circle(1.0, N)
        F = _phi_of_xi(phi, c1, c2, xi)
        for r in r_values:
            ker = 1 / (xi - 1 / r) + 1 / (xi + 1 / r) - 2 / (xi + yb2 / h)
            vals.append(np.sum(F * ker * xi).real / (2 * N))
        return _extrapolate(r_values, vals)
    raise ParameterError(f"unknown route {route!r}")


def _extrapolate(r_values, vals):
    """Polynomial extrapolation to r = 1 through all supplied points."""
    d = np.asarray(r_values, dtype=float) - 1.0
    coef = np.polyfit(d, np.asarray(vals, dtype=float), len(d) - 1)
    return float(np.polyval(coef, 0.0))


def _cov_sum(phi1, phi2, c1, c2, D, N):
    x1 = _circle(D ** (1 / 3), N)
    x2 = _circle(D ** (2 / 3), N)
    f1 = _phi_of_xi(phi1, c1, c2, x1) * x1
    f2 = _phi_of_xi(phi2, c1, c2, x2) * x2
    K = 1.0 / (x1[:, None] - x2[None, :]) ** 2
    return (2.0 / N ** 2) * (f1 @ K @ f2).real


def _cov_deformed(phi1, phi2, c1, c2, nodes):
    D = _singular_radius([phi1, phi2], c1, c2)
    nodes = min(_adaptive_nodes(nodes, np.log(D) / 3), 4096)
    vals = []
    for N in (nodes // 2, nodes):
        v = _cov_sum(phi1, phi2, c1, c2, D, N)
        if phi1 is not phi2:
            # symmetrize so cov(phi1, phi2) == cov(phi2, phi1) exactly
            v = 0.5 * (v + _cov_sum(phi2, phi1, c1, c2, D, N))
        vals.append(v)
    err = abs(vals[1] - vals[0])
    if err > 1e-8 * (1 + abs(vals[1])):
        raise NumericalError(f"covariance unstable under node doubling ({err:.2e})")
    return float(vals[1])


def thm1_cov(phi1, phi2, c1, c2, route="laurent", nodes=512, r_values=(1.1, 1.05, 1.025)):
    """Limiting covariance of the centered statistics for phi1 and phi2."""
    _check_ratios(c1, c2)
    if route == "laurent":
        return _off_diagonal(lambda b: _laurent_moments([phi1, phi2], c1, b)[1],
                             [phi1, phi2], c1, c2)
    if route == "deformed":
        return _off_diagonal(lambda b: _cov_deformed(phi1, phi2, c1, b, nodes),
                             [phi1, phi2], c1, c2)
    if route == "r":
        N = max(nodes, 2048)
        xi = _circle(1.0, N)
        f1 = _phi_of_xi(phi1, c1, c2, xi) * xi
        f2 = _phi_of_xi(phi2, c1, c2, xi) * xi
        vals = []
        for r in r_values:
            K = 1.0 / (xi[:, None] - r * xi[None, :]) ** 2
            vals.append((2.0 / N ** 2) * (f1 @ K @ (r * f2)).real)
        return _extrapolate(r_values, vals)
    raise ParameterError(f"unknown route {route!r}")


def thm1_moments(c1, c2, phi=None):
    """Moments for phi(x) = x by default; the mean is zero in that case."""
    if phi is None:
        def phi(x):
            return x
    mean = thm1_mean(phi, c1, c2)
    var = thm1_cov(phi, phi, c1, c2)
    if not var > 0:
        raise NumericalError(f"non-positive variance {var}")
    return CltMoments(mean, var, "thm1", 1024)


# ----------------------------------------------------------- regime (a)
def _quantities_a(law, z):
    y1, y2 = law.y1, law.y2
    mb, m2 = law.companion(z)
    w = -mb
    mp, mpp = law.y2t_derivs(w, m2)
    om = 1.0 / (1.0 + y2 * m2)
    zeta = w - om
    Q = {
        "mb": mb, "m2": m2, "mp": mp, "mpp": mpp, "om": om,
        "M2": law.mHt(zeta, 1), "M3": law.mHt(zeta, 2) / 2.0,
        "h": -mb ** 2 / (1.0 - y1 * mb ** 2 * mp),
        "g": y2 * mp / (1.0 + y2 * m2) ** 2,
        "int3": mb ** 3 * (mp - mb * mpp / 2.0),
        "int2": mb ** 2 * mp,
    }
    if np.any(mb.imag <= 0):
        raise ContourError("companion transform lost its sign: contour meets the support")
    return Q


def _full(Q):
    return {k: np.concatenate([v, np.conj(v)]) for k, v in Q.items()}


def _mean_a(law, z, dz, Q):
    y1, y2, q = law.y1, law.y2, law.q
    phi = q * z / (1.0 + q * z)
    om, M2, M3, h, mp = Q["om"], Q["M2"], Q["M3"], Q["h"], Q["mp"]
    A = y1 * Q["int3"] / (1.0 - y1 * Q["int2"]) ** 2
    den = 1.0 - y2 * om ** 2 * M2
    B = h * (y2 * om ** 2 * M3 + y2 ** 2 * om ** 4 * mp * M3) / den
    C = h * (y2 ** 2 * om ** 3 * mp * M2) / den
    return float((-np.sum(phi * (A + B - C) * dz) / (2j * np.pi)).real)


def _var_a(law, z1, dz1, Q1, z2, dz2, Q2):
    q = law.q
    m1, m2 = Q1["mb"][:, None], Q2["mb"][None, :]
    h1, h2 = Q1["h"][:, None], Q2["h"][None, :]
    g1, g2 = Q1["g"][:, None], Q2["g"][None, :]
    s = Q1["om"][:, None] - Q2["om"][None, :]
    # mbar' = -h by implicit differentiation of z(mbar)
    K = (h1 * h2 / (m1 - m2) ** 2 - 1.0 / (z1[:, None] - z2[None, :]) ** 2
         - h1 * h2 / (m1 - m2) ** 2 + h1 * h2 * (1 + g1 + g2 + g1 * g2) / (m1 - m2 + s) ** 2)
    f1 = q * z1 / (1.0 + q * z1) * dz1
    f2 = q * z2 / (1.0 + q * z2) * dz2
    return float((-(f1 @ K @ f2) / (2 * np.pi ** 2)).real)


def _contour_moments(mean_fn, var_fn, quant_fn, lo, hi, left_limit, contour, source):
    """Contour moments, doubling the node count until the N/2 rule agrees."""
    N = contour.nodes
    while True:
        mom = _contour_pass(mean_fn, var_fn, quant_fn, lo, hi, left_limit, contour, source, N)
        d = mom.diagnostics
        scale = abs(mom.mean) + 1e-3 * mom.variance
        if d["halving_error_var"] <= HALVING_TOL and d["halving_error_mean"] <= HALVING_TOL * scale:
            return mom
        if N >= MAX_NODES:
            raise NumericalError(
                f"contour moments unresolved at {N} nodes (halving errors "
                f"{d['halving_error_mean']:.2e}, {d['halving_error_var']:.2e})")
        N *= 2


def _contour_pass(mean_fn, var_fn, quant_fn, lo, hi, left_limit, contour, source, N):
    parts = [contour.around(lo, hi, left_limit, nodes=N),
             contour.around(lo, hi, left_limit, extra_pad=0.15, nodes=N),
             contour.around(lo, hi, left_limit, nodes=N // 2),
             contour.around(lo, hi, left_limit, extra_pad=0.15, nodes=N // 2)]
    # one transform solve for all four node sets
    Qall = quant_fn(np.concatenate([p[0] for p in parts]))
    results = []
    start = 0
    for z_u, dz_u in parts:
        sl = slice(start, start + z_u.size)
        start += z_u.size
        z, dz = _mirror(z_u, dz_u)
        results.append((z, dz, _full({k: v[sl] for k, v in Qall.items()})))
    mean = mean_fn(*results[0])
    var = var_fn(*results[0], *results[1])
    m_half = mean_fn(*results[2])
    v_half = var_fn(*results[2], *results[3])
    diag = {"contour": contour.kind, "support_bound": [lo, hi],
            "halving_error_mean": abs(mean - m_half),
            "halving_error_var": abs(var - v_half) / abs(var) if var else float("inf")}
    if not var > 0:
        # an unresolved contour can produce a negative variance; let the caller refine
        diag["halving_error_var"] = float("inf")
    return CltMoments(mean, var, source, N, diag)


def thm3a_moments(t, ratios, H=None, contour=None, route="contour"):
    """Mean and variance of p1 (tr T_xy / p1 - centering) when p2 < n."""
    law = RegularizedLaw(t, ratios, H)
    if route == "resolvent":
        return _resolvent_moments(t, ratios, law.H)
    contour = contour or ContourSpec()
    hi = law.support_bound()
    return _contour_moments(
        lambda z, dz, Q: _mean_a(law, z, dz, Q),
        lambda *a: _var_a(law, *a),
        lambda z: _quantities_a(law, z),
        0.0, hi, -1.0 / law.q, contour, "thm3a")


# ----------------------------------------------------------- regime (b)
def _quantities_b(cmp_, z):
    s = cmp_.s(z)
    v3, v4 = cmp_.varpi(s)
    if np.any(s.imag <= 0):
        raise ContourError("companion transform lost its sign: contour meets the support")
    return {"s": s, "sp": cmp_.s_prime(s), "v3": v3, "v4": v4}


def thm3b_moments(t, c1n, H=None, contour=None, route="contour"):
    """Mean and variance of p1 (tr T_xy / p1 - centering) when p2 >= n.

    In this regime T_xy = (Axx + tI)^-1 Axx, so phi maps the sample
    covariance eigenvalue z to z/(z + t).
    """
    cmp_ = CompanionMP(c1n, H)
    if route == "resolvent":
        return _resolvent_moments(t, None, cmp_.H, c1n=c1n)
    contour = contour or ContourSpec()
    c1 = cmp_.c1

    def mean_fn(z, dz, Q):
        val = c1 * Q["v3"] / (1.0 - c1 * Q["v4"]) ** 2
        return float((-np.sum(z / (z + t) * val * dz) / (2j * np.pi)).real)

    def var_fn(z1, dz1, Q1, z2, dz2, Q2):
        K = Q1["sp"][:, None] * Q2["sp"][None, :] / (Q1["s"][:, None] - Q2["s"][None, :]) ** 2
        f1 = z1 / (z1 + t) * dz1
        f2 = z2 / (z2 + t) * dz2
        return float((-(f1 @ K @ f2) / (2 * np.pi ** 2)).real)

    return _contour_moments(mean_fn, var_fn, lambda z: _quantities_b(cmp_, z),
                            0.0, cmp_.support_bound(), -t, contour, "thm3b")


def regularized_moments(t, ratios, H=None, contour=None, route="contour"):
    """Dispatch on p2/n."""
    if ratios.c2n < 1:
        return thm3a_moments(t, ratios, H, contour, route)
    return thm3b_moments(t, ratios.c1n, H, contour, route)


# ------------------------------------------------- resolvent cross-check
def _resolvent_moments(t, ratios, H, c1n=None):
    """Moments of the trace statistic through m(-t) and its Schwarzian.

    For phi(lambda) = lambda the statistic is a resolvent trace at the real
    point -t, so its moments follow from the inverse function z(s) of the
    companion transform without any contour.
    """
    c1 = ratios.c1n if ratios is not None else c1n

    def moment(k):
        return lambda s: H.expect(lambda x: x ** k / (1 + x * s) ** k)

    def zfun(s, d=0):
        if d == 0:
            return -1 / s + c1 * moment(1)(s)
        if d == 1:
            return 1 / s ** 2 - c1 * moment(2)(s)
        if d == 2:
            return -2 / s ** 3 + 2 * c1 * moment(3)(s)
        return 6 / s ** 4 - 6 * c1 * moment(4)(s)

    s = optimize.brentq(lambda v: zfun(v) + t, 1e-14, 1.0 / t, xtol=1e-16, rtol=1e-15)
    z1, z2, z3 = zfun(s, 1), zfun(s, 2), zfun(s, 3)
    s1 = 1 / z1
    s2 = -z2 / z1 ** 3
    schwarz_z = z3 / z1 - 1.5 * (z2 / z1) ** 2
    schwarz_s = -schwarz_z * s1 ** 2
    M = s2 / (2 * s1) - s1 / s
    m = (s - (1 - c1) / t) / c1
    mp = (s1 - (1 - c1) / t ** 2) / c1
    Iu = 1 - t * m
    Iu2 = 1 - 2 * t * m + t ** 2 * mp
    mean_b = -t * M
    var_b = t ** 2 / 3 * schwarz_s
    if ratios is None or ratios.c2n >= 1:
        return CltMoments(float(mean_b), float(var_b), "thm3b", 0, {"route": "resolvent"})
    c2 = ratios.c2n
    v1 = 2 * c2 * (1 - c2) * (c1 * Iu2 - c1 ** 2 * Iu ** 2)
    return CltMoments(float(c2 * mean_b), float(v1 + c2 ** 2 * var_b), "thm3a", 0,
                      {"route": "resolvent", "center": float(c2 * Iu)})
