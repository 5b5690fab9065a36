"""Mixture spectral measures (atoms, uniform and linear-density pieces).

The Stieltjes transform of every dictionary element has a closed form, so
transforms and their z-derivatives are evaluated exactly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, SingularityError

_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


def _log_ratio_derivs(z, a, b, k):
    """k-th z-derivative of log((b - z)/(a - z)), k >= 1."""
    return math.factorial(k - 1) * ((a - z) ** (-k) - (b - z) ** (-k))


@dataclass
class SpectralMeasure:
    """Probability measure built from atoms, uniform and linear pieces.

    ``atoms`` holds (location, weight) pairs, ``uniform`` holds
    (a, b, weight) and ``linear`` holds (d, h, weight, direction) with
    direction +1 for a density increasing from d to h and -1 for decreasing.
    """

    atoms: list = field(default_factory=list)
    uniform: list = field(default_factory=list)
    linear: list = field(default_factory=list)

    def __post_init__(self):
        self.atoms = [(float(t), float(w)) for t, w in self.atoms]
        self.uniform = [(float(a), float(b), float(w)) for a, b, w in self.uniform]
        self.linear = [(float(d), float(h), float(w), int(s)) for d, h, w, s in self.linear]
        for a, b, _ in self.uniform:
            if not b > a:
                raise DataError(f"uniform piece needs a < b, got [{a}, {b}]")
        for d, h, _, s in self.linear:
            if not h > d or s not in (1, -1):
                raise DataError(f"bad linear piece [{d}, {h}] dir={s}")
        self._atom_loc = np.array([t for t, _ in self.atoms], dtype=float)
        self._atom_w = np.array([w for _, w in self.atoms], dtype=float)

    # construction helpers
    @classmethod
    def from_eigenvalues(cls, values, floor=None):
        """Empirical spectral distribution of the given eigenvalues."""
        v = np.sort(np.asarray(values, dtype=float).ravel())
        if floor is not None:
            v = np.maximum(v, floor)
        uniq, counts = np.unique(v, return_counts=True)
        return cls(atoms=list(zip(uniq, counts / v.size)))

    @classmethod
    def point(cls, loc=1.0):
        return cls(atoms=[(loc, 1.0)])

    # basic properties
    @property
    def is_atomic(self):
        return not self.uniform and not self.linear

    def weights(self):
        return np.array([w for _, w in self.atoms]
                        + [w for *_, w in self.uniform]
                        + [w for _, _, w, _ in self.linear])

    def total_mass(self):
        return float(self.weights().sum())

    def support(self):
        """Smallest interval containing all pieces with positive weight."""
        lo, hi = [], []
        for t, w in self.atoms:
            if w > 0:
                lo.append(t)
                hi.append(t)
        for a, b, w in self.uniform:
            if w > 0:
                lo.append(a)
                hi.append(b)
        for d, h, w, _ in self.linear:
            if w > 0:
                lo.append(d)
                hi.append(h)
        return min(lo), max(hi)

    def atomic_arrays(self):
        if not self.is_atomic:
            raise TypeError("measure has continuous pieces")
        return self._atom_loc, self._atom_w

    # Stieltjes transform
    def stieltjes(self, z, deriv=0, check=True):
        """Return d^k/dz^k of m(z) = int dH(x)/(x - z)."""
        z = np.asarray(z, dtype=complex)
        if check:
            self._check_off_support(z)
        out = np.zeros(z.shape, dtype=complex)
        if self.atoms:
            zz = z[..., None]
            out += math.factorial(deriv) * np.sum(
                self._atom_w / (self._atom_loc - zz) ** (deriv + 1), axis=-1)
        for a, b, w in self.uniform:
            if deriv == 0:
                out += w / (b - a) * np.log((b - z) / (a - z))
            else:
                out += w / (b - a) * _log_ratio_derivs(z, a, b, deriv)
        for d, h, w, s in self.linear:
            c = 2.0 * w / (h - d) ** 2
            L = [np.log((h - z) / (d - z))]
            for k in range(1, deriv + 1):
                L.append(_log_ratio_derivs(z, d, h, k))
            if s > 0:
                if deriv == 0:
                    out += c * ((h - d) + (z - d) * L[0])
                else:
                    out += c * (deriv * L[deriv - 1] + (z - d) * L[deriv])
            else:
                if deriv == 0:
                    out += c * ((h - z) * L[0] - (h - d))
                else:
                    out += c * (-deriv * L[deriv - 1] + (h - z) * L[deriv])
        return out

    def _check_off_support(self, z):
        near_real = np.abs(z.imag) < 1e-14
        if not np.any(near_real):
            return
        x = z.real[near_real]
        for t, w in self.atoms:
            if w > 0 and np.any(np.abs(x - t) < 1e-14):
                raise SingularityError(f"z hits atom at {t}")
        for a, b, w in self.uniform:
            if w > 0 and np.any((x >= a) & (x <= b)):
                raise SingularityError(f"z on uniform piece [{a}, {b}]")
        for d, h, w, _ in self.linear:
            if w > 0 and np.any((x >= d) & (x <= h)):
                raise SingularityError(f"z on linear piece [{d}, {h}]")

    # integration
    def expect(self, f):
        """Integral of a vectorized real function against the measure."""
        total = float(np.sum(self._atom_w * f(self._atom_loc))) if self.atoms else 0.0
        for a, b, w in self.uniform:
            x = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
            total += w * 0.5 * float(np.sum(_GL_W * f(x)))
        for d, h, w, s in self.linear:
            x = 0.5 * (h - d) * _GL_X + 0.5 * (d + h)
            dens = 2.0 * ((x - d) if s > 0 else (h - x)) / (h - d) ** 2
            total += w * 0.5 * (h - d) * float(np.sum(_GL_W * dens * f(x)))
        return total

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for t, w in self.atoms:
            out += w * (x >= t)
        for a, b, w in self.uniform:
            out += w * np.clip((x - a) / (b - a), 0.0, 1.0)
        for d, h, w, s in self.linear:
            u = np.clip((x - d) / (h - d), 0.0, 1.0)
            out += w * (u ** 2 if s > 0 else 1.0 - (1.0 - u) ** 2)
        return out

    def mass_between(self, lo, hi):
        """Mass of the closed interval [lo, hi]."""
        eps = 1e-12 * max(1.0, abs(hi))
        left = self.cdf(np.array([lo - eps]))[0]
        return float(self.cdf(np.array([hi]))[0] - left)

    def kolmogorov_distance(self, other_cdf, grid):
        grid = np.asarray(grid, dtype=float)
        return float(np.max(np.abs(self.cdf(grid) - other_cdf(grid))))

    def mean(self):
        return self.expect(lambda x: x)

    def pruned(self, tol=1e-12):
        """Copy without pieces of negligible weight, renormalized."""
        atoms = [(t, w) for t, w in self.atoms if w > tol]
        uni = [(a, b, w) for a, b, w in self.uniform if w > tol]
        lin = [(d, h, w, s) for d, h, w, s in self.linear if w > tol]
        tot = sum(w for _, w in atoms) + sum(p[2] for p in uni) + sum(p[2] for p in lin)
        return SpectralMeasure(
            atoms=[(t, w / tot) for t, w in atoms],
            uniform=[(a, b, w / tot) for a, b, w in uni],
            linear=[(d, h, w / tot, s) for d, h, w, s in lin],
        )

    # serialization
    def to_dict(self):
        return {
            "atoms": [{"t": t, "w": w} for t, w in self.atoms],
            "uniform": [{"a": a, "b": b, "w": w} for a, b, w in self.uniform],
            "linear": [{"d": d, "h": h, "w": w, "dir": "inc" if s > 0 else "dec"}
                       for d, h, w, s in self.linear],
        }

    @classmethod
    def from_dict(cls, obj):
        try:
            atoms = [(a["t"], a["w"]) for a in obj.get("atoms", [])]
            uni = [(u["a"], u["b"], u["w"]) for u in obj.get("uniform", [])]
            lin = [(p["d"], p["h"], p["w"], 1 if p["dir"] == "inc" else -1)
                   for p in obj.get("linear", [])]
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed spectral measure: {exc}") from exc
        return cls(atoms=atoms, uniform=uni, linear=lin)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


class InverseScaledMeasure:
    """Law of a/x for x ~ H, with a > 0 and H supported on (0, inf).

    Used for H_t, the law of t n/(n - p2) times the inverse population
    covariance.  The transform follows from m_H through
    m(z) = -1/z - (a/z^2) m_H(a/z); atomic H maps to atomic H_t directly.
    """

    def __init__(self, H: SpectralMeasure, a: float):
        lo, _ = H.support()
        if lo <= 0:
            raise DataError("population spectrum must be strictly positive")
        self.H = H
        self.a = float(a)
        if H.is_atomic:
            loc, w = H.atomic_arrays()
            keep = w > 0
            self.atom_loc = self.a / loc[keep]
            self.atom_w = w[keep]
        else:
            self.atom_loc = None
            self.atom_w = None

    @property
    def is_atomic(self):
        return self.atom_loc is not None

    def support(self):
        lo, hi = self.H.support()
        return self.a / hi, self.a / lo

    def stieltjes(self, z, deriv=0):
        z = np.asarray(z, dtype=complex)
        if self.is_atomic:
            zz = z[..., None]
            return math.factorial(deriv) * np.sum(
                self.atom_w / (self.atom_loc - zz) ** (deriv + 1), axis=-1)
        a = self.a
        u = a / z
        lo, hi = self.H.support()
        far = np.abs(u - np.clip(u.real, lo, hi)) >= hi - lo
        if np.any(far):
            # the closed form cancels badly once a/z is far outside supp H
            out = np.empty(z.shape, dtype=complex)
            out[far] = self._direct(z[far], deriv)
            if not np.all(far):
                out[~far] = self._via_H(z[~far], deriv)
            return out
        return self._via_H(z, deriv)

    def _direct(self, z, deriv):
        """k! int tau^(k+1)/(a - z tau)^(k+1) dH(tau) by Gauss-Legendre."""
        zz = z[..., None]
        k = deriv + 1

        def g(x):
            return x ** k / (self.a - zz * x) ** k

        H = self.H
        out = np.zeros(z.shape, dtype=complex)
        if H.atoms:
            out += np.sum(H._atom_w * g(H._atom_loc), axis=-1)
        for lo, hi, w in H.uniform:
            x = 0.5 * (hi - lo) * _GL_X + 0.5 * (lo + hi)
            out += w * 0.5 * np.sum(_GL_W * g(x), axis=-1)
        for d, h, w, s in H.linear:
            x = 0.5 * (h - d) * _GL_X + 0.5 * (d + h)
            dens = 2.0 * ((x - d) if s > 0 else (h - x)) / (h - d) ** 2
            out += w * 0.5 * (h - d) * np.sum(_GL_W * dens * g(x), axis=-1)
        return math.factorial(deriv) * out

    def _via_H(self, z, deriv):
        a = self.a
        u = a / z
        m0 = self.H.stieltjes(u, 0, check=False)
        if deriv == 0:
            return -1.0 / z - u ** 2 * m0 / a
        m1 = self.H.stieltjes(u, 1, check=False)
        f1 = 2 * u * m0 + u ** 2 * m1
        if deriv == 1:
            return 1.0 / z ** 2 + f1 * u ** 2 / a ** 2
        m2 = self.H.stieltjes(u, 2, check=False)
        f2 = 2 * m0 + 4 * u * m1 + u ** 2 * m2
        if deriv == 2:
            return -2.0 / z ** 3 - (u ** 2 / a) * (f2 * u ** 2 + 2 * u * f1) / a ** 2
        raise ValueError("derivatives above 2 are not needed")
