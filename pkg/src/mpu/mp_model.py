"""Deterministic Marchenko-Pastur reference quantities for a ratio d = N/M."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import integrate

from .errors import DomainError

# quad tolerances; tail masses are reported to ~1e-11 absolute
_EPSABS = 1e-13
_EPSREL = 1e-13


@dataclass(frozen=True)
class ClassicalLocations:
    """gamma[j-1] = gamma_j, j = 1..count, in decreasing order."""

    gamma: np.ndarray
    N: int

    @property
    def count(self) -> int:
        return len(self.gamma)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "gamma_j"])
            for j, g in enumerate(self.gamma, start=1):
                w.writerow([j, repr(float(g))])


@dataclass(frozen=True)
class MPModel:
    d: float

    def __post_init__(self) -> None:
        if not (self.d > 0 and math.isfinite(self.d)):
            raise DomainError(f"ratio d must be positive and finite, got {self.d!r}")

    @classmethod
    def from_dims(cls, N: int, M: int) -> "MPModel":
        return cls(N / M)

    @property
    def lambda_minus(self) -> float:
        return (1.0 - math.sqrt(self.d)) ** 2

    @property
    def lambda_plus(self) -> float:
        return (1.0 + math.sqrt(self.d)) ** 2

    @property
    def width(self) -> float:
        return self.lambda_plus - self.lambda_minus

    @property
    def continuous_mass(self) -> float:
        """Mass of the absolutely continuous part: 1 for d <= 1, 1/d otherwise."""
        return min(1.0, 1.0 / self.d)

    # -- density ---------------------------------------------------------
    def density(self, x):
        """MP density; +inf at x = 0 when d = 1 (hard-edge singularity)."""
        x = np.asarray(x, dtype=np.float64)
        lm, lp = self.lambda_minus, self.lambda_plus
        prod = np.clip((lp - x) * (x - lm), 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.sqrt(prod) / (2.0 * math.pi * self.d * np.abs(x))
        out = np.where((x > lm) & (x < lp), out, 0.0)
        if lm == 0.0:
            out = np.where(x == 0.0, np.inf, out)
        return out if out.ndim else float(out)

    # -- Stieltjes transform --------------------------------------------
    def stieltjes(self, z):
        """Closed-form m_c(z) for Im z > 0 (includes the atom at 0 when d > 1).

        Both roots of d z m^2 + (z - 1 + d) m + 1 = 0 are formed from the
        principal square root; the branch kept is the one that is a Stieltjes
        transform of a measure on [0, inf), i.e. Im m > 0 and Im(z m) >= 0.
        """
        z = np.asarray(z, dtype=np.complex128)
        if np.any(z.imag <= 0):
            raise DomainError("stieltjes requires Im z > 0")
        d = self.d
        root = np.sqrt((z - self.lambda_minus) * (self.lambda_plus - z))
        m1 = (1 - d - z + 1j * root) / (2 * d * z)
        m2 = (1 - d - z - 1j * root) / (2 * d * z)
        s1 = np.minimum(m1.imag, (z * m1).imag)
        s2 = np.minimum(m2.imag, (z * m2).imag)
        out = np.where(s1 >= s2, m1, m2)
        return out if out.ndim else complex(out)

    # -- tail mass n_c(E) = int_E^inf rho_c --------------------------------
    def _u_integrand(self, u: float) -> float:
        # x = lm + w sin^2 u removes both square-root edge singularities
        s, c = math.sin(u), math.cos(u)
        w = self.width
        x = self.lambda_minus + w * s * s
        return (w * s * c) ** 2 / (math.pi * self.d * x)

    def _u_of(self, E: float) -> float:
        r = (E - self.lambda_minus) / self.width
        return math.asin(math.sqrt(min(1.0, max(0.0, r))))

    def _mass_between_u(self, u_lo: float, u_hi: float) -> float:
        if u_hi <= u_lo:
            return 0.0
        val, _ = integrate.quad(self._u_integrand, u_lo, u_hi,
                                epsabs=_EPSABS, epsrel=_EPSREL, limit=200)
        return val

    @lru_cache(maxsize=65536)
    def _tail_scalar(self, E: float) -> float:
        if E >= self.lambda_plus:
            return 0.0
        if E <= self.lambda_minus:
            return self.continuous_mass
        return self._mass_between_u(self._u_of(E), math.pi / 2)

    def tail_mass(self, E):
        """n_c(E): continuous MP mass in [E, inf) by adaptive Gauss-Kronrod."""
        E_arr = np.asarray(E, dtype=np.float64)
        if E_arr.ndim == 0:
            return self._tail_scalar(float(E_arr))
        return np.array([self._tail_scalar(float(e)) for e in E_arr.ravel()]).reshape(E_arr.shape)

    def tail_mass_with_atom(self, E):
        """Tail mass including the zero atom of weight 1 - 1/d when d > 1 and E <= 0."""
        n = np.asarray(self.tail_mass(E), dtype=np.float64)
        if self.d > 1:
            n = n + np.where(np.asarray(E) <= 0.0, 1.0 - 1.0 / self.d, 0.0)
        return n if n.ndim else float(n)

    # -- classical locations -------------------------------------------
    def _tail_u_vec(self, u: np.ndarray) -> np.ndarray:
        """Vectorised n_c at x = lm + w sin^2(u), one adaptive GK21 pass for all u."""
        span = math.pi / 2 - u
        lm, w, d = self.lambda_minus, self.width, self.d

        def f(s):
            t = u + span * s
            sn, cs = np.sin(t), np.cos(t)
            x = lm + w * sn * sn
            return span * (w * sn * cs) ** 2 / (math.pi * d * x)

        val, _ = integrate.quad_vec(f, 0.0, 1.0, epsabs=_EPSABS, epsrel=_EPSREL, norm="max")
        return val

    def classical_locations(self, N: int, count: int | None = None) -> ClassicalLocations:
        """gamma_j with n_c(gamma_j) = j/N for j = 1..min(N, M).

        ``count`` defaults to the largest j the continuous part can carry,
        i.e. N for d <= 1 and round(N / d) = M for d > 1.  All roots are
        bracketed on [lambda_-, lambda_+] and bisected together (in the
        sin^2 coordinate) to width 1e-13 in E, then polished by one Newton step.
        """
        if N < 1:
            raise DomainError("N must be >= 1")
        max_count = N if self.d <= 1 else int(round(N / self.d))
        if count is None:
            count = max_count
        if count > max_count:
            raise IndexError(f"j/N exceeds the continuous mass for j > {max_count}")
        target = np.arange(1, count + 1) / N
        gamma = np.full(count, self.lambda_minus)
        inner = target < self.continuous_mass - 1e-15
        if inner.any():
            gamma[inner] = self._solve_tail(target[inner])
        return ClassicalLocations(gamma, N)

    def _solve_tail(self, target: np.ndarray) -> np.ndarray:
        w = self.width
        lo = np.zeros_like(target)               # u = 0  <->  E = lambda_-
        hi = np.full_like(target, math.pi / 2)   # u = pi/2 <-> E = lambda_+
        # dE/du = w sin 2u <= w, so u-width 1e-13 / w bounds the E-width by 1e-13
        while np.max(hi - lo) * w > 1e-13:
            mid = 0.5 * (lo + hi)
            above = self._tail_u_vec(mid) > target
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        u = 0.5 * (lo + hi)
        g = self.lambda_minus + w * np.sin(u) ** 2
        rho = np.asarray(self.density(g), dtype=np.float64)
        resid = self._tail_u_vec(u) - target
        ok = np.isfinite(rho) & (rho > 0)
        step = np.where(ok, resid / np.where(ok, rho, 1.0), 0.0)
        return np.where(np.abs(step) < 1e-12, g + step, g)

    def kappa(self, E):
        """Distance of E to the nearer spectral edge."""
        E = np.asarray(E, dtype=np.float64)
        out = np.minimum(np.abs(self.lambda_plus - E), np.abs(E - self.lambda_minus))
        return out if out.ndim else float(out)
