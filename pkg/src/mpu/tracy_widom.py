"""Tracy-Widom (beta = 1) distribution: shipped table plus two independent generators.

The shipped table is produced from the Hastings-McLeod solution q of
q'' = s q + 2 q^3, q(s) ~ Ai(s) as s -> +inf, via

    F1(s) = exp(-1/2 * int_s^inf [q(y) + (y - s) q(y)^2] dy).

The check oracle evaluates F1(s) = det(I - K_s) on L^2(s, inf) with kernel
K_s(x, y) = Ai((x + y)/2) / 2 by Gauss-Legendre discretisation.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad, solve_ivp, trapezoid
from scipy.interpolate import PchipInterpolator
from scipy.special import airy

from .errors import DataError

S_MIN, S_MAX, S_STEP = -10.0, 7.0, 0.01
TAIL_TOL = 1e-6
_TABLE_FILE = "tw1.csv"


def table_grid(s_min: float = S_MIN, s_max: float = S_MAX, step: float = S_STEP) -> np.ndarray:
    n = int(round((s_max - s_min) / step)) + 1
    return np.round(np.linspace(s_min, s_max, n), 10)


def painleve_tw1(s, s0: float = 8.0) -> np.ndarray:
    """F1 at points ``s`` (all <= s0) by backward integration of Painleve II."""
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    ai, aip, _, _ = airy(s0)
    # integral of Ai beyond s0; the q^2 tails there are below 1e-15
    ai_tail = quad(lambda y: airy(y)[0], s0, np.inf, epsabs=1e-20)[0]

    def rhs(x, y):
        q, qp = y[0], y[1]
        return [qp, x * q + 2 * q**3, -q, -q * q, -x * q * q]

    lo = min(float(s.min()), s0) - 1e-9
    sol = solve_ivp(rhs, (s0, lo), [ai, aip, ai_tail, 0.0, 0.0], method="DOP853",
                    rtol=1e-13, atol=1e-30, first_step=1e-4, dense_output=True)
    if not sol.success:
        raise RuntimeError(f"Painleve II integration failed: {sol.message}")
    _, _, a, b, c = sol.sol(np.minimum(s, s0))
    # int_s^inf (y - s) q^2 = c - s b
    return np.exp(-0.5 * (a + c - s * b))


def fredholm_tw1(s, nodes: int = 80) -> np.ndarray:
    """F1 at points ``s`` as the Fredholm determinant of the halved Airy kernel."""
    x, w = leggauss(nodes)
    # [-1, 1] -> [0, inf): t = 10 tan(pi (x + 1) / 4)
    phi = np.pi * (x + 1) / 4
    t = 10.0 * np.tan(phi)
    wt = w * 10.0 * (np.pi / 4) / np.cos(phi) ** 2
    sw = np.sqrt(wt)
    out = []
    for s0 in np.atleast_1d(np.asarray(s, dtype=np.float64)):
        y = s0 + t
        K = 0.5 * airy((y[:, None] + y[None, :]) / 2)[0]
        out.append(np.linalg.det(np.eye(nodes) - sw[:, None] * K * sw[None, :]))
    return np.array(out)


@dataclass(frozen=True)
class TW1Table:
    s: np.ndarray
    F: np.ndarray

    def __post_init__(self) -> None:
        problems = self.problems(tails=False)
        if problems:
            raise DataError("malformed TW1 table: " + "; ".join(problems))
        object.__setattr__(self, "_interp", PchipInterpolator(self.s, self.F, extrapolate=False))

    def problems(self, tails: bool = True, tail_tol: float = TAIL_TOL) -> list[str]:
        s, F = np.asarray(self.s), np.asarray(self.F)
        out = []
        if s.ndim != 1 or s.shape != F.shape or len(s) < 2:
            return ["s and F must be equal-length 1-d arrays"]
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(F))):
            out.append("non-finite values")
        if np.any(np.diff(s) <= 0):
            out.append("s not strictly increasing")
        if np.any(F < 0) or np.any(F > 1):
            out.append("F outside [0, 1]")
        if np.any(np.diff(F) <= 0):
            out.append("F not strictly increasing")
        if tails:
            if F[0] > tail_tol:
                out.append(f"left tail F({s[0]:g}) = {F[0]:.3g} > {tail_tol:g}")
            if 1 - F[-1] > tail_tol:
                out.append(f"right tail 1 - F({s[-1]:g}) = {1 - F[-1]:.3g} > {tail_tol:g}")
        return out

    def cdf(self, x):
        """Monotone cubic interpolation of F1; 0 left of the grid and 1 right of it."""
        x = np.asarray(x, dtype=np.float64)
        y = self._interp(np.clip(x, self.s[0], self.s[-1]))
        y = np.where(x < self.s[0], 0.0, np.where(x > self.s[-1], 1.0, y))
        y = np.clip(y, 0.0, 1.0)
        return y if y.ndim else float(y)

    def quantile(self, p: float) -> float:
        from scipy.optimize import brentq
        return brentq(lambda x: self.cdf(x) - p, self.s[0], self.s[-1], xtol=1e-12)

    def mean(self) -> float:
        # E s = s_min + int (1 - F) over the grid; mass outside the grid is < 1e-6
        return float(self.s[0] + trapezoid(1 - self.F, self.s))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "F1"])
            for a, b in zip(self.s, self.F):
                w.writerow([f"{a:.2f}", repr(float(b))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "TW1Table":
        with open(path, newline="") as fh:
            return cls._from_rows(list(csv.reader(fh)), str(path))

    @classmethod
    def _from_rows(cls, rows: list[list[str]], name: str) -> "TW1Table":
        if not rows or [c.strip() for c in rows[0]] != ["s", "F1"]:
            raise DataError(f"{name}: expected header 's,F1'")
        try:
            arr = np.array([[float(a), float(b)] for a, b in rows[1:]])
        except ValueError as exc:
            raise DataError(f"{name}: {exc}") from None
        if arr.ndim != 2 or len(arr) < 2:
            raise DataError(f"{name}: too few rows")
        return cls(arr[:, 0], arr[:, 1])


def generate_table(s_min: float = S_MIN, s_max: float = S_MAX, step: float = S_STEP) -> TW1Table:
    s = table_grid(s_min, s_max, step)
    return TW1Table(s, painleve_tw1(s))


_default: TW1Table | None = None


def default_table() -> TW1Table:
    """The shipped table (cached)."""
    global _default
    if _default is None:
        with resources.files("mpu.data").joinpath(_TABLE_FILE).open(newline="") as fh:
            _default = TW1Table._from_rows(list(csv.reader(fh)), _TABLE_FILE)
    return _default


def tw1_cdf(table: TW1Table | None, s):
    return (table or default_table()).cdf(s)


def check_table(table: TW1Table | None = None, oracle_tol: float = 1e-4,
                tail_tol: float = TAIL_TOL, min_rows: int = 1600,
                max_step: float = 0.01) -> dict:
    """Validate a table and compare every row against the Fredholm oracle."""
    table = table or default_table()
    problems = table.problems(tails=True, tail_tol=tail_tol)
    if len(table.s) < min_rows:
        problems.append(f"only {len(table.s)} rows (< {min_rows})")
    if np.max(np.diff(table.s)) > max_step + 1e-12:
        problems.append(f"grid spacing exceeds {max_step}")
    oracle = fredholm_tw1(table.s)
    dev = float(np.max(np.abs(oracle - table.F)))
    if not dev <= oracle_tol:
        problems.append(f"oracle disagreement {dev:.3g} > {oracle_tol:g}")
    median = table.quantile(0.5)
    return {
        "rows": int(len(table.s)),
        "s_min": float(table.s[0]),
        "s_max": float(table.s[-1]),
        "left_tail": float(table.F[0]),
        "right_tail": float(1 - table.F[-1]),
        "monotone": bool(np.all(np.diff(table.F) > 0)),
        "oracle_max_abs_dev": dev,
        "median": median,
        "mean": table.mean(),
        "problems": problems,
        "ok": not problems,
    }
