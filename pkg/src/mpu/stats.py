"""Empirical distribution helpers shared by the edge and bulk experiments."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import DomainError


def ecdf(sample: Sequence[float], x) -> np.ndarray:
    """Right-continuous empirical CDF: fraction of sample <= x."""
    a = np.sort(np.asarray(sample, dtype=np.float64))
    return np.searchsorted(a, np.asarray(x, dtype=np.float64), side="right") / len(a)


def two_sample_ks(a: Sequence[float], b: Sequence[float]) -> float:
    """sup_x |F_a(x) - F_b(x)| over the pooled sample points."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise DomainError("KS distance needs two nonempty samples")
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def one_sample_ks(sample: Sequence[float], cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Kolmogorov distance between a sample and a continuous CDF."""
    x = np.sort(np.asarray(sample, dtype=np.float64))
    n = x.size
    if n == 0:
        raise DomainError("KS distance needs a nonempty sample")
    F = np.asarray(cdf(x), dtype=np.float64)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def dkw_halfwidth(n: int, alpha: float = 0.05) -> float:
    """Dvoretzky-Kiefer-Wolfowitz band half-width for an n-sample ECDF."""
    return float(np.sqrt(np.log(2 / alpha) / (2 * n)))


def quantile7(values: Sequence[float], q) -> np.ndarray | float:
    """Hyndman-Fan type 7 quantiles (linear interpolation of order statistics)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise DomainError("quantile of an empty sample")
    out = np.quantile(v, q, method="linear")
    return out if np.ndim(out) else float(out)


def standard_error(values: Sequence[float]) -> float:
    v = np.asarray(values, dtype=np.float64)
    return float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else float("inf")
