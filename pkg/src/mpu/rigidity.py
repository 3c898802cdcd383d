"""Eigenvalue rigidity, counting-function deviation, edge confinement and delocalization."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, DomainError, StateError
from .mp_model import ClassicalLocations, MPModel
from .spectral import ZERO_CLAMP, Spectrum, counting

RIGIDITY_COLUMNS = ("j", "jtilde", "lambda", "gamma", "raw_dev", "normalized_dev")


@dataclass(frozen=True)
class RigidityReport:
    """Per-index rigidity records for j = 1..min(N, M)."""

    N: int
    j: np.ndarray
    jtilde: np.ndarray
    lam: np.ndarray
    gamma: np.ndarray
    raw_dev: np.ndarray
    normalized_dev: np.ndarray

    @property
    def max_normalized(self) -> float:
        return float(self.normalized_dev.max()) if self.j.size else 0.0

    @property
    def argmax(self) -> int:
        return int(self.j[np.argmax(self.normalized_dev)])

    def rows(self):
        for r in zip(self.j, self.jtilde, self.lam, self.gamma, self.raw_dev, self.normalized_dev):
            yield {"j": int(r[0]), "jtilde": int(r[1]), "lambda": float(r[2]),
                   "gamma": float(r[3]), "raw_dev": float(r[4]), "normalized_dev": float(r[5])}

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=RIGIDITY_COLUMNS)
            w.writeheader()
            for row in self.rows():
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def jtilde(n: int) -> np.ndarray:
    """min(j, n + 1 - j) for j = 1..n."""
    j = np.arange(1, n + 1)
    return np.minimum(j, n + 1 - j)


def rigidity_report(S: Spectrum, locs: ClassicalLocations) -> RigidityReport:
    r = S.rank
    if locs.count != r:
        raise DataError(f"need {r} classical locations, got {locs.count}")
    if locs.N != S.N:
        raise DataError(f"classical locations were built for N = {locs.N}, spectrum has N = {S.N}")
    j = np.arange(1, r + 1)
    jt = jtilde(r)
    lam = S.eigenvalues[:r]
    gamma = np.asarray(locs.gamma, dtype=np.float64)
    raw = np.abs(lam - gamma)
    norm = S.N ** (2 / 3) * jt ** (1 / 3) * raw
    return RigidityReport(S.N, j, jt, lam.copy(), gamma.copy(), raw, norm)


def default_E_grid(model: MPModel, N: int, n_uniform: int = 512, edge_halfwidth: float = 4.0) -> np.ndarray:
    """512 uniform points on [max(0, lambda_-) - 0.1, lambda_+ + 0.1] plus N^{-2/3}/4 refinement at both edges.

    The refinement covers +-edge_halfwidth N^{-2/3} around each edge; the grid
    is clipped to [max(lambda_-/4, 0), 4 lambda_+].
    """
    lm, lp = model.lambda_minus, model.lambda_plus
    lo_clip, hi_clip = max(lm / 4, 0.0), 4 * lp
    base = np.linspace(max(0.0, lm) - 0.1, lp + 0.1, n_uniform)
    h = N ** (-2 / 3)
    k = int(round(edge_halfwidth * 4))
    offs = np.arange(-k, k + 1) * (h / 4)
    grid = np.concatenate([base, lp + offs, lm + offs])
    return np.unique(np.clip(grid, lo_clip, hi_clip))


def counting_deviation(S: Spectrum, model: MPModel, E_grid: Sequence[float] | None = None,
                       return_argmax: bool = False):
    """max over E_grid of N |n(E) - n_c(E)| with n(E) = #{lambda_j >= E} / N."""
    E = default_E_grid(model, S.N) if E_grid is None else np.asarray(E_grid, dtype=np.float64)
    if E.size == 0:
        raise DomainError("empty energy grid")
    lo, hi = max(model.lambda_minus / 4, 0.0), 4 * model.lambda_plus
    if E.min() < lo - 1e-12 or E.max() > hi + 1e-12:
        raise DomainError(f"energy grid must lie in [{lo:.4g}, {hi:.4g}]")
    dev = S.N * np.abs(np.asarray(counting(S, E)) - np.asarray(model.tail_mass_with_atom(E)))
    k = int(np.argmax(dev))
    return (float(dev[k]), float(E[k])) if return_argmax else float(dev[k])


def edge_confinement(S: Spectrum, model: MPModel) -> tuple[float, float | None]:
    """(N^{2/3}(lambda_1 - lambda_+), N^{2/3}(lambda_- - smallest nonzero)); bottom is None at d = 1."""
    scale = S.N ** (2 / 3)
    top = scale * (S.eigenvalues[0] - model.lambda_plus)
    if math.isclose(model.d, 1.0):
        return float(top), None
    nz = S.nonzero
    nz = nz[nz > ZERO_CLAMP * max(1.0, S.eigenvalues[0])]
    if nz.size == 0:
        return float(top), None
    return float(top), float(scale * (model.lambda_minus - nz.min()))


@dataclass(frozen=True)
class DelocalizationReport:
    alpha: np.ndarray   # 0-based eigen-indices with nonzero eigenvalue
    values: np.ndarray  # sqrt(N) * ||v_alpha||_inf

    @property
    def max_value(self) -> float:
        return float(self.values.max()) if self.values.size else float("nan")


def delocalization(S: Spectrum) -> DelocalizationReport:
    if S.vectors is None:
        raise StateError("delocalization needs eigenvectors")
    keep = np.flatnonzero(S.eigenvalues > ZERO_CLAMP * max(1.0, S.eigenvalues[0] if S.N else 1.0))
    vals = math.sqrt(S.N) * np.max(np.abs(S.vectors[:, keep]), axis=0) if keep.size else np.zeros(0)
    return DelocalizationReport(keep, np.asarray(vals, dtype=np.float64))


__all__ = ["RigidityReport", "DelocalizationReport", "RIGIDITY_COLUMNS", "jtilde",
           "rigidity_report", "default_E_grid", "counting_deviation", "edge_confinement",
           "delocalization"]
