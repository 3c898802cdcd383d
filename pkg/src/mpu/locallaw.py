"""Local Marchenko-Pastur law diagnostics on a grid of spectral points.

For each z = E + i eta the scan records the trace error Lambda = |m - m_c|,
the entrywise errors Lambda_d = max_k |G_kk - m_c| and
Lambda_o = max_{k != l} |G_kl|, the control parameter
Psi = sqrt((Im m_c + Lambda) / (N eta)), the average [Z] of the centred
quadratic forms Z_i = z <x_i, cG^(i) x_i> - (z/M) tr cG^(i) over a subset of
columns, and the deviance D(m) of the self-consistent equation.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, FitError
from .mp_model import MPModel
from .spectral import SpectralPoint, Spectrum, as_z, covariance_spectrum, green_matrix, minor

JSON_FIELDS = ("E", "eta", "m_re", "m_im", "mc_re", "mc_im", "Lambda", "Lambda_d",
               "Lambda_o", "Psi", "Zavg_re", "Zavg_im", "dev_re", "dev_im")


def polylog_threshold(N: int, p: float) -> float:
    """(log N)^p, the stand-in for the unquantified phi^{C_zeta} factors."""
    return math.log(N) ** p


@dataclass(frozen=True)
class DomainGrid:
    points: tuple[SpectralPoint, ...]
    polylog_exponent: float = 3.0
    min_eta_factor: float = 1.0
    N: int | None = None

    def __post_init__(self) -> None:
        if not self.points:
            raise DomainError("domain grid is empty")
        if self.N is not None and self.eta_range[0] < self.min_eta_factor / self.N:
            raise DomainError(
                f"eta_lo = {self.eta_range[0]:.3g} below {self.min_eta_factor}/N")

    @property
    def E_range(self) -> tuple[float, float]:
        Es = [p.E for p in self.points]
        return min(Es), max(Es)

    @property
    def eta_range(self) -> tuple[float, float]:
        etas = [p.eta for p in self.points]
        return min(etas), max(etas)

    @classmethod
    def product(cls, E_values: Iterable[float], etas: Iterable[float], N: int | None = None,
                polylog_exponent: float = 3.0) -> "DomainGrid":
        etas = list(etas)
        pts = tuple(SpectralPoint(float(E), float(eta)) for E in E_values for eta in etas)
        return cls(pts, polylog_exponent, N=N)

    @classmethod
    def log_etas(cls, N: int, n_eta: int = 12, lo_exp: float = -0.9, hi_exp: float = -0.2) -> np.ndarray:
        return np.logspace(lo_exp * math.log10(N), hi_exp * math.log10(N), n_eta)

    @classmethod
    def default(cls, model: MPModel, N: int, n_eta: int = 12, polylog_exponent: float = 3.0) -> "DomainGrid":
        """Bulk midpoint plus the two points at distance N^{-2/3} from lambda_+."""
        edge = N ** (-2 / 3)
        Es = [(model.lambda_minus + model.lambda_plus) / 2,
              model.lambda_plus - edge, model.lambda_plus + edge]
        return cls.product(Es, cls.log_etas(N, n_eta), N=N, polylog_exponent=polylog_exponent)


@dataclass(frozen=True)
class LocalLawSample:
    E: float
    eta: float
    m: complex
    m_c: complex
    Lambda: float
    Lambda_d: float
    Lambda_o: float
    Psi: float
    Z_avg: complex
    deviance: complex
    N: int = field(default=0, compare=False)

    @property
    def z(self) -> complex:
        return complex(self.E, self.eta)

    def to_dict(self) -> dict:
        return {"E": self.E, "eta": self.eta, "m_re": self.m.real, "m_im": self.m.imag,
                "mc_re": self.m_c.real, "mc_im": self.m_c.imag, "Lambda": self.Lambda,
                "Lambda_d": self.Lambda_d, "Lambda_o": self.Lambda_o, "Psi": self.Psi,
                "Zavg_re": self.Z_avg.real, "Zavg_im": self.Z_avg.imag,
                "dev_re": self.deviance.real, "dev_im": self.deviance.imag}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, row: dict, N: int = 0) -> "LocalLawSample":
        return cls(row["E"], row["eta"], complex(row["m_re"], row["m_im"]),
                   complex(row["mc_re"], row["mc_im"]), row["Lambda"], row["Lambda_d"],
                   row["Lambda_o"], row["Psi"], complex(row["Zavg_re"], row["Zavg_im"]),
                   complex(row["dev_re"], row["dev_im"]), N)


def psi(im_mc: float, Lambda: float, N: int, eta: float) -> float:
    return math.sqrt((im_mc + Lambda) / (N * eta))


def deviance(m: complex, z, model: MPModel) -> complex:
    """D(m) = (1/m + z d m) - (1/m_c + z d m_c)."""
    if m == 0:
        raise DomainError("deviance is singular at m = 0")
    zc = as_z(z)
    mc = model.stieltjes(zc)
    d = model.d
    return (1 / m + zc * d * m) - (1 / mc + zc * d * mc)


class _MinorFactor:
    """Column-i minor of X factored once, evaluated at many z."""

    def __init__(self, X: np.ndarray, i: int):
        M = X.shape[0]
        Xi = minor(X, [i]).X
        U, s, _ = np.linalg.svd(Xi, full_matrices=False)
        x = X[:, i]
        self.M = M
        self.mu = s * s
        self.proj2 = (U.T @ x) ** 2
        self.rest = max(float(x @ x - self.proj2.sum()), 0.0)  # |x|^2 outside range(U)
        self.n_zero = M - len(s)

    def z_value(self, z: complex) -> complex:
        quad = np.sum(self.proj2 / (self.mu - z)) - self.rest / z
        trace = np.sum(1.0 / (self.mu - z)) - self.n_zero / z
        return z * quad - (z / self.M) * trace

    def quad_and_trace(self, z: complex) -> tuple[complex, complex]:
        return (np.sum(self.proj2 / (self.mu - z)) - self.rest / z,
                np.sum(1.0 / (self.mu - z)) - self.n_zero / z)


def z_vector(X: np.ndarray, z, indices: Sequence[int]) -> np.ndarray:
    """Z_i for each (0-based) column index in ``indices``."""
    zc = as_z(z)
    X = np.asarray(X, dtype=np.float64)
    N = X.shape[1]
    if any(not 0 <= i < N for i in indices):
        raise IndexError("Z index out of range")
    return np.array([_MinorFactor(X, int(i)).z_value(zc) for i in indices], dtype=np.complex128)


def z_average(zs: Sequence[complex]) -> complex:
    if len(zs) == 0:
        raise DomainError("[Z] of an empty list")
    return complex(np.mean(np.asarray(zs, dtype=np.complex128)))


def subset_indices(N: int, k: int) -> np.ndarray:
    """k column indices spread evenly over 0..N-1 (deterministic)."""
    k = max(0, min(k, N))
    return np.unique(np.linspace(0, N - 1, k).round().astype(int)) if k else np.zeros(0, int)


def scan(X: np.ndarray, grid: DomainGrid, z_subset_size: int = 16,
         spectrum: Spectrum | None = None) -> list[LocalLawSample]:
    """One LocalLawSample per grid point for the data matrix X."""
    X = np.asarray(X, dtype=np.float64)
    M, N = X.shape
    if z_subset_size > N:
        raise DomainError("z_subset_size exceeds N")
    S = spectrum if spectrum is not None and spectrum.vectors is not None \
        else covariance_spectrum(X, want_vectors=True)
    model = MPModel.from_dims(N, M)
    factors = [_MinorFactor(X, int(i)) for i in subset_indices(N, z_subset_size)]
    out = []
    for pt in grid.points:
        z = pt.z
        G = green_matrix(S, z)
        diag = np.diagonal(G)
        m = complex(diag.mean())
        mc = model.stieltjes(z)
        Lam = abs(m - mc)
        Lam_d = float(np.max(np.abs(diag - mc)))
        absG = np.abs(G)
        np.fill_diagonal(absG, 0.0)
        Lam_o = float(absG.max()) if N > 1 else 0.0
        zavg = z_average([f.z_value(z) for f in factors]) if factors else complex("nan")
        out.append(LocalLawSample(pt.E, pt.eta, m, mc, Lam, Lam_d, Lam_o,
                                  psi(mc.imag, Lam, N, pt.eta), zavg,
                                  deviance(m, z, model), N))
    return out


def fit_power_law(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    slope, _ = np.linalg.lstsq(A, ly, rcond=None)[0]
    return float(slope)


def median_lambda_by_eta(samples: Iterable[LocalLawSample]) -> tuple[np.ndarray, np.ndarray]:
    groups: dict[float, list[float]] = defaultdict(list)
    for s in samples:
        groups[s.eta].append(s.Lambda)
    etas = np.array(sorted(groups))
    return etas, np.array([np.median(groups[e]) for e in etas])


def fit_decay_exponent(samples: Iterable[LocalLawSample], N: int | None = None) -> float:
    """Slope of log median-Lambda against log(N eta) at a fixed E.

    Samples from several trials are grouped by eta; at least five eta values
    spanning 1.5 decades are required.
    """
    samples = list(samples)
    if N is None:
        N = samples[0].N if samples else 0
    if len({s.E for s in samples}) > 1:
        raise FitError("decay fit expects samples at a single energy E")
    etas, med = median_lambda_by_eta(samples)
    if len(etas) < 5 or math.log10(etas[-1] / etas[0]) < 1.5:
        raise FitError("need >= 5 eta values spanning >= 1.5 decades")
    if np.any(med <= 0) or not N:
        raise FitError("degenerate data for a log-log fit")
    return fit_power_law(N * etas, med)


__all__ = ["DomainGrid", "LocalLawSample", "JSON_FIELDS", "scan", "z_vector", "z_average",
           "deviance", "fit_decay_exponent", "fit_power_law", "psi", "polylog_threshold",
           "subset_indices", "median_lambda_by_eta"]
