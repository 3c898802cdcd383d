"""Soft-edge experiments: Tracy-Widom rescaling, sandwich bounds, Green function comparison.

Edge coordinates come in two flavours:

* the TW coordinate ``(M lambda - (sqrt N + sqrt M)^2) / ((sqrt N + sqrt M)(N^-1/2 + M^-1/2)^{1/3})``
  used for comparisons against F1;
* the edge coordinate ``N^{2/3} (lambda - lambda_+)`` in which the two-sided
  sandwich inequality between ensembles v and w is stated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .ensemble import EnsembleSpec, child_rng, moment_profile, sample_matrix
from .errors import DomainError, PreconditionError
from .mp_model import MPModel
from .spectral import Spectrum, gram_eigenvalues, smoothed_counting
from .stats import one_sample_ks, standard_error, two_sample_ks
from .tracy_widom import TW1Table, default_table

__all__ = [
    "EdgeSample", "GfctConfig", "tw_center_scale", "rescale_topk", "edge_coordinate", "tw_to_edge",
    "edge_montecarlo", "top_eigenvalues", "sandwich_check", "sandwich_slack", "two_sample_ks",
    "ks_vs_tw1", "edge_observable", "gfct_experiment", "gfct_scaling", "column_swap_diff",
    "swap_interlacing", "smooth_cutoff", "TEST_FUNCTIONS",
]


@dataclass(frozen=True)
class EdgeSample:
    ens: str
    trial: int
    k: int
    s: float

    def to_dict(self) -> dict:
        return {"ens": self.ens, "trial": self.trial, "k": self.k, "s": self.s}


def tw_center_scale(N: int, M: int) -> tuple[float, float]:
    a, b = math.sqrt(N), math.sqrt(M)
    return (a + b) ** 2, (a + b) * (1 / a + 1 / b) ** (1 / 3)


def _tw_coord(lam, N: int, M: int):
    c, sc = tw_center_scale(N, M)
    return (M * np.asarray(lam, dtype=np.float64) - c) / sc


def rescale_topk(S: Spectrum, k: int) -> np.ndarray:
    """TW coordinates of the k largest eigenvalues of S (decreasing)."""
    if not 1 <= k <= S.rank:
        raise DomainError(f"k must lie in 1..{S.rank}")
    return _tw_coord(S.eigenvalues[:k], S.N, S.M)


def edge_coordinate(lam, N: int, M: int):
    return N ** (2 / 3) * (np.asarray(lam, dtype=np.float64) - MPModel.from_dims(N, M).lambda_plus)


def tw_to_edge(s, N: int, M: int):
    """Map TW coordinates to the edge coordinate N^{2/3}(lambda - lambda_+)."""
    _, sc = tw_center_scale(N, M)
    return np.asarray(s, dtype=np.float64) * sc * N ** (2 / 3) / M


def top_eigenvalues(X: np.ndarray, k: int) -> np.ndarray:
    """k largest eigenvalues of X^T X via the Gram route (soft edge only)."""
    return gram_eigenvalues(X)[:k]


def edge_montecarlo(spec: EnsembleSpec, trials: int, k: int = 1, start: int = 0,
                    ens: str | None = None) -> list[EdgeSample]:
    """TW coordinates of the top k eigenvalues for trials start .. start+trials-1."""
    if trials < 0:
        raise DomainError("trials must be nonnegative")
    if not 1 <= k <= min(spec.N, spec.M):
        raise DomainError("k out of range")
    tag = ens or spec.kind
    out = []
    for t in range(start, start + trials):
        s = _tw_coord(top_eigenvalues(sample_matrix(spec, t), k), spec.N, spec.M)
        out.extend(EdgeSample(tag, t, r + 1, float(v)) for r, v in enumerate(s))
    return out


def ks_vs_tw1(values: Sequence[float], table: TW1Table | None = None) -> float:
    return one_sample_ks(values, (table or default_table()).cdf)


def sandwich_slack(n_v: int, n_w: int, multiplier: float = 3.0) -> float:
    """multiplier x worst-case (p = 1/2) standard error of a difference of two ECDF values."""
    return multiplier * math.sqrt(0.25 * (1 / n_v + 1 / n_w))


def sandwich_check(v_samples: Sequence[float], w_samples: Sequence[float], epsilon: float,
                   s_grid: Sequence[float] | None = None, slack: float | None = None) -> float:
    """Largest violation of F_v(s - eps) - delta <= F_w(s) <= F_v(s + eps) + delta on s_grid.

    Returns 0 when the empirical CDFs satisfy the two-sided bound everywhere.
    ``slack`` (delta) defaults to three worst-case binomial standard errors.
    """
    v = np.sort(np.asarray(v_samples, dtype=np.float64))
    w = np.sort(np.asarray(w_samples, dtype=np.float64))
    if v.size == 0 or w.size == 0:
        raise DomainError("sandwich check needs two nonempty samples")
    if epsilon < 0:
        raise DomainError("epsilon must be nonnegative")
    if s_grid is None:
        s_grid = np.concatenate([v, w, v - epsilon, v + epsilon])
    s = np.asarray(s_grid, dtype=np.float64)
    delta = sandwich_slack(v.size, w.size) if slack is None else slack
    Fv = lambda x: np.searchsorted(v, x, side="right") / v.size  # noqa: E731
    Fw = np.searchsorted(w, s, side="right") / w.size
    lower = Fv(s - epsilon) - delta - Fw
    upper = Fw - Fv(s + epsilon) - delta
    return float(max(0.0, lower.max(), upper.max()))


# -- Green function comparison ---------------------------------------------

def smooth_cutoff(x):
    """C-infinity q with q = 1 on |x| <= 1/9, q = 0 on |x| >= 2/9, decreasing in |x|."""
    t = np.clip((np.abs(np.asarray(x, dtype=np.float64)) - 1 / 9) * 9, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1 / np.where(t > 0, t, 1)), 0.0)
        b = np.where(t < 1, np.exp(-1 / np.where(t < 1, 1 - t, 1)), 0.0)
    out = 1.0 - a / (a + b)
    return out if out.ndim else float(out)


TEST_FUNCTIONS: dict[str, Callable] = {
    "identity": lambda x: np.asarray(x, dtype=np.float64),
    "square": lambda x: np.asarray(x, dtype=np.float64) ** 2,
    "cutoff": smooth_cutoff,
}


@dataclass(frozen=True)
class GfctConfig:
    """Scales of the edge comparison at a given N.

    eta = N^{-2/3-eps}, ell = eta/2, ell1 = N^{-2/3-3 eps}, eta1 = N^{-2/3-9 eps};
    E = lambda_+ + E_offset * N^{-2/3}; E_zeta = lambda_+ + 2 polylog N^{-2/3}.
    """

    epsilon: float = 0.05
    E_offset: float = 0.0
    F: str = "identity"
    polylog: float = 1.0

    def __post_init__(self) -> None:
        if not 0 < self.epsilon <= 0.1:
            raise DomainError("epsilon must lie in (0, 0.1]")
        if self.F not in TEST_FUNCTIONS:
            raise DomainError(f"unknown test function {self.F!r}")

    def eta(self, N: int) -> float:
        return N ** (-2 / 3 - self.epsilon)

    def ell(self, N: int) -> float:
        return 0.5 * N ** (-2 / 3 - self.epsilon)

    def ell1(self, N: int) -> float:
        return N ** (-2 / 3 - 3 * self.epsilon)

    def eta1(self, N: int) -> float:
        return N ** (-2 / 3 - 9 * self.epsilon)

    def energy(self, N: int, M: int) -> float:
        E = MPModel.from_dims(N, M).lambda_plus + self.E_offset * N ** (-2 / 3)
        if abs(E - MPModel.from_dims(N, M).lambda_plus) > N ** (-2 / 3 + self.epsilon):
            raise DomainError("E is farther than N^{-2/3+eps} from lambda_+")
        return E

    def E_zeta(self, N: int, M: int) -> float:
        return MPModel.from_dims(N, M).lambda_plus + 2 * self.polylog * N ** (-2 / 3)

    def test_function(self) -> Callable:
        return TEST_FUNCTIONS[self.F]


def edge_observable(eigenvalues: np.ndarray, N: int, M: int, cfg: GfctConfig) -> float:
    """N eta Im m(E + i eta) = sum_j eta^2 / ((lambda_j - E)^2 + eta^2)."""
    eta = cfg.eta(N)
    E = cfg.energy(N, M)
    lam = np.asarray(eigenvalues, dtype=np.float64)
    return float(np.sum(eta * eta / ((lam - E) ** 2 + eta * eta)))


def smoothed_edge_count(S: Spectrum, cfg: GfctConfig) -> float:
    """tr chi_{E-ell} * theta_{eta1}(H): the smoothed count fed to the cutoff q."""
    N, M = S.N, S.M
    E = cfg.energy(N, M)
    return smoothed_counting(S, E - cfg.ell(N), cfg.E_zeta(N, M), cfg.eta1(N))


def _check_two_moments(spec_v: EnsembleSpec, spec_w: EnsembleSpec) -> None:
    mv, mw = moment_profile(spec_v), moment_profile(spec_w)
    if any(abs(a - b) > 1e-12 for a, b in zip(mv[:2], mw[:2])):
        raise PreconditionError(
            f"first two moments differ: {mv[:2]} vs {mw[:2]}; comparison needs them equal")


def gfct_values(spec: EnsembleSpec, cfg: GfctConfig, trials: int, start: int = 0) -> np.ndarray:
    F = cfg.test_function()
    vals = [edge_observable(gram_eigenvalues(sample_matrix(spec, t)), spec.N, spec.M, cfg)
            for t in range(start, start + trials)]
    return np.asarray(F(np.array(vals)), dtype=np.float64)


def gfct_experiment(spec_v: EnsembleSpec, spec_w: EnsembleSpec, cfg: GfctConfig, trials: int,
                    start: int = 0, check_moments: bool = True) -> tuple[float, float]:
    """(|E_v F(N eta Im m) - E_w F(N eta Im m)|, pooled standard error).

    The two ensembles use independent streams even when the specs coincide,
    so the identical-spec control measures pure Monte Carlo noise.
    """
    if (spec_v.N, spec_v.M) != (spec_w.N, spec_w.M):
        raise PreconditionError("ensembles must share (N, M)")
    if trials < 2:
        raise DomainError("need at least two trials for an error estimate")
    if check_moments:
        _check_two_moments(spec_v, spec_w)
    fv = gfct_values(spec_v, cfg, trials, start)
    w_spec = spec_w if spec_w != spec_v else spec_w.replace(seed=(spec_w.seed + 1) % 2**64)
    fw = gfct_values(w_spec, cfg, trials, start)
    delta = abs(fv.mean() - fw.mean())
    err = math.hypot(standard_error(fv), standard_error(fw))
    return float(delta), float(err)


def gfct_scaling(spec_v: EnsembleSpec, spec_w: EnsembleSpec, cfg: GfctConfig, trials: int,
                 factor: int = 4, start: int = 0) -> dict:
    """Run the comparison at (N, M) and (factor N, factor M); report the ratio of deltas."""
    small = gfct_experiment(spec_v, spec_w, cfg, trials, start)
    big_v = spec_v.replace(N=spec_v.N * factor, M=spec_v.M * factor)
    big_w = spec_w.replace(N=spec_w.N * factor, M=spec_w.M * factor)
    big = gfct_experiment(big_v, big_w, cfg, trials, start)
    return {"N": spec_v.N, "N_big": big_v.N, "delta": small[0], "err": small[1],
            "delta_big": big[0], "err_big": big[1],
            "ratio": big[0] / small[0] if small[0] > 0 else math.inf}


def _swap_column(X: np.ndarray, gamma: int, gaussian_trial: int, seed: int) -> np.ndarray:
    M = X.shape[0]
    Y = np.array(X, dtype=np.float64, copy=True)
    Y[:, gamma] = child_rng(seed, gaussian_trial, f"swap:{gamma}").standard_normal(M) / math.sqrt(M)
    return Y


def column_swap_diff(X_v: np.ndarray, gamma: int, cfg: GfctConfig, gaussian_trial: int,
                     seed: int = 0) -> float:
    """F(N eta Im m) with column gamma (0-based) original minus with it replaced by a Gaussian column."""
    X_v = np.asarray(X_v, dtype=np.float64)
    M, N = X_v.shape
    if not 0 <= gamma < N:
        raise IndexError("gamma out of range")
    F = cfg.test_function()
    a = edge_observable(gram_eigenvalues(X_v), N, M, cfg)
    b = edge_observable(gram_eigenvalues(_swap_column(X_v, gamma, gaussian_trial, seed)), N, M, cfg)
    return float(F(a) - F(b))


def swap_interlacing(X_v: np.ndarray, gamma: int, cfg: GfctConfig, gaussian_trial: int,
                     seed: int = 0) -> dict:
    """Distances of m and of the swapped m to m~(gamma) = m^(gamma) - 1/(N z).

    Both spectra interlace with the minor's spectrum padded by a zero, so each
    distance is at most pi / (N eta).
    """
    X_v = np.asarray(X_v, dtype=np.float64)
    M, N = X_v.shape
    eta = cfg.eta(N)
    z = complex(cfg.energy(N, M), eta)

    def m_of(lam):
        return np.sum(1.0 / (lam - z)) / N

    m = m_of(gram_eigenvalues(X_v))
    m_swap = m_of(gram_eigenvalues(_swap_column(X_v, gamma, gaussian_trial, seed)))
    minor_lam = gram_eigenvalues(np.delete(X_v, gamma, axis=1))
    m_tilde = m_of(minor_lam) - 1.0 / (N * z)
    return {"orig": abs(m - m_tilde), "swap": abs(m_swap - m_tilde), "bound": math.pi / (N * eta)}
