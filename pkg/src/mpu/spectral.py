"""Spectra and resolvents of H = X^T X.

Eigenvalues come from the singular values of X (lambda = sigma^2), so the
condition number of X is never squared.  Green-function entries are spectral
sums over one eigendecomposition, which lets a scan visit many spectral
points per matrix for the cost of one SVD.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DataError, DegenerateInputError, DomainError, NumericalError, StateError

ZERO_CLAMP = 1e-10


@dataclass(frozen=True)
class SpectralPoint:
    E: float
    eta: float

    def __post_init__(self) -> None:
        if not self.eta > 0:
            raise DomainError(f"spectral point needs eta > 0, got {self.eta!r}")

    @property
    def z(self) -> complex:
        return complex(self.E, self.eta)


def as_z(z: complex | SpectralPoint) -> complex:
    if isinstance(z, SpectralPoint):
        return z.z
    z = complex(z)
    if z.imag <= 0:
        raise DomainError(f"spectral parameter needs Im z > 0, got {z!r}")
    return z


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of X^T X in decreasing order, optionally with eigenvectors.

    ``vectors[:, a]`` is the unit eigenvector v_a for ``eigenvalues[a]``.
    ``singular_values`` keeps the min(M, N) singular values of X so the
    companion matrix X X^T (which has M - N extra zeros when M > N) is
    available without another factorisation.
    """

    eigenvalues: np.ndarray
    M: int
    N: int
    vectors: np.ndarray | None = None
    singular_values: np.ndarray | None = None

    @property
    def d(self) -> float:
        return self.N / self.M

    @property
    def rank(self) -> int:
        return min(self.M, self.N)

    @property
    def nonzero(self) -> np.ndarray:
        return self.eigenvalues[: self.rank]

    def companion_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of X X^T (length M), decreasing."""
        out = np.zeros(self.M)
        out[: self.rank] = self.eigenvalues[: self.rank]
        return out

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "lambda_j"])
            for j, lam in enumerate(self.eigenvalues, start=1):
                w.writerow([j, repr(float(lam))])


class GreenSlice(NamedTuple):
    z: complex
    diag: np.ndarray
    offdiag_max: float
    m: complex


def _check_matrix(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("data matrix must be two-dimensional")
    if not np.all(np.isfinite(X)):
        raise DataError("data matrix has non-finite entries")
    return X


def covariance_spectrum(X: np.ndarray, want_vectors: bool = False) -> Spectrum:
    """Spectrum of X^T X from the SVD of X."""
    X = _check_matrix(X)
    M, N = X.shape
    r = min(M, N)
    lam = np.zeros(N)
    V = None
    if N == 0:
        return Spectrum(lam, M, N, np.zeros((0, 0)) if want_vectors else None, np.zeros(0))
    if want_vectors:
        # full_matrices so the null space of X is spanned when N > M
        _, s, Vt = np.linalg.svd(X, full_matrices=N > M)
        V = np.ascontiguousarray(Vt.T)
    else:
        s = np.linalg.svd(X, compute_uv=False)
    lam[:r] = s * s
    lam[lam < ZERO_CLAMP * max(1.0, lam[0])] = 0.0
    return Spectrum(lam, M, N, V, s)


def gram_eigenvalues(X: np.ndarray) -> np.ndarray:
    """All N eigenvalues of X^T X (decreasing) from the Gram matrix of the shorter side.

    Cheaper than an SVD; absolute accuracy is eps * lambda_1, which is all the
    edge and bulk statistics need.
    """
    X = _check_matrix(X)
    M, N = X.shape
    gram = X.T @ X if N <= M else X @ X.T
    lam = np.zeros(N)
    lam[: min(M, N)] = np.linalg.eigvalsh(gram)[::-1]
    return lam


def empirical_stieltjes(S: Spectrum, z):
    """m(z) = (1/N) sum_j 1/(lambda_j - z); ``z`` may be an array."""
    zz = np.asarray(z.z if isinstance(z, SpectralPoint) else z, dtype=np.complex128)
    out = np.mean(1.0 / (S.eigenvalues[:, None] - zz.ravel()[None, :]), axis=0).reshape(zz.shape)
    return out if out.ndim else complex(out)


def green_matrix(S: Spectrum, z) -> np.ndarray:
    """Dense G(z) = sum_a v_a v_a^T / (lambda_a - z)."""
    if S.vectors is None:
        raise StateError("green function entries need a spectrum computed with vectors")
    w = 1.0 / (S.eigenvalues - as_z(z))
    V = S.vectors
    return (V * w.real) @ V.T + 1j * ((V * w.imag) @ V.T)


def green_slice(S: Spectrum, z) -> GreenSlice:
    zc = as_z(z)
    G = green_matrix(S, zc)
    diag = np.diagonal(G).copy()
    off = np.abs(G)
    np.fill_diagonal(off, 0.0)
    offmax = float(off.max()) if S.N > 1 else 0.0
    return GreenSlice(zc, diag, offmax, complex(diag.mean()) if S.N else complex("nan"))


def trace_identity_residual(X: np.ndarray, z) -> float:
    """|tr (X^T X - z)^-1 - tr (X X^T - z)^-1 - (M - N)/z| from shared singular values."""
    zc = as_z(z)
    S = covariance_spectrum(X)
    tr_G = np.sum(1.0 / (S.eigenvalues - zc))
    tr_cG = np.sum(1.0 / (S.companion_eigenvalues() - zc))
    return float(abs(tr_G - tr_cG - (S.M - S.N) / zc))


class Minor(NamedTuple):
    """Column minor X^(T): ``X`` keeps the columns listed in ``columns`` (original indices)."""

    X: np.ndarray
    columns: np.ndarray
    removed: tuple[int, ...]

    @property
    def degenerate(self) -> bool:
        return self.X.shape[1] == 0


def minor(X: np.ndarray, T: Sequence[int] = ()) -> Minor:
    """Remove the (0-based) columns in T."""
    X = np.asarray(X, dtype=np.float64)
    N = X.shape[1]
    T = tuple(sorted(set(int(t) for t in T)))
    if any(t < 0 or t >= N for t in T):
        raise IndexError(f"column index out of range 0..{N - 1}: {T}")
    keep = np.setdiff1d(np.arange(N), T)
    return Minor(X[:, keep], keep, T)


# -- resolvent identities ---------------------------------------------------

def _dense_G(X: np.ndarray, z: complex) -> np.ndarray:
    N = X.shape[1]
    return np.linalg.inv(X.T @ X - z * np.eye(N))


def _dense_cG(X: np.ndarray, z: complex) -> np.ndarray:
    M = X.shape[0]
    return np.linalg.inv(X @ X.T - z * np.eye(M))


def gii_identity_residual(X: np.ndarray, z, i: int) -> float:
    """|G_ii - 1/(-z - z <x_i, cG^(i) x_i>)|."""
    zc = as_z(z)
    G = _dense_G(X, zc)
    xi = X[:, i]
    cGi = _dense_cG(minor(X, [i]).X, zc)
    return float(abs(G[i, i] - 1.0 / (-zc - zc * (xi @ cGi @ xi))))


def gij_identity_residual(X: np.ndarray, z, i: int, j: int) -> float:
    """|G_ij - z G_ii G^(i)_jj <x_i, cG^(ij) x_j>| for i != j."""
    if i == j:
        raise DomainError("off-diagonal identity needs i != j")
    zc = as_z(z)
    G = _dense_G(X, zc)
    mi = minor(X, [i])
    Gi = _dense_G(mi.X, zc)
    jj = int(np.searchsorted(mi.columns, j))
    cGij = _dense_cG(minor(X, [i, j]).X, zc)
    rhs = zc * G[i, i] * Gi[jj, jj] * (X[:, i] @ cGij @ X[:, j])
    return float(abs(G[i, j] - rhs))


def removal_identity_residual(X: np.ndarray, z, i: int, j: int, k: int) -> float:
    """|G_ij - G^(k)_ij - G_ik G_kj / G_kk| for i, j != k (i = j allowed)."""
    if k in (i, j):
        raise DomainError("removal identity needs k outside {i, j}")
    zc = as_z(z)
    G = _dense_G(X, zc)
    if abs(G[k, k]) < 1e-12:
        raise NumericalError(f"near-singular pivot |G_kk| = {abs(G[k, k]):.3g}")
    mk = minor(X, [k])
    Gk = _dense_G(mk.X, zc)
    ii, jj = (int(np.searchsorted(mk.columns, t)) for t in (i, j))
    return float(abs(G[i, j] - Gk[ii, jj] - G[i, k] * G[k, j] / G[k, k]))


def resolvent_identity_residuals(X: np.ndarray, z, i: int, j: int, k: int) -> tuple[float, float, float]:
    """Residuals of the three resolvent identities, each checked by dense inversion.

    Indices are 0-based column indices with i != j and k not in {i, j}.
    """
    X = _check_matrix(X)
    N = X.shape[1]
    if N < 3:
        raise DomainError("resolvent identities need N >= 3")
    for t in (i, j, k):
        if not 0 <= t < N:
            raise IndexError(f"index {t} out of range 0..{N - 1}")
    return (gii_identity_residual(X, z, i),
            gij_identity_residual(X, z, i, j),
            removal_identity_residual(X, z, i, j, k))


# -- counting functions -------------------------------------------------------

def counting(S: Spectrum, E):
    """Normalised counting function #{lambda_j >= E} / N."""
    asc = S.eigenvalues[::-1]
    E_arr = np.asarray(E, dtype=np.float64)
    out = (S.N - np.searchsorted(asc, E_arr, side="left")) / S.N
    return out if np.ndim(out) else float(out)


def smoothed_counting(S: Spectrum, E: float, E_top: float, eta: float) -> float:
    """tr (1_[E, E_top] * theta_eta)(H) in closed form.

    theta_eta(x) = eta / (pi (x^2 + eta^2)); each eigenvalue contributes
    (arctan((lambda - E)/eta) - arctan((lambda - E_top)/eta)) / pi.
    """
    if not E < E_top:
        raise DomainError("smoothed counting needs E < E_top")
    if not eta > 0:
        raise DomainError("smoothed counting needs eta > 0")
    lam = S.eigenvalues
    return float(np.sum(np.arctan((lam - E) / eta) - np.arctan((lam - E_top) / eta)) / math.pi)
