"""Random data matrices X (M x N) with entries x_ij = q_ij / sqrt(M).

Supported laws for q_ij: standard Gaussian, Rademacher (+-1), a centred
two-point law with one free atom, and column self-normalised Gaussian sums.
Every draw is a pure function of (spec, trial, stream tag): the child seed is
a 64-bit hash of those three values, so trials can run in any order or in
parallel and still reproduce bit-identical matrices.
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from .errors import DegenerateInputError, ParameterError

KINDS = ("gaussian", "rademacher", "two_point", "self_normalized")
DEFAULT_THETA = 0.05
_UINT64 = 2**64


def hash64(base_seed: int, trial: int, stream: str = "data") -> int:
    """64-bit child seed derived from (base seed, trial index, stream tag)."""
    payload = struct.pack("<QQ", base_seed % _UINT64, trial % _UINT64) + stream.encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def child_rng(base_seed: int, trial: int, stream: str = "data") -> np.random.Generator:
    return np.random.default_rng(hash64(base_seed, trial, stream))


def two_point_atoms(a: float) -> tuple[float, float, float]:
    """Return (a, b, p) with P(q=a)=p, P(q=b)=1-p, mean 0 and variance 1.

    p = 1/(1+a^2) and b = -p a/(1-p) = -1/a.
    """
    if not (a > 0 and math.isfinite(a)):
        raise ParameterError(f"two_point atom must be a finite positive number, got {a!r}")
    p = 1.0 / (1.0 + a * a)
    return a, -1.0 / a, p


@dataclass(frozen=True)
class EnsembleSpec:
    """Recipe for the law of sqrt(M) * x_ij.

    ``params`` holds kind-specific values: ``a`` (and optionally a consistent
    ``p``) for ``two_point``; ``variance`` for ``gaussian`` (defaults to 1,
    other values exist only for negative-control experiments).
    """

    kind: str
    N: int
    M: int
    seed: int = 0
    params: dict[str, float] = field(default_factory=dict)
    theta: float = DEFAULT_THETA

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ParameterError(f"unknown ensemble kind {self.kind!r}; expected one of {KINDS}")
        for name in ("N", "M"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ParameterError(f"{name} must be a positive integer, got {v!r}")
        if not (0 <= int(self.seed) < _UINT64):
            raise ParameterError("seed must be an unsigned 64-bit integer")
        if not (0 < self.theta < 1):
            raise ParameterError("theta must lie in (0, 1)")
        d = self.N / self.M
        if not (self.theta < d < 1 / self.theta):
            raise ParameterError(
                f"aspect ratio N/M = {d:.4g} outside ({self.theta}, {1 / self.theta})")
        self._check_params()

    def _check_params(self) -> None:
        allowed = {"gaussian": {"variance"}, "rademacher": set(),
                   "two_point": {"a", "p"}, "self_normalized": set()}[self.kind]
        extra = set(self.params) - allowed
        if extra:
            raise ParameterError(f"unexpected params for {self.kind}: {sorted(extra)}")
        if self.kind == "gaussian":
            v = self.params.get("variance", 1.0)
            if not (v > 0 and math.isfinite(v)):
                raise ParameterError("gaussian variance must be positive and finite")
        elif self.kind == "two_point":
            if "a" not in self.params:
                raise ParameterError("two_point requires the atom parameter 'a'")
            _, _, p = two_point_atoms(float(self.params["a"]))
            if "p" in self.params and abs(float(self.params["p"]) - p) > 1e-12:
                raise ParameterError(
                    f"two_point p={self.params['p']} cannot give mean 0 and variance 1 "
                    f"with a={self.params['a']} (need p={p!r})")

    @property
    def d(self) -> float:
        return self.N / self.M

    @property
    def square(self) -> bool:
        return self.N == self.M

    def replace(self, **changes: Any) -> "EnsembleSpec":
        data = {"kind": self.kind, "N": self.N, "M": self.M, "seed": self.seed,
                "params": dict(self.params), "theta": self.theta}
        data.update(changes)
        return EnsembleSpec(**data)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "params": dict(self.params), "N": int(self.N),
                "M": int(self.M), "seed": int(self.seed)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EnsembleSpec":
        try:
            return cls(kind=data["kind"], N=int(data["N"]), M=int(data["M"]),
                       seed=int(data.get("seed", 0)),
                       params={k: float(v) for k, v in (data.get("params") or {}).items()})
        except KeyError as exc:
            raise ParameterError(f"ensemble spec missing field {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "EnsembleSpec":
        return cls.from_dict(json.loads(text))


def moment_profile(spec: EnsembleSpec) -> tuple[float, float, float, float]:
    """Analytic (E q, E q^2, E q^3, E q^4) for q = sqrt(M) x_ij."""
    if spec.kind == "gaussian":
        v = spec.params.get("variance", 1.0)
        return 0.0, v, 0.0, 3.0 * v * v
    if spec.kind == "rademacher":
        return 0.0, 1.0, 0.0, 1.0
    if spec.kind == "two_point":
        a, b, p = two_point_atoms(float(spec.params["a"]))
        return tuple(p * a**k + (1 - p) * b**k for k in range(1, 5))  # type: ignore[return-value]
    # A column is uniform on the unit sphere of R^M: E x^4 = 3 / (M (M + 2)).
    M = spec.M
    return 0.0, 1.0, 0.0, 3.0 * M / (M + 2)


def analytic_mean_variance(spec: EnsembleSpec) -> tuple[Fraction | float, Fraction | float]:
    """Exact (rational where possible) mean and variance of sqrt(M) x_ij."""
    if spec.kind == "two_point":
        a = Fraction(spec.params["a"]).limit_denominator(10**12)
        p = 1 / (1 + a * a)
        b = -1 / a
        return p * a + (1 - p) * b, p * a * a + (1 - p) * b * b
    m1, m2, _, _ = moment_profile(spec)
    return m1, m2


def _draw_q(spec: EnsembleSpec, rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    if spec.kind == "gaussian":
        q = rng.standard_normal(shape)
        v = spec.params.get("variance", 1.0)
        return q if v == 1.0 else q * math.sqrt(v)
    if spec.kind == "rademacher":
        return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
    a, b, p = two_point_atoms(float(spec.params["a"]))
    return np.where(rng.random(shape) < p, a, b)


def sample_matrix(spec: EnsembleSpec, trial: int, stream: str = "data") -> np.ndarray:
    """Draw the M x N data matrix for ``trial`` (float64, C order)."""
    if trial < 0:
        raise ParameterError("trial index must be nonnegative")
    rng = child_rng(spec.seed, trial, f"{stream}:{spec.kind}")
    shape = (spec.M, spec.N)
    if spec.kind == "self_normalized":
        return self_normalize(rng.standard_normal(shape))
    return _draw_q(spec, rng, shape) / math.sqrt(spec.M)


def self_normalize(X: np.ndarray) -> np.ndarray:
    """Scale every column to unit Euclidean norm."""
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0):
        raise DegenerateInputError("cannot self-normalise a zero column")
    return X / norms


def gaussian_interpolate(X0: np.ndarray, t: float, trial: int, seed: int = 0) -> np.ndarray:
    """Return e^{-t/2} X0 + sqrt(1 - e^{-t}) V with V_ij ~ N(0, 1/M) i.i.d.

    This is the time-t marginal of the matrix Ornstein-Uhlenbeck flow started
    at X0.  V is drawn from the stream derived from (seed, trial).
    """
    if t < 0:
        raise ParameterError("interpolation time must be nonnegative")
    X0 = np.asarray(X0, dtype=np.float64)
    if t == 0:
        return X0.copy()
    M = X0.shape[0]
    V = child_rng(seed, trial, "interp").standard_normal(X0.shape) / math.sqrt(M)
    return math.exp(-t / 2) * X0 + math.sqrt(-math.expm1(-t)) * V
