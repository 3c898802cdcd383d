"""Matrix Ornstein-Uhlenbeck flow and bulk spacing statistics.

The flow dX = dB / sqrt(M) - X dt / 2 has the closed-form marginal
X_t = e^{-t/2} X_0 + sqrt(1 - e^{-t}) V (see ``ensemble.gaussian_interpolate``);
its singular values perform the Dyson Brownian motion.  Only the matrix
flow is simulated.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .ensemble import EnsembleSpec, child_rng, gaussian_interpolate, sample_matrix
from .errors import DomainError, ParameterError, PreconditionError
from .mp_model import MPModel
from .spectral import Spectrum, gram_eigenvalues
from .stats import two_sample_ks

MAX_DT = 0.1


@dataclass
class FlowState:
    """Single-owner state of one OU trajectory; noise for step k comes from (seed, trial, k)."""

    X: np.ndarray
    t: float = 0.0
    step: int = 0
    seed: int = 0
    trial: int = 0

    def copy(self) -> "FlowState":
        return FlowState(self.X.copy(), self.t, self.step, self.seed, self.trial)


def step_noise(state: FlowState) -> np.ndarray:
    return child_rng(state.seed, state.trial, f"ou:{state.step}").standard_normal(state.X.shape)


def ou_step(state: FlowState, dt: float, noise: np.ndarray | None = None) -> FlowState:
    """One Euler-Maruyama step X + sqrt(dt/M) Xi - (dt/2) X.

    ``noise`` overrides Xi (a zero array gives the pure drift update).
    Returns a new state; the input is not modified.
    """
    if not dt > 0:
        raise ParameterError(f"time step must be positive, got {dt!r}")
    if dt > MAX_DT:
        raise ParameterError(f"time step {dt} exceeds the stability guard {MAX_DT}")
    M = state.X.shape[0]
    xi = step_noise(state) if noise is None else np.asarray(noise, dtype=np.float64)
    if xi.shape != state.X.shape:
        raise ParameterError("noise shape does not match X")
    X = state.X * (1 - dt / 2) + math.sqrt(dt / M) * xi
    return FlowState(X, state.t + dt, state.step + 1, state.seed, state.trial)


def run_flow(X0: np.ndarray, t: float, steps: int, trial: int = 0, seed: int = 0) -> FlowState:
    if steps < 1:
        raise ParameterError("steps must be >= 1")
    state = FlowState(np.array(X0, dtype=np.float64, copy=True), 0.0, 0, seed, trial)
    dt = t / steps
    for _ in range(steps):
        state = ou_step(state, dt)
    return state


def flow_vs_closed_form(X0: np.ndarray, t: float, steps: int, trials: int, seed: int = 0,
                        return_samples: bool = False):
    """Two-sample KS between top eigenvalues of the Euler flow and of the exact marginal at time t."""
    if t < 0:
        raise ParameterError("flow time must be nonnegative")
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if steps < 100 * t:
        raise PreconditionError(f"need steps >= 100 t = {100 * t:g}")
    X0 = np.asarray(X0, dtype=np.float64)
    if t == 0:
        top = np.full(trials, gram_eigenvalues(X0)[0])
        return (0.0, top, top.copy()) if return_samples else 0.0
    a = np.array([gram_eigenvalues(run_flow(X0, t, steps, k, seed).X)[0] for k in range(trials)])
    b = np.array([gram_eigenvalues(gaussian_interpolate(X0, t, k, seed))[0] for k in range(trials)])
    ks = two_sample_ks(a, b)
    return (ks, a, b) if return_samples else ks


# -- bulk spacings -----------------------------------------------------------

@dataclass(frozen=True)
class SpacingSample:
    E: float
    b: float
    gaps: np.ndarray
    trial: int = 0

    @property
    def empty(self) -> bool:
        return self.gaps.size == 0

    def to_dict(self) -> dict:
        return {"E": self.E, "b": self.b, "gaps": [float(g) for g in self.gaps], "trial": self.trial}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def check_window(model: MPModel, E: float, b: float, margin: float = 0.05) -> None:
    r = margin * model.width
    if not b > 0:
        raise DomainError("window half-width must be positive")
    if E - b < model.lambda_minus + r or E + b > model.lambda_plus - r:
        raise DomainError(
            f"window [{E - b:.4g}, {E + b:.4g}] not inside the bulk "
            f"[{model.lambda_minus + r:.4g}, {model.lambda_plus - r:.4g}]")


def unfolded_gaps(eigenvalues: np.ndarray, N: int, model: MPModel, E: float, b: float) -> np.ndarray:
    lam = np.sort(np.asarray(eigenvalues, dtype=np.float64))
    w = lam[(lam >= E - b) & (lam <= E + b)]
    return N * float(model.density(E)) * np.diff(w)


def spacing_sample(S: Spectrum, model: MPModel, E: float, b: float, trial: int = 0) -> SpacingSample:
    """Gaps of consecutive eigenvalues in [E - b, E + b], unfolded by N rho_c(E)."""
    check_window(model, E, b)
    return SpacingSample(float(E), float(b), unfolded_gaps(S.eigenvalues, S.N, model, E, b), trial)


def poisson_eigenvalues(model: MPModel, N: int, trial: int, seed: int = 0, table_size: int = 4096) -> np.ndarray:
    """N i.i.d. draws from rho_c (no level repulsion), decreasing.

    Inverse-CDF sampling on a table of classical locations; for d > 1 the
    zero atom is included with its weight.
    """
    locs = _quantile_table(model, table_size)
    rng = child_rng(seed, trial, "poisson")
    u = rng.random(N)
    cm = model.continuous_mass
    cont = u < cm
    # tail mass n_c(gamma) = j / table_size, decreasing gamma in j
    q = np.concatenate([[0.0], np.arange(1, locs.size + 1) / table_size])
    g = np.concatenate([[model.lambda_plus], locs])
    lam = np.zeros(N)
    lam[cont] = np.interp(u[cont], q, g)
    return np.sort(lam)[::-1]


_QTABLES: dict[tuple[float, int], np.ndarray] = {}


def _quantile_table(model: MPModel, size: int) -> np.ndarray:
    key = (model.d, size)
    if key not in _QTABLES:
        _QTABLES[key] = model.classical_locations(size).gamma
    return _QTABLES[key]


Source = Union[EnsembleSpec, Callable[[int], np.ndarray]]


def pooled_gaps(source: EnsembleSpec, E: float, b: float, trials: int, flow_time: float = 0.0,
                stream: str = "data", start: int = 0) -> tuple[np.ndarray, list[SpacingSample]]:
    """Pool unfolded gaps over trials; optionally flow each matrix to ``flow_time`` first."""
    if flow_time < 0:
        raise ParameterError("flow time must be nonnegative")
    model = MPModel.from_dims(source.N, source.M)
    check_window(model, E, b)
    samples = []
    for t in range(start, start + trials):
        X = sample_matrix(source, t, stream)
        if flow_time > 0:
            X = gaussian_interpolate(X, flow_time, t, source.seed)
        lam = gram_eigenvalues(X)
        samples.append(SpacingSample(float(E), float(b), unfolded_gaps(lam, source.N, model, E, b), t))
    gaps = np.concatenate([s.gaps for s in samples]) if samples else np.zeros(0)
    return gaps, samples


def poisson_gaps(N: int, M: int, E: float, b: float, trials: int, seed: int = 0) -> np.ndarray:
    model = MPModel.from_dims(N, M)
    check_window(model, E, b)
    out = [unfolded_gaps(poisson_eigenvalues(model, N, t, seed), N, model, E, b) for t in range(trials)]
    return np.concatenate(out) if out else np.zeros(0)


def bulk_compare(specA: EnsembleSpec, specB: EnsembleSpec, E: float, b: float, trials: int,
                 flow_time_a: float = 0.0, flow_time_b: float = 0.0) -> float:
    """Two-sample KS between pooled unfolded gaps of two ensembles.

    A and B draw from separate streams, so identical specs give independent samples.
    """
    if (specA.N, specA.M) != (specB.N, specB.M):
        raise PreconditionError("ensembles must share (N, M)")
    ga, _ = pooled_gaps(specA, E, b, trials, flow_time_a, stream="bulkA")
    gb, _ = pooled_gaps(specB, E, b, trials, flow_time_b, stream="bulkB")
    return two_sample_ks(ga, gb)


def poisson_control(spec: EnsembleSpec, E: float, b: float, trials: int) -> float:
    """KS between the ensemble's gaps and gaps of an i.i.d. (Poisson) spectrum with the same density."""
    ga, _ = pooled_gaps(spec, E, b, trials, stream="bulkA")
    return two_sample_ks(ga, poisson_gaps(spec.N, spec.M, E, b, trials, spec.seed))


__all__ = ["FlowState", "ou_step", "run_flow", "flow_vs_closed_form", "SpacingSample",
           "spacing_sample", "unfolded_gaps", "check_window", "poisson_eigenvalues",
           "pooled_gaps", "poisson_gaps", "bulk_compare", "poisson_control", "MAX_DT"]
