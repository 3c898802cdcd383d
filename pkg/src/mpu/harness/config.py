"""Experiment configuration: validation, JSON round trip and content hash."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any

from ..edge_lab import GfctConfig
from ..ensemble import EnsembleSpec
from ..errors import ConfigError, MPUError
from ..flow import check_window
from ..mp_model import MPModel

SCHEMA_VERSION = 1
KINDS = ("gen", "locallaw", "rigidity", "edge", "gfct", "flow", "bulk")
SEED_ENV = "MPU_SEED"

# per-kind options and their defaults; None means "derive from N, M"
DEFAULT_OPTIONS: dict[str, dict[str, Any]] = {
    "gen": {},
    "locallaw": {"E": None, "n_eta": 12, "eta_lo_exp": -0.9, "eta_hi_exp": -0.2, "z_subset": 16},
    "rigidity": {},
    "edge": {"k": 1, "epsilon_exp": 0.1, "batch": 100},
    "gfct": {"epsilon": 0.05, "E_offset": 0.0, "F": "identity", "factors": [1],
             "check_moments": True},
    "flow": {"t": 0.5, "steps": 200},
    "bulk": {"E": None, "b": 0.2, "flow_time": 0.0, "poisson": True},
}
# number of ensembles each kind accepts (min, max)
ENSEMBLE_COUNT = {"gen": (1, 8), "locallaw": (1, 8), "rigidity": (1, 8), "edge": (1, 8),
                  "gfct": (2, 2), "flow": (1, 1), "bulk": (2, 2)}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    N: int
    M: int
    ensembles: tuple[dict, ...] = ({"kind": "gaussian", "params": {}},)
    trials: int = 1
    seed: int = 0
    polylog_exponent: float = 3.0
    options: dict = field(default_factory=dict)
    output: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        for name in ("N", "M", "trials", "seed"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"{name} must be an integer, got {v!r}")
        if self.trials < 0:
            raise ConfigError("trials must be >= 0")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        lo, hi = ENSEMBLE_COUNT[self.kind]
        if not lo <= len(self.ensembles) <= hi:
            raise ConfigError(f"{self.kind} takes {lo}..{hi} ensembles, got {len(self.ensembles)}")
        unknown = set(self.options) - set(DEFAULT_OPTIONS[self.kind])
        if unknown:
            raise ConfigError(f"unknown options for {self.kind}: {sorted(unknown)}")
        object.__setattr__(self, "ensembles", tuple(
            {"kind": e["kind"], "params": dict(e.get("params", {}))} for e in self.ensembles))
        object.__setattr__(self, "options", {**DEFAULT_OPTIONS[self.kind], **self.options})
        # building the specs validates kinds, params and the aspect ratio
        try:
            self.specs()
        except MPUError as exc:
            raise ConfigError(str(exc)) from None
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad ensemble entry: {exc}") from None
        try:
            self._check_options()
        except MPUError as exc:
            raise ConfigError(str(exc)) from None

    def _check_options(self) -> None:
        o = self.options
        if self.kind == "gfct":
            GfctConfig(o["epsilon"], o["E_offset"], o["F"]).energy(self.N, self.M)
            if not o["factors"] or any(int(f) != f or f < 1 for f in o["factors"]):
                raise ConfigError("factors must be positive integers")
        elif self.kind == "edge":
            if not 1 <= o["k"] <= min(self.N, self.M):
                raise ConfigError("k must lie in 1..min(N, M)")
            if o["batch"] < 1:
                raise ConfigError("batch must be >= 1")
        elif self.kind == "flow":
            if o["t"] < 0 or o["steps"] < 1 or o["steps"] < 100 * o["t"]:
                raise ConfigError("flow needs t >= 0 and steps >= max(1, 100 t)")
        elif self.kind == "bulk":
            m = MPModel.from_dims(self.N, self.M)
            check_window(m, (m.lambda_minus + m.lambda_plus) / 2 if o["E"] is None else o["E"], o["b"])
            if o["flow_time"] < 0:
                raise ConfigError("flow_time must be >= 0")
        elif self.kind == "locallaw":
            if o["n_eta"] < 1 or o["z_subset"] < 0 or o["z_subset"] > self.N:
                raise ConfigError("need n_eta >= 1 and 0 <= z_subset <= N")

    def specs(self) -> list[EnsembleSpec]:
        return [EnsembleSpec(e["kind"], self.N, self.M, self.seed, e["params"]) for e in self.ensembles]

    def labels(self) -> list[str]:
        """Ensemble tags used in output rows; repeated kinds get a numeric suffix."""
        out, seen = [], {}
        for e in self.ensembles:
            k = e["kind"]
            seen[k] = seen.get(k, 0) + 1
            out.append(k if seen[k] == 1 else f"{k}{seen[k]}")
        return out

    def to_dict(self, include_output: bool = True) -> dict:
        d = {"kind": self.kind, "N": self.N, "M": self.M,
             "ensembles": [dict(e) for e in self.ensembles], "trials": self.trials,
             "seed": self.seed, "polylog_exponent": self.polylog_exponent,
             "options": dict(self.options)}
        if include_output:
            d["output"] = self.output
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        allowed = {"kind", "N", "M", "ensembles", "trials", "seed", "polylog_exponent",
                   "options", "output"}
        extra = set(data) - allowed
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        missing = {"kind", "N", "M"} - set(data)
        if missing:
            raise ConfigError(f"missing config fields: {sorted(missing)}")
        kw = dict(data)
        if "ensembles" in kw:
            kw["ensembles"] = tuple(kw["ensembles"])
        return cls(**kw)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None

    def content_hash(self) -> str:
        """sha256 (first 16 hex digits) of the canonical JSON without the output path."""
        blob = json.dumps(self.to_dict(include_output=False), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def replace(self, **changes: Any) -> "ExperimentConfig":
        d = self.to_dict()
        d.update(changes)
        return ExperimentConfig.from_dict(d)


def apply_seed_env(cfg: ExperimentConfig, environ=None) -> ExperimentConfig:
    """MPU_SEED, when set, overrides the configured seed."""
    env = os.environ if environ is None else environ
    raw = env.get(SEED_ENV)
    if raw is None or raw == "":
        return cfg
    try:
        seed = int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None
    return cfg.replace(seed=seed)


def parse_ensemble(text: str) -> dict:
    """'two_point:a=2' -> {'kind': 'two_point', 'params': {'a': 2.0}}."""
    kind, _, rest = text.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"bad ensemble parameter {item!r}; expected key=value")
        try:
            params[key.strip()] = float(val)
        except ValueError:
            raise ConfigError(f"ensemble parameter {key!r} must be numeric") from None
    return {"kind": kind.strip(), "params": params}
