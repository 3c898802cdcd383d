"""Aggregate JSONL outputs into quantile summaries keyed by statistic name."""
from __future__ import annotations

import json
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable

import numpy as np

from ..errors import DataError
from ..stats import quantile7
from .config import SCHEMA_VERSION, ExperimentConfig
from .experiments import aggregate
from .runner import METADATA_FILE, read_rows

QUANTILES = (0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0)
META_FIELDS = {"config_hash", "schema", "kind", "trial", "trial_complete", "ens", "path",
               "grid_index", "k", "N", "M", "E", "b", "eta"}


def describe(values: Iterable[float]) -> dict:
    """Count, exact-sum mean and type-7 quantiles; independent of input order."""
    v = np.sort(np.asarray(list(values), dtype=np.float64))
    if v.size == 0:
        return {"n": 0}
    qs = quantile7(v, QUANTILES)
    return {"n": int(v.size), "mean": math.fsum(v) / v.size, "median": float(qs[3]),
            "quantiles": {repr(q): float(x) for q, x in zip(QUANTILES, qs)}}


def statistic_values(rows: Iterable[dict]) -> dict[str, list[float]]:
    out: dict[str, list[float]] = defaultdict(list)
    for r in rows:
        if r.get("trial_complete"):
            continue
        tag = r.get("ens") or r.get("path")
        for key, val in r.items():
            if key in META_FIELDS:
                continue
            name = f"{tag}.{key}" if tag else key
            if isinstance(val, bool) or val is None:
                continue
            if isinstance(val, (int, float)):
                out[name].append(float(val))
            elif isinstance(val, list) and all(isinstance(x, (int, float)) for x in val):
                out[name].extend(float(x) for x in val)
    return out


def _load_config(path: Path, h: str) -> ExperimentConfig | None:
    meta = path.parent / METADATA_FILE
    if not meta.exists():
        return None
    try:
        data = json.loads(meta.read_text())
        cfg = ExperimentConfig.from_dict(data["config"])
    except Exception:
        return None
    return cfg if cfg.content_hash() == h else None


def summarize(paths: Iterable[str | Path], allow_mixed: bool = False) -> dict:
    paths = [Path(p) for p in paths]
    if not paths:
        raise DataError("no input files")
    rows, by_file = [], {}
    for p in paths:
        rs = read_rows(p)
        for n, r in enumerate(rs, 1):
            if not isinstance(r, dict) or "config_hash" not in r or "trial" not in r:
                raise DataError(f"{p}: row {n} lacks config_hash/trial")
            if r.get("schema") != SCHEMA_VERSION:
                raise DataError(f"{p}: row {n} has schema {r.get('schema')!r}, expected {SCHEMA_VERSION}")
        rows.extend(rs)
        by_file[p] = rs
    hashes = sorted({r["config_hash"] for r in rows})
    if len(hashes) > 1 and not allow_mixed:
        raise DataError(f"inputs mix config hashes {hashes}; pass --allow-mixed to combine them")
    stats = {k: describe(v) for k, v in sorted(statistic_values(rows).items())}
    out = {"config_hashes": hashes, "rows": sum(1 for r in rows if not r.get("trial_complete")),
           "statistics": stats}
    if len(hashes) == 1:
        cfg = next((c for c in (_load_config(p, hashes[0]) for p in paths) if c is not None), None)
        if cfg is not None:
            out["aggregate"] = aggregate(cfg, rows)
    return out
