"""Deterministic orchestration: trials run in a thread pool, rows are written in trial order.

Output directory layout::

    data.jsonl      one JSON object per row, then a trial_complete sentinel per trial
    summary.json    kind-specific aggregates over all complete trials
    metadata.json   config, hash, version and wall times (the only nondeterministic file)
    *.csv           per-index reports where the kind has them
"""
from __future__ import annotations

import json
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .. import __version__
from ..errors import DataError
from .config import SCHEMA_VERSION, ExperimentConfig
from .experiments import TASKS, aggregate

DATA_FILE = "data.jsonl"
SUMMARY_FILE = "summary.json"
METADATA_FILE = "metadata.json"


def _dumps(row: dict) -> str:
    return json.dumps(row, allow_nan=True)


def _header(cfg_hash: str, kind: str, trial: int) -> dict:
    return {"config_hash": cfg_hash, "schema": SCHEMA_VERSION, "kind": kind, "trial": trial}


def read_rows(path: str | Path) -> list[dict]:
    rows = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{n}: {exc}") from None
    return rows


def _completed_prefix(path: Path, cfg_hash: str) -> tuple[list[str], set[int]]:
    """Lines belonging to complete trials, and the set of those trials.

    A torn final line (from an interrupted write) is dropped, as are rows of a
    trial whose sentinel never made it to disk.
    """
    lines, done, pending = [], set(), []
    with open(path) as fh:
        for raw in fh:
            if not raw.endswith("\n"):
                break
            try:
                row = json.loads(raw)
            except json.JSONDecodeError:
                break
            if row.get("config_hash") != cfg_hash:
                raise DataError(f"{path} was written by a different config ({row.get('config_hash')})")
            pending.append(raw.rstrip("\n"))
            if row.get("trial_complete"):
                done.add(int(row["trial"]))
                lines.extend(pending)
                pending = []
    return lines, done


def run(cfg: ExperimentConfig, out_dir: str | Path | None = None, threads: int | None = None,
        resume: bool = False, figures: bool = False) -> dict:
    """Run every missing trial of ``cfg`` and write data, summary and metadata files.

    Returns the summary dict.  Output bytes of data.jsonl and summary.json do
    not depend on ``threads`` or on whether the run was resumed.
    """
    out = Path(out_dir or cfg.output or f"mpu-{cfg.kind}")
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.content_hash()
    data_path = out / DATA_FILE
    threads = threads or os.cpu_count() or 1
    t_start = time.time()

    kept, done = ([], set())
    if resume and data_path.exists():
        kept, done = _completed_prefix(data_path, h)
    todo = [t for t in range(cfg.trials) if t not in done]
    task = TASKS[cfg.kind]

    with open(data_path, "w") as fh:
        for line in kept:
            fh.write(line + "\n")
        fh.flush()
        wall = {}

        def job(trial: int):
            t0 = time.perf_counter()
            rows = task(cfg, trial, out)
            return rows, time.perf_counter() - t0

        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [(t, pool.submit(job, t)) for t in todo]
            # single serialized sink: results are consumed in trial order
            for t, fut in futures:
                rows, dt = fut.result()
                head = _header(h, cfg.kind, t)
                for r in rows:
                    fh.write(_dumps({**head, **r}) + "\n")
                fh.write(_dumps({**head, "trial_complete": True}) + "\n")
                fh.flush()
                wall[str(t)] = dt

    rows = read_rows(data_path)
    # a resumed run with holes is rewritten in canonical trial order
    order = [r["trial"] for r in rows]
    if order != sorted(order):
        rows.sort(key=lambda r: r["trial"])
        with open(data_path, "w") as fh:
            for r in rows:
                fh.write(_dumps(r) + "\n")

    summary = {"config_hash": h, "schema": SCHEMA_VERSION, "kind": cfg.kind,
               "trials": cfg.trials, "aggregate": aggregate(cfg, rows)}
    with open(out / SUMMARY_FILE, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)

    fig_paths = []
    if figures:
        from .. import plots
        fig_paths = [str(p.name) for p in plots.render(cfg, rows, summary["aggregate"], out)]

    meta = {"config": cfg.to_dict(), "config_hash": h, "schema": SCHEMA_VERSION,
            "version": __version__, "python": platform.python_version(),
            "threads": threads, "resumed_trials": sorted(done), "wall_time_total": time.time() - t_start,
            "trial_wall_times": wall, "figures": fig_paths}
    with open(out / METADATA_FILE, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return summary
