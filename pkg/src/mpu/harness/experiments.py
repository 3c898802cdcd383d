"""Per-trial tasks and end-of-run aggregates for each experiment kind.

A task maps (config, trial) to a list of row dicts; it is pure, so trials can
run in any order or thread.  An aggregator maps the full row list (in any
order) to a JSON-ready dict.
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict
from pathlib import Path
from typing import Callable

import numpy as np

from .. import edge_lab, flow, locallaw, rigidity
from ..ensemble import gaussian_interpolate, sample_matrix
from ..errors import PreconditionError
from ..locallaw import DomainGrid, LocalLawSample, polylog_threshold
from ..mp_model import MPModel
from ..spectral import covariance_spectrum, gram_eigenvalues
from ..stats import quantile7, standard_error, two_sample_ks
from .config import ExperimentConfig

Rows = list[dict]


def _model(cfg: ExperimentConfig) -> MPModel:
    return MPModel.from_dims(cfg.N, cfg.M)


# -- gen --------------------------------------------------------------------

def task_gen(cfg: ExperimentConfig, trial: int, out_dir: Path | None = None) -> Rows:
    rows = []
    if out_dir is not None and trial == 0:
        model = _model(cfg)
        _locations(model, cfg.N, min(cfg.N, cfg.M)).to_csv(out_dir / "classical_locations.csv")
    for label, spec in zip(cfg.labels(), cfg.specs()):
        S = covariance_spectrum(sample_matrix(spec, trial))
        if out_dir is not None:
            S.to_csv(out_dir / f"spectrum_{label}_trial{trial:05d}.csv")
        lam = S.eigenvalues
        rows.append({"ens": label, "lambda_1": float(lam[0]), "eigenvalues": [float(x) for x in lam]})
    return rows


def agg_gen(cfg: ExperimentConfig, rows: Rows) -> dict:
    out = {}
    for label, grp in _by(rows, "ens").items():
        top = [r["lambda_1"] for r in grp]
        out[label] = {"trials": len(grp), "lambda_1_median": quantile7(top, 0.5)}
    return {"lambda_plus": _model(cfg).lambda_plus, "ensembles": out}


# -- locallaw ------------------------------------------------------------------

def locallaw_grid(cfg: ExperimentConfig) -> DomainGrid:
    o = cfg.options
    model = _model(cfg)
    etas = DomainGrid.log_etas(cfg.N, o["n_eta"], o["eta_lo_exp"], o["eta_hi_exp"])
    if o["E"] is None:
        edge = cfg.N ** (-2 / 3)
        Es = [(model.lambda_minus + model.lambda_plus) / 2, model.lambda_plus - edge,
              model.lambda_plus + edge]
    else:
        Es = [o["E"]] if np.isscalar(o["E"]) else list(o["E"])
    return DomainGrid.product(Es, etas, polylog_exponent=cfg.polylog_exponent)


def task_locallaw(cfg: ExperimentConfig, trial: int, out_dir: Path | None = None) -> Rows:
    grid = locallaw_grid(cfg)
    rows = []
    for label, spec in zip(cfg.labels(), cfg.specs()):
        for g, s in enumerate(locallaw.scan(sample_matrix(spec, trial), grid, cfg.options["z_subset"])):
            rows.append({"ens": label, "grid_index": g, **s.to_dict()})
    return rows


def agg_locallaw(cfg: ExperimentConfig, rows: Rows) -> dict:
    N, p = cfg.N, cfg.polylog_exponent
    thr = polylog_threshold(N, p)
    out = {"polylog_threshold": thr}
    for label, grp in _by(rows, "ens").items():
        per_E: dict = {}
        for E, sub in _by(grp, "E").items():
            samples = [LocalLawSample.from_dict(r, N) for r in sub]
            entry = {"n": len(samples)}
            try:
                entry["slope"] = locallaw.fit_decay_exponent(samples, N)
            except Exception as exc:  # FitError and friends: reported, not fatal
                entry["slope"] = None
                entry["fit_error"] = str(exc)
            lam = np.array([s.Lambda for s in samples])
            bound = np.array([thr / (N * s.eta) for s in samples])
            psi_b = np.array([thr * s.Psi for s in samples])
            entry["frac_Lambda_within_polylog"] = float(np.mean(lam <= bound))
            entry["frac_Lambda_d_within_polylog_Psi"] = float(np.mean([s.Lambda_d for s in samples] <= psi_b))
            entry["frac_Lambda_o_within_polylog_Psi"] = float(np.mean([s.Lambda_o for s in samples] <= psi_b))
            entry["max_Lambda_times_N_eta"] = float(np.max(lam * N * np.array([s.eta for s in samples])))
            per_E[repr(float(E))] = entry
        out[label] = per_E
    return out


# -- rigidity ------------------------------------------------------------------

_LOCS: dict = {}


def _locations(model: MPModel, N: int, count: int):
    key = (model.d, N, count)
    if key not in _LOCS:
        _LOCS[key] = model.classical_locations(N, count)
    return _LOCS[key]


def task_rigidity(cfg: ExperimentConfig, trial: int, out_dir: Path | None = None) -> Rows:
    model = _model(cfg)
    locs = _locations(model, cfg.N, min(cfg.N, cfg.M))
    rows = []
    for label, spec in zip(cfg.labels(), cfg.specs()):
        S = covariance_spectrum(sample_matrix(spec, trial), want_vectors=True)
        rep = rigidity.rigidity_report(S, locs)
        if out_dir is not None:
            rep.to_csv(out_dir / f"rigidity_{label}_trial{trial:05d}.csv")
        top, bottom = rigidity.edge_confinement(S, model)
        rows.append({"ens": label, "max_normalized_dev": rep.max_normalized, "argmax_j": rep.argmax,
                     "counting_dev": rigidity.counting_deviation(S, model),
                     "top_edge": top, "bottom_edge": bottom,
                     "deloc_max": rigidity.delocalization(S).max_value})
    return rows


def agg_rigidity(cfg: ExperimentConfig, rows: Rows) -> dict:
    N = cfg.N
    t3, t2 = math.log(N) ** 3, math.log(N) ** 2
    out = {"log3": t3, "log2": t2}
    for label, grp in _by(rows, "ens").items():
        out[label] = {
            "trials": len(grp),
            "median_max_normalized_dev": quantile7([r["max_normalized_dev"] for r in grp], 0.5),
            "median_counting_dev": quantile7([r["counting_dev"] for r in grp], 0.5),
            "frac_deloc_within_log2": float(np.mean([r["deloc_max"] <= t2 for r in grp])),
            "frac_top_edge_within_log2": float(np.mean([r["top_edge"] <= t2 for r in grp])),
            "frac_bottom_edge_within_log2": (
                None if grp[0]["bottom_edge"] is None
                else float(np.mean([r["bottom_edge"] <= t2 for r in grp]))),
        }
    return out


# -- edge --------------------------------------------------------------------

def task_edge(cfg: ExperimentConfig, trial: int, out_dir: Path | None = None) -> Rows:
    k = cfg.options["k"]
    rows = []
    for label, spec in zip(cfg.labels(), cfg.specs()):
        rows.extend(s.to_dict() for s in edge_lab.edge_montecarlo(spec, 1, k, start=trial, ens=label))
    return rows


def edge_samples(rows: Rows, k: int = 1) -> dict[str, np.ndarray]:
    out = {}
    for label, grp in _by(rows, "ens").items():
        grp = sorted((r for r in grp if r["k"] == k), key=lambda r: r["trial"])
        out[label] = np.array([r["s"] for r in grp])
    return out


def agg_edge(cfg: ExperimentConfig, rows: Rows) -> dict:
    N, M = cfg.N, cfg.M
    samples = edge_samples(rows)
    eps = N ** (-cfg.options["epsilon_exp"])
    batch = cfg.options["batch"]
    out: dict = {"ks_vs_tw1": {}, "pairwise_ks": {}, "sandwich": {}, "epsilon": eps, "batch": batch}
    for label, s in samples.items():
        out["ks_vs_tw1"][label] = edge_lab.ks_vs_tw1(s) if s.size else None
    for a, b in itertools.combinations(samples, 2):
        if samples[a].size and samples[b].size:
            out["pairwise_ks"][f"{a}|{b}"] = two_sample_ks(samples[a], samples[b])
            out["sandwich"][f"{a}|{b}"] = sandwich_batches(samples[a], samples[b], N, M, eps, batch)
    return out


def sandwich_batches(v: np.ndarray, w: np.ndarray, N: int, M: int, eps: float, batch: int) -> dict:
    """Sandwich violations on consecutive trial batches, in the edge coordinate."""
    ev, ew = edge_lab.tw_to_edge(v, N, M), edge_lab.tw_to_edge(w, N, M)
    n = min(ev.size, ew.size) // batch
    viol = [edge_lab.sandwich_check(ev[i * batch:(i + 1) * batch], ew[i * batch:(i + 1) * batch], eps)
            for i in range(n)]
    return {"batches": n, "violations": viol,
            "frac_zero": float(np.mean(np.array(viol) == 0)) if n else None}


# -- gfct --------------------------------------------------------------------

def _gfct_cfg(cfg: ExperimentConfig) -> edge_lab.GfctConfig:
    o = cfg.options
    return edge_lab.GfctConfig(o["epsilon"], o["E_offset"], o["F"])


def task_gfct(cfg: ExperimentConfig, trial: int, out_dir: Path | None = None) -> Rows:
    gc = _gfct_cfg(cfg)
    F = gc.test_function()
    v, w = cfg.specs()
    if cfg.options["check_moments"]:
        edge_lab._check_two_moments(v, w)
    if v == w:
        w = w.replace(seed=(w.seed + 1) % 2**64)
    rows = []
    for f in cfg.options["factors"]:
        for label, spec in zip(("v", "w"), (v, w)):
            sp = spec.replace(N=spec.N * f, M=spec.M * f)
            obs = edge_lab.edge_observable(gram_eigenvalues(sample_matrix(sp, trial)), sp.N, sp.M, gc)
            rows.append({"ens": label, "N": sp.N, "M": sp.M, "obs": obs, "value": float(F(obs))})
    return rows


def agg_gfct(cfg: ExperimentConfig, rows: Rows) -> dict:
    per_N = {}
    for N, grp in sorted(_by(rows, "N").items()):
        by = _by(grp, "ens")
        fv = np.array([r["value"] for r in sorted(by.get("v", []), key=lambda r: r["trial"])])
        fw = np.array([r["value"] for r in sorted(by.get("w", []), key=lambda r: r["trial"])])
        if fv.size < 2 or fw.size < 2:
            per_N[str(N)] = {"trials": int(fv.size), "delta": None, "mc_error": None}
            continue
        per_N[str(N)] = {"trials": int(fv.size), "delta": float(abs(math.fsum(fv) / fv.size - math.fsum(fw) / fw.size)),
                         "mc_error": math.hypot(standard_error(fv), standard_error(fw))}
    out = {"per_N": per_N}
    Ns = sorted(int(n) for n in per_N)
    if len(Ns) >= 2:
        lo, hi = per_N[str(Ns[0])]["delta"], per_N[str(Ns[-1])]["delta"]
        out["ratio"] = hi / lo if lo and hi is not None else None
    return out


# -- flow --------------------------------------------------------------------

def flow_start(cfg: ExperimentConfig) -> np.ndarray:
    return sample_matrix(cfg.specs()[0], 0, stream="x0")


def task_flow(cfg: ExperimentConfig, trial: int, out_dir: Path | None = None) -> Rows:
    t, steps = cfg.options["t"], cfg.options["steps"]
    X0 = flow_start(cfg)
    if steps < 100 * t:
        raise PreconditionError(f"need steps >= 100 t = {100 * t:g}")
    if t == 0:
        a = b = gram_eigenvalues(X0)[0]
    else:
        a = gram_eigenvalues(flow.run_flow(X0, t, steps, trial, cfg.seed).X)[0]
        b = gram_eigenvalues(gaussian_interpolate(X0, t, trial, cfg.seed))[0]
    return [{"path": "euler", "top": float(a)}, {"path": "exact", "top": float(b)}]


def agg_flow(cfg: ExperimentConfig, rows: Rows) -> dict:
    by = _by(rows, "path")
    if not by:
        return {"ks": None}
    a = [r["top"] for r in by["euler"]]
    b = [r["top"] for r in by["exact"]]
    return {"ks": two_sample_ks(a, b), "trials": len(a), "t": cfg.options["t"],
            "steps": cfg.options["steps"]}


# -- bulk --------------------------------------------------------------------

def bulk_energy(cfg: ExperimentConfig) -> float:
    E = cfg.options["E"]
    if E is None:
        m = _model(cfg)
        return (m.lambda_minus + m.lambda_plus) / 2
    return float(E)


def task_bulk(cfg: ExperimentConfig, trial: int, out_dir: Path | None = None) -> Rows:
    E, b = bulk_energy(cfg), cfg.options["b"]
    A, B = cfg.specs()
    la, lb = cfg.labels()
    rows = []
    _, sa = flow.pooled_gaps(A, E, b, 1, cfg.options["flow_time"], stream="bulkA", start=trial)
    _, sb = flow.pooled_gaps(B, E, b, 1, 0.0, stream="bulkB", start=trial)
    rows.append({"ens": "A:" + la, **sa[0].to_dict()})
    rows.append({"ens": "B:" + lb, **sb[0].to_dict()})
    if cfg.options["poisson"]:
        model = _model(cfg)
        gaps = flow.unfolded_gaps(flow.poisson_eigenvalues(model, cfg.N, trial, cfg.seed), cfg.N, model, E, b)
        rows.append({"ens": "poisson", **flow.SpacingSample(E, b, gaps, trial).to_dict()})
    return rows


def agg_bulk(cfg: ExperimentConfig, rows: Rows) -> dict:
    pooled = {}
    for label, grp in _by(rows, "ens").items():
        grp = sorted(grp, key=lambda r: r["trial"])
        pooled[label] = np.array([g for r in grp for g in r["gaps"]])
    out: dict = {"n_gaps": {k: int(v.size) for k, v in pooled.items()},
                 "mean_gap": {k: (float(v.mean()) if v.size else None) for k, v in pooled.items()},
                 "ks": {}}
    for a, b in itertools.combinations(sorted(pooled), 2):
        if pooled[a].size and pooled[b].size:
            out["ks"][f"{a}|{b}"] = two_sample_ks(pooled[a], pooled[b])
    return out


# -- registry -------------------------------------------------------------------

def _by(rows: Rows, key: str) -> dict:
    out: dict = defaultdict(list)
    for r in rows:
        out[r.get(key)].append(r)
    return dict(out)


TASKS: dict[str, Callable] = {"gen": task_gen, "locallaw": task_locallaw, "rigidity": task_rigidity,
                              "edge": task_edge, "gfct": task_gfct, "flow": task_flow, "bulk": task_bulk}
AGGREGATES: dict[str, Callable] = {"gen": agg_gen, "locallaw": agg_locallaw, "rigidity": agg_rigidity,
                                   "edge": agg_edge, "gfct": agg_gfct, "flow": agg_flow, "bulk": agg_bulk}


def aggregate(cfg: ExperimentConfig, rows: Rows) -> dict:
    rows = [r for r in rows if not r.get("trial_complete")]
    rows = sorted(rows, key=lambda r: r["trial"])
    return AGGREGATES[cfg.kind](cfg, rows)
