"""PNG figures for harness runs.

Figures are built on bare ``matplotlib.figure.Figure`` objects (Agg canvas),
so rendering never touches pyplot state or needs a display.
"""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from .mp_model import MPModel
from .tracy_widom import default_table

DPI = 120


def _save(fig: Figure, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    return path


def _ecdf_xy(values):
    x = np.sort(np.asarray(values, dtype=np.float64))
    return x, np.arange(1, x.size + 1) / x.size


def _rows(rows, **match):
    return [r for r in rows if not r.get("trial_complete")
            and all(r.get(k) == v for k, v in match.items())]


def plot_locallaw(cfg, rows, agg, out: Path) -> list[Path]:
    fig = Figure(figsize=(6, 4.5))
    ax = fig.add_subplot()
    groups = defaultdict(lambda: defaultdict(list))
    for r in _rows(rows):
        groups[(r["ens"], r["E"])][r["eta"]].append(r["Lambda"])
    for (ens, E), by_eta in sorted(groups.items()):
        etas = np.array(sorted(by_eta))
        med = np.array([np.median(by_eta[e]) for e in etas])
        ax.loglog(cfg.N * etas, med, "o-", ms=3, label=f"{ens}, E={E:.3f}")
    x = np.logspace(0, np.log10(cfg.N), 20)
    ax.loglog(x, 1 / x, "k--", lw=0.8, label="1/(N eta)")
    ax.set_xlabel("N eta")
    ax.set_ylabel("median Lambda")
    ax.legend(fontsize=7)
    return [_save(fig, out / "locallaw_decay.png")]


def plot_rigidity(cfg, rows, agg, out: Path) -> list[Path]:
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    for ens in sorted({r["ens"] for r in _rows(rows)}):
        vals = [r["max_normalized_dev"] for r in _rows(rows, ens=ens)]
        ax.hist(vals, bins=20, alpha=0.6, label=ens)
    ax.axvline(np.log(cfg.N) ** 3, color="k", ls="--", lw=0.8)
    ax.set_xlabel("max_j N^(2/3) jt^(1/3) |lambda_j - gamma_j|")
    ax.set_ylabel("trials")
    ax.legend(fontsize=8)
    return [_save(fig, out / "rigidity_max_dev.png")]


def plot_edge(cfg, rows, agg, out: Path) -> list[Path]:
    tab = default_table()
    fig = Figure(figsize=(6, 4.5))
    ax = fig.add_subplot()
    for ens in sorted({r["ens"] for r in _rows(rows)}):
        x, y = _ecdf_xy([r["s"] for r in _rows(rows, ens=ens, k=1)])
        ax.step(x, y, where="post", lw=1, label=ens)
    s = np.linspace(-6, 4, 400)
    ax.plot(s, tab.cdf(s), "k--", lw=1, label="TW1")
    ax.set_xlabel("s")
    ax.set_ylabel("CDF of rescaled lambda_1")
    ax.legend(fontsize=8)
    return [_save(fig, out / "edge_cdf.png")]


def plot_gfct(cfg, rows, agg, out: Path) -> list[Path]:
    per_N = agg.get("per_N", {})
    Ns = sorted(int(n) for n in per_N if per_N[n]["delta"] is not None)
    fig = Figure(figsize=(5, 4))
    ax = fig.add_subplot()
    if Ns:
        d = [per_N[str(n)]["delta"] for n in Ns]
        e = [per_N[str(n)]["mc_error"] for n in Ns]
        ax.errorbar(Ns, d, yerr=e, fmt="o-", capsize=3)
        ax.set_xscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("delta_F")
    return [_save(fig, out / "gfct_delta.png")]


def plot_flow(cfg, rows, agg, out: Path) -> list[Path]:
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    for path in ("euler", "exact"):
        x, y = _ecdf_xy([r["top"] for r in _rows(rows, path=path)] or [np.nan])
        ax.step(x, y, where="post", label=path)
    ax.set_xlabel("lambda_1 at time t")
    ax.set_ylabel("CDF")
    ax.legend(fontsize=8)
    return [_save(fig, out / "flow_top_cdf.png")]


def plot_bulk(cfg, rows, agg, out: Path) -> list[Path]:
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    for ens in sorted({r["ens"] for r in _rows(rows)}):
        gaps = [g for r in _rows(rows, ens=ens) for g in r["gaps"]]
        if gaps:
            ax.hist(gaps, bins=np.linspace(0, 4, 41), density=True, histtype="step", label=ens)
    s = np.linspace(0, 4, 200)
    ax.plot(s, np.pi * s / 2 * np.exp(-np.pi * s * s / 4), "k:", lw=0.8, label="Wigner surmise")
    ax.set_xlabel("unfolded gap")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    return [_save(fig, out / "bulk_gaps.png")]


def plot_gen(cfg, rows, agg, out: Path) -> list[Path]:
    model = MPModel.from_dims(cfg.N, cfg.M)
    lam = np.array([x for r in _rows(rows) for x in r["eigenvalues"] if x > 0])
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    if lam.size:
        ax.hist(lam, bins=60, density=True, alpha=0.6, label="eigenvalues")
    x = np.linspace(model.lambda_minus, model.lambda_plus, 400)[1:-1]
    ax.plot(x, model.density(x) / model.continuous_mass, "k-", lw=1, label="MP density")
    ax.set_xlabel("lambda")
    ax.legend(fontsize=8)
    return [_save(fig, out / "gen_histogram.png")]


RENDERERS = {"gen": plot_gen, "locallaw": plot_locallaw, "rigidity": plot_rigidity,
             "edge": plot_edge, "gfct": plot_gfct, "flow": plot_flow, "bulk": plot_bulk}


def render(cfg, rows, agg, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return RENDERERS[cfg.kind](cfg, rows, agg, out)
