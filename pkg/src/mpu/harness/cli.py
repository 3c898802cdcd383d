"""Command line entry point ``mpu``.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical/domain failure.
Errors are reported on stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import json
import sys

from ..errors import ConfigError, DataError, MPUError
from ..tracy_widom import TW1Table, check_table
from .config import DEFAULT_OPTIONS, ExperimentConfig, apply_seed_env, parse_ensemble
from .runner import run
from .summarize import summarize

DEFAULT_ENSEMBLES = {"gfct": ["gaussian", "rademacher"], "bulk": ["gaussian", "rademacher"]}

# option name -> (flag, type); flags map onto ExperimentConfig.options
OPTION_FLAGS = {
    "E": ("--E", float), "n_eta": ("--n-eta", int), "eta_lo_exp": ("--eta-lo-exp", float),
    "eta_hi_exp": ("--eta-hi-exp", float), "z_subset": ("--z-subset", int),
    "k": ("--k", int), "epsilon_exp": ("--epsilon-exp", float), "batch": ("--batch", int),
    "epsilon": ("--epsilon", float), "E_offset": ("--E-offset", float), "F": ("--F", str),
    "factors": ("--factors", int), "check_moments": ("--no-moment-check", None),
    "t": ("--t", float), "steps": ("--steps", int), "b": ("--b", float),
    "flow_time": ("--flow-time", float), "poisson": ("--no-poisson", None),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse errors are config errors
        raise ConfigError(message)


def _add_experiment(sub, kind: str, help_text: str) -> None:
    p = sub.add_parser(kind, help=help_text, allow_abbrev=False)
    p.add_argument("--config", help="JSON config file; its fields win over flags")
    p.add_argument("--N", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--ensemble", action="append", metavar="KIND[:k=v,...]",
                   help="ensemble, e.g. gaussian, rademacher, two_point:a=2 (repeatable)")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--p", dest="polylog_exponent", type=float, help="polylog exponent")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    p.add_argument("--resume", action="store_true", help="keep complete trials already on disk")
    p.add_argument("--figures", action="store_true", help="also write PNG figures")
    for name in DEFAULT_OPTIONS[kind]:
        flag, typ = OPTION_FLAGS[name]
        if typ is None:
            p.add_argument(flag, dest=f"opt_{name}", action="store_false", default=None)
        elif name == "factors":
            p.add_argument(flag, dest=f"opt_{name}", type=int, nargs="+")
        else:
            p.add_argument(flag, dest=f"opt_{name}", type=typ)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mpu", allow_abbrev=False,
                     description="Spectral universality experiments for sample covariance matrices")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add_experiment(sub, "gen", "sample spectra")
    _add_experiment(sub, "locallaw", "local law scan over a spectral-domain grid")
    _add_experiment(sub, "rigidity", "rigidity, counting, edge and delocalization reports")
    _add_experiment(sub, "edge", "Tracy-Widom edge statistics and sandwich batches")
    _add_experiment(sub, "gfct", "edge Green function comparison between two ensembles")
    _add_experiment(sub, "flow", "OU flow against its closed-form marginal")
    _add_experiment(sub, "bulk", "bulk spacing comparison between two ensembles")
    s = sub.add_parser("summarize", help="quantile summaries of JSONL outputs")
    s.add_argument("files", nargs="+")
    s.add_argument("--allow-mixed", action="store_true")
    s.add_argument("--out", help="write the summary JSON here instead of stdout")
    t = sub.add_parser("tw-table-check", help="validate the TW1 table against the Fredholm oracle")
    t.add_argument("--table", help="CSV table to check (default: shipped table)")
    t.add_argument("--oracle-tol", type=float, default=1e-4)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    kind = args.command
    d: dict = {"kind": kind}
    for name in ("N", "M", "trials", "seed", "polylog_exponent"):
        v = getattr(args, name)
        if v is not None:
            d[name] = v
    if args.out is not None:
        d["output"] = args.out
    ens = args.ensemble or DEFAULT_ENSEMBLES.get(kind)
    if ens:
        d["ensembles"] = [parse_ensemble(e) for e in ens]
    opts = {n: getattr(args, f"opt_{n}") for n in DEFAULT_OPTIONS[kind]
            if getattr(args, f"opt_{n}", None) is not None}
    if opts:
        d["options"] = opts
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError("config must be a JSON object")
        if file_cfg.get("kind", kind) != kind:
            raise ConfigError(f"config kind {file_cfg['kind']!r} does not match command {kind!r}")
        # the file wins on conflict; options merge key by key
        merged_opts = {**d.get("options", {}), **file_cfg.get("options", {})}
        d.update(file_cfg)
        if merged_opts:
            d["options"] = merged_opts
    for req in ("N", "M"):
        if req not in d:
            raise ConfigError(f"--{req} is required (flag or config field)")
    return apply_seed_env(ExperimentConfig.from_dict(d))


def _emit_error(exc: BaseException, code: int) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "summarize":
            res = summarize(args.files, allow_mixed=args.allow_mixed)
            text = json.dumps(res, indent=2, sort_keys=True)
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text + "\n")
            else:
                print(text)
            return 0
        if args.command == "tw-table-check":
            table = TW1Table.from_csv(args.table) if args.table else None
            rep = check_table(table, oracle_tol=args.oracle_tol)
            print(json.dumps(rep, indent=2))
            return 0 if rep["ok"] else DataError.exit_code
        cfg = config_from_args(args)
        summary = run(cfg, cfg.output, threads=args.threads, resume=args.resume, figures=args.figures)
        print(json.dumps(summary, indent=2, sort_keys=True))
        return 0
    except MPUError as exc:
        return _emit_error(exc, exc.exit_code)
    except (FileNotFoundError, PermissionError) as exc:
        return _emit_error(exc, DataError.exit_code)


if __name__ == "__main__":
    sys.exit(main())
