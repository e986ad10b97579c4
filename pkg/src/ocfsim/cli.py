"""Command line interface.

Subcommands: synth, ingest, exp {one-vs-two, sim-scaling, pref-scaling,
bound-consistency}, bounds, export-matrix. Options may come from a config
file of ``key = value`` lines (--config); any key can be overridden by the
CLI flag of the same name. Outputs are CSV plus a metadata sidecar; --plot
additionally renders PNG figures next to the CSV.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace

import numpy as np

from . import bounds as bd
from . import experiments as ex
from . import ingest as ig
from .algorithm import run
from .model import Environment, ModelParams, generate_model, export_preferences
from .rng import stream

MODEL_KEYS = ("n_users", "n_items", "n_types", "delta", "nu", "pf",
              "gamma_target")
EXP_KEYS = tuple(f.name for f in fields(ex.ExperimentConfig)
                 if f.name != "model")


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines; '#' starts a comment; blank lines ignored."""
    out = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SystemExit(f"{path}:{lineno}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key] = val
    return out


def _coerce(text: str):
    t = text.strip()
    if t.lower() in ("true", "false"):
        return t.lower() == "true"
    if t.lower() in ("none", ""):
        return None
    if "," in t:
        return tuple(_coerce(p) for p in t.split(","))
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            continue
    return t


def _as_tuple(v):
    if v is None:
        return None
    if isinstance(v, tuple):
        return v
    return (v,)


def build_exp_config(args) -> ex.ExperimentConfig:
    """Resolve defaults < config file < explicit CLI flags."""
    resolved: dict = {}
    if getattr(args, "config", None):
        for key, val in parse_config_file(args.config).items():
            resolved[key] = _coerce(val)
    for key in EXP_KEYS + MODEL_KEYS:
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            resolved[key] = cli_val
    model_kwargs = {k: resolved.pop(k) for k in MODEL_KEYS if k in resolved}
    cfg_kwargs = {k: v for k, v in resolved.items() if k in EXP_KEYS}
    unknown = set(resolved) - set(EXP_KEYS)
    if unknown:
        raise SystemExit(f"unknown config keys: {sorted(unknown)}")
    cfg = ex.ExperimentConfig(**cfg_kwargs)
    for name in ("pf_list", "ts_grid", "tr_grid"):
        val = _as_tuple(getattr(cfg, name))
        if val is not None:
            cfg = replace(cfg, **{name: val})
    if model_kwargs:
        cfg = replace(cfg, model=ModelParams(**model_kwargs))
    return cfg


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int, default=None, help="root seed")
    p.add_argument("--output", default=None, help="output CSV path")
    p.add_argument("--plot", action="store_true",
                   help="render PNG figures next to the CSV")
    for key in EXP_KEYS:
        if key in ("seed", "output", "experiment"):
            continue
        flag = "--" + key.replace("_", "-")
        p.add_argument(flag, dest=key, type=_coerce, default=None,
                       help=argparse.SUPPRESS)
    for key in MODEL_KEYS:
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=_coerce,
                       default=None, help=argparse.SUPPRESS)


def _emit(cfg: ex.ExperimentConfig, table: ex.CurveTable, args,
          extra: dict | None = None, xlabel: str = "x") -> None:
    out = cfg.output or "curves.csv"
    ex.write_csv(table, out)
    ex.write_metadata(cfg, out + ".meta", extra)
    print(f"wrote {out} and {out}.meta")
    if args.plot:
        from .plots import plot_curves

        png = out.rsplit(".", 1)[0] + ".png"
        plot_curves(table, png, xlabel=xlabel)
        print(f"wrote {png}")


def cmd_synth(args) -> int:
    cfg = build_exp_config(args)
    if cfg.model is None:
        raise SystemExit("synth needs model parameters (--n-users, ...)")
    cfg = replace(cfg, experiment="bound-consistency")
    table, flags = ex.run_bound_consistency(cfg)
    if args.export_model:
        export_preferences(generate_model(cfg.model, cfg.seed),
                           args.export_model)
        print(f"wrote {args.export_model}")
    _emit(cfg, table, args, extra={f"flag.{k}": v for k, v in flags.items()},
          xlabel="T")
    return 0


def cmd_ingest(args) -> int:
    cfg = ig.SelectionConfig(
        n_users_out=args.n_users_out, n_items_out=args.n_items_out,
        min_item_count=args.min_item_count, bias_tolerance=args.bias_tolerance,
        mode=args.mode)
    raw = ig.parse_ratings(args.ratings)
    matrix = ig.select_submatrix(ig.binarize(raw), cfg)
    ig.export_matrix_grid(matrix, args.out)
    ig.export_metadata(matrix, cfg, args.out + ".meta")
    print(f"wrote {args.out} ({matrix.shape[0]}x{matrix.shape[1]}, "
          f"+1 {matrix.pos_fraction:.1%}, -1 {matrix.neg_fraction:.1%})")
    if args.plot:
        from .plots import plot_matrix

        png = args.out.rsplit(".", 1)[0] + ".png"
        plot_matrix(matrix.entries, png)
        print(f"wrote {png}")
    return 0


def cmd_export_matrix(args) -> int:
    args.mode = args.mode or "most-rated"
    return cmd_ingest(args)


def cmd_exp(args) -> int:
    cfg = build_exp_config(args)
    cfg = replace(cfg, experiment=args.which)
    entries = None
    if cfg.corpus_path:
        entries = ig.import_matrix_grid(cfg.corpus_path)
    if args.which == "one-vs-two":
        if entries is None:
            if cfg.model is None:
                raise SystemExit("one-vs-two needs --corpus-path or model "
                                 "params for a synthetic matrix")
            entries = ex.synthetic_clustered_matrix(cfg.model, cfg.seed)
        table = ex.run_one_vs_two(cfg, entries)
        _emit(cfg, table, args, xlabel="T")
    elif args.which == "sim-scaling":
        table = ex.run_sim_scaling(cfg, entries)
        _emit(cfg, table, args, xlabel="T_s/pf^2")
    elif args.which == "pref-scaling":
        table = ex.run_pref_scaling(cfg, entries)
        _emit(cfg, table, args, xlabel="T_r/pf")
    else:
        table, flags = ex.run_bound_consistency(cfg)
        _emit(cfg, table, args,
              extra={f"flag.{k}": v for k, v in flags.items()}, xlabel="T")
    return 0


def cmd_bounds(args) -> int:
    b = bd.BoundsInput(
        n_users=args.n_users, n_items=args.n_items, n_types=args.n_types,
        delta_gap=args.delta, nu=args.nu, pf=args.pf, gamma=args.gamma,
        alpha=args.alpha, eta=args.eta, batch_size=args.batch_size,
        k_neighbors=args.k_neighbors, confidence_delta=args.confidence_delta,
        horizon=args.horizon, lam=args.lam)
    report = bd.bounds_report(b)
    for line in report.lines():
        print(line)
    if args.csv:
        with open(args.csv, "w") as f:
            f.write("key,value\n")
            for line in report.lines():
                key, val = (s.strip() for s in line.split("=", 1))
                f.write(f"{key.replace(' ', '_')},{val}\n")
        print(f"wrote {args.csv}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ocfsim")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("synth", help="generate a model, run the policy, "
                        "emit likable-fraction metrics")
    _add_common(ps)
    ps.add_argument("--export-model", default=None,
                    help="also export the preference matrix as text")
    ps.set_defaults(func=cmd_synth)

    pi = sub.add_parser("ingest", help="build a binarized replay corpus")
    pi.add_argument("--ratings", required=True)
    pi.add_argument("--out", required=True)
    pi.add_argument("--n-users-out", type=int, default=1000)
    pi.add_argument("--n-items-out", type=int, default=500)
    pi.add_argument("--min-item-count", type=int, default=1)
    pi.add_argument("--bias-tolerance", type=float, default=0.1)
    pi.add_argument("--mode", default="debiased",
                    choices=["debiased", "most-rated"])
    pi.add_argument("--plot", action="store_true")
    pi.set_defaults(func=cmd_ingest)

    pm = sub.add_parser("export-matrix",
                        help="grayscale image render of the signed grid")
    pm.add_argument("--ratings", required=True)
    pm.add_argument("--out", required=True)
    pm.add_argument("--n-users-out", type=int, default=1000)
    pm.add_argument("--n-items-out", type=int, default=1000)
    pm.add_argument("--min-item-count", type=int, default=1)
    pm.add_argument("--bias-tolerance", type=float, default=1.0)
    pm.add_argument("--mode", default="most-rated",
                    choices=["debiased", "most-rated"])
    pm.add_argument("--plot", action="store_true")
    pm.set_defaults(func=cmd_export_matrix)

    pe = sub.add_parser("exp", help="run one of the bundled experiments")
    pe.add_argument("which", choices=["one-vs-two", "sim-scaling",
                                      "pref-scaling", "bound-consistency"])
    _add_common(pe)
    pe.set_defaults(func=cmd_exp)

    pb = sub.add_parser("bounds", help="evaluate the closed-form bounds")
    pb.add_argument("--n-users", type=int, required=True)
    pb.add_argument("--n-items", type=int, required=True)
    pb.add_argument("--n-types", type=int, required=True)
    pb.add_argument("--delta", type=float, required=True)
    pb.add_argument("--nu", type=float, required=True)
    pb.add_argument("--pf", type=float, required=True)
    pb.add_argument("--gamma", type=float, default=0.0)
    pb.add_argument("--alpha", type=float, default=0.5)
    pb.add_argument("--eta", type=float, default=0.15)
    pb.add_argument("--batch-size", type=int, default=20)
    pb.add_argument("--k-neighbors", type=int, default=10)
    pb.add_argument("--confidence-delta", type=float, default=0.1)
    pb.add_argument("--horizon", type=int, default=1000)
    pb.add_argument("--lam", type=float, default=0.5)
    pb.add_argument("--csv", default=None)
    pb.set_defaults(func=cmd_bounds)

    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    # --seed/--output arrive via _add_common defaults for exp-style commands
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
