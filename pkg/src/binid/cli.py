"""Command-line front end.

    binid example 1 [--seeds N] [--steps N] [--out DIR] [--no-plots] ...
    binid run --config PATH [...]
    binid validate --config PATH

Exit codes: 0 success, 1 runtime or validation failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import plots
from .config import ExperimentConfig, dump_config, load_config
from .errors import BinIdError
from .presets import EXAMPLE_IDS, example_config
from .sim import ExperimentResult, run_experiment

log = logging.getLogger("binid")

PREVIEW_STEPS = 10


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seeds", type=int, help="number of replications")
    p.add_argument("--base-seed", type=int, help="replication i uses seed base+i")
    p.add_argument("--steps", type=int, help="run length n")
    p.add_argument("--out", help="output directory (default: $BINID_OUT or the config's)")
    p.add_argument("--no-plots", action="store_true", help="skip gnuplot scripts")
    p.add_argument("--stride", type=int, help="trace stride beyond the full-resolution prefix")
    p.add_argument("--workers", type=int, help="worker processes (default: CPU count)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="binid",
        description="Quasi-Newton identification and adaptive control with binary sensors.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("example", help="run one of the canned experiments")
    ex.add_argument("id", type=int, choices=EXAMPLE_IDS)
    _add_run_flags(ex)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("--config", required=True)
    _add_run_flags(run)

    val = sub.add_parser("validate", help="check a config file and print derived quantities")
    val.add_argument("--config", required=True)
    return parser


def _apply_flags(cfg: ExperimentConfig, args) -> ExperimentConfig:
    overrides = {}
    for flag, key in (("seeds", "seeds"), ("base_seed", "base_seed"), ("steps", "n"),
                      ("stride", "stride"), ("workers", "workers")):
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = value
    out = args.out or os.environ.get("BINID_OUT")
    if out:
        overrides["directory"] = out
    if args.no_plots:
        overrides["emit_plots"] = False
    return cfg.with_overrides(**overrides) if overrides else cfg


def _report(result: ExperimentResult, out: Path) -> None:
    cfg = result.config
    print(f"{cfg.output.name}: {len(result.seeds)} seed(s), n={cfg.run.n}, output in {out}")
    for n in result.checkpoint_ns:
        parts = [f"n={n:>7}", f"|err|^2={result.median('theta_err_sq', n):.4g}"]
        for metric in ("G_n", "regret_over_log", "regret_avg", "J_n", "L_n"):
            vals = result.values(metric, n)
            if len(vals) and not all(v != v for v in vals):
                parts.append(f"{metric}={result.median(metric, n):.4g}")
        print("  median " + "  ".join(parts))
    bad = sum(a.range_violations for a in result.audits.values())
    clamps = sum(a.clamp_count for a in result.audits.values())
    print(f"  range violations: {bad}   clamped inputs: {clamps}")


def _execute(cfg: ExperimentConfig) -> int:
    out = Path(cfg.output.directory)
    result = run_experiment(cfg, out_dir=out)
    (out / f"{cfg.output.name}.toml").write_text(dump_config(cfg))
    if cfg.output.emit_plots and result.trace_paths:
        plots.write_scripts(result, out)
    _report(result, out)
    return 0


def cmd_example(example_id: int, args) -> int:
    cfg = example_config(example_id, directory=f"out/example{example_id}")
    return _execute(_apply_flags(cfg, args))


def cmd_run(config_path, args) -> int:
    return _execute(_apply_flags(load_config(config_path), args))


def cmd_validate(config_path) -> int:
    cfg = load_config(config_path)
    est = cfg.validate()
    print(f"config {config_path}: OK")
    print(f"  dimension p           = {est.dim}")
    print(f"  L = sup |x| over box  = {est.L:.10g}")
    print(f"  M, C                  = {est.regressor_bound:g}, {est.threshold_bound:g}")
    print(f"  LM + C                = {est.density_radius:.10g}")
    print(f"  beta0 upper bound     = {est.beta0_upper:.10g}")
    print(f"  beta0                 = {est.beta0:.10g}")
    preview = est.beta_schedule(PREVIEW_STEPS)
    print("  beta_k, k<%d          = %s" % (PREVIEW_STEPS, " ".join(f"{b:.6g}" for b in preview)))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "example":
            return cmd_example(args.id, args)
        if args.command == "run":
            return cmd_run(args.config, args)
        return cmd_validate(args.config)
    except BinIdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
