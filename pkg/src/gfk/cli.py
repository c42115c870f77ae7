"""Command line entry points.

Each subcommand resolves a config (preset -> optional file -> --set overrides
-> --seed/--out flags), runs one experiment, and writes delimited output plus
a ``run_meta.json`` echo of the resolved config and wall-clock times.  Unless
``--no-figures`` is given, a rendered figure lands next to each CSV.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._io import RunMeta, write_csv
from .config import ExperimentConfig, dothan_defaults, expvasicek_defaults
from .cutoff import junction_report
from .experiments import (
    band_from_config,
    classical_check,
    increment_law_for,
    regularized_for,
    run_epsilon_sweep,
    run_table1,
    run_table2,
    run_trajectories,
)
from . import figures

__all__ = ["main", "build_parser"]

DEFAULT_EPS_SWEEP = "1e-2,1e-3,1e-4,1e-6,1e-7"


def _resolve_config(args, preset: ExperimentConfig) -> ExperimentConfig:
    cfg = preset
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    cfg = cfg.apply_overrides(args.set or [])
    if args.seed is not None:
        cfg = cfg.with_override("mc", "seed", str(args.seed))
    if args.out is not None:
        cfg = cfg.with_override("output", "directory", args.out)
    if args.no_figures:
        cfg = cfg.with_override("output", "figures", "false")
    return cfg.validate()


def _outdir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _meta(cfg: ExperimentConfig, command: str) -> RunMeta:
    return RunMeta(command, cfg.to_ini(), __version__)


def cmd_table1(args) -> int:
    cfg = _resolve_config(args, dothan_defaults())
    out = _outdir(cfg)
    meta = _meta(cfg, "table1")
    meta.start("total")
    table = run_table1(cfg)
    meta.stop("total")
    table.write_csv(out / "table1.csv")
    meta.record("values", table.values.tolist())
    meta.record("cell_seconds", table.cell_seconds.tolist())
    meta.record("notes", table.meta)
    meta.save(out / "run_meta.json")
    if cfg.output.figures:
        figures.render_table(table, out / "table1.png", "call value at (0, x0)")
    print(f"table1 -> {out/'table1.csv'}")
    return 0


def cmd_table2(args) -> int:
    cfg = _resolve_config(args, expvasicek_defaults())
    out = _outdir(cfg)
    meta = _meta(cfg, "table2")
    meta.start("total")
    table = run_table2(cfg)
    meta.stop("total")
    table.write_csv(out / "table2.csv")
    meta.record("values", table.values.tolist())
    meta.record("cell_seconds", table.cell_seconds.tolist())
    meta.record("notes", table.meta)
    meta.save(out / "run_meta.json")
    if cfg.output.figures:
        figures.render_table(table, out / "table2.png", "bond value at (0, x0)")
    print(f"table2 -> {out/'table2.csv'}")
    return 0


def cmd_trajectories(args) -> int:
    cfg = _resolve_config(args, dothan_defaults())
    if args.n_paths:
        cfg = cfg.with_override("mc", "n_paths", str(args.n_paths)).validate()
    out = _outdir(cfg)
    meta = _meta(cfg, "trajectories")
    meta.start("total")
    result = run_trajectories(cfg)
    meta.stop("total")
    result.write_csv(out / "trajectories.csv")
    meta.record("mean_u_terminal", result.mean_u_terminal)
    meta.record("mean_m_terminal", result.mean_m_terminal)
    # reported for any band; a flatness check only when sigma_lo = sigma_hi
    meta.record("drift_statistic", result.drift_statistic)
    meta.record("n_paths", result.n_paths)
    meta.record("n_exited", result.n_exited)
    meta.record("n_censored", result.n_censored)
    if result.censor_fraction > 1e-3:
        meta.warn(f"censored fraction {result.censor_fraction:.2%} exceeds 0.1%")
    meta.save(out / "run_meta.json")
    if cfg.output.figures:
        figures.render_trajectories(result, out / "trajectories.png",
                                    f"{cfg.model.type} sample paths")
    print(
        f"trajectories -> {out/'trajectories.csv'} "
        f"(mean terminal value {result.mean_u_terminal:.4f}, "
        f"mean discounted terminal {result.mean_m_terminal:.4f})"
    )
    return 0


def cmd_eps_sweep(args) -> int:
    cfg = _resolve_config(args, dothan_defaults())
    eps_list = [float(tok) for tok in args.eps_list.split(",") if tok.strip()]
    out = _outdir(cfg)
    meta = _meta(cfg, "eps-sweep")
    meta.start("total")
    sweep = run_epsilon_sweep(cfg, eps_list)
    meta.stop("total")
    sweep.write_csv(out / "eps_sweep.csv")
    meta.record("eps", list(sweep.eps_values))
    meta.record("values", sweep.values.tolist())
    meta.record("bound_gaps", sweep.bound_gaps.tolist())
    meta.save(out / "run_meta.json")
    if cfg.output.figures:
        figures.render_eps_sweep(sweep, out / "eps_sweep.png",
                                 "cutoff-width convergence")
    print(f"eps-sweep -> {out/'eps_sweep.csv'}")
    return 0


def cmd_classical_check(args) -> int:
    preset = dothan_defaults().apply_overrides(
        ["band.sigma_lo=1.0", "band.sigma_hi=1.0", "mc.n_steps=100"]
    )
    cfg = _resolve_config(args, preset)
    out = _outdir(cfg)
    meta = _meta(cfg, "classical-check")
    meta.start("total")
    check = classical_check(cfg, n_paths=args.n_paths or None)
    meta.stop("total")
    check.write_csv(out / "classical_check.csv")
    meta.record("drift_statistic", check.drift_statistic)
    meta.record("n_paths", check.n_paths)
    meta.save(out / "run_meta.json")
    if cfg.output.figures:
        figures.render_classical_drift(check, out / "classical_check.png",
                                       "degenerate-band martingale average")
    print(f"classical-check -> drift statistic {check.drift_statistic:.3%}")
    return 0


def cmd_gheat_cdf(args) -> int:
    cfg = _resolve_config(args, dothan_defaults())
    out = _outdir(cfg)
    meta = _meta(cfg, "gheat-cdf")
    meta.start("total")
    law = increment_law_for(cfg, band_from_config(cfg))
    meta.stop("total")
    law.save_csv(out / "gheat_cdf.csv")
    meta.record("n_levels", int(law.a_grid.size))
    meta.save(out / "run_meta.json")
    if cfg.output.figures:
        figures.render_cdf(law, out / "gheat_cdf.png",
                           f"increment law, band ({cfg.band.sigma_lo:g}, "
                           f"{cfg.band.sigma_hi:g})")
    print(f"gheat-cdf -> {out/'gheat_cdf.csv'}")
    return 0


def cmd_junction_report(args) -> int:
    preset = dothan_defaults() if args.model == "dothan" else expvasicek_defaults()
    cfg = _resolve_config(args, preset)
    out = _outdir(cfg)
    meta = _meta(cfg, "junction-report")
    meta.start("total")
    reg = regularized_for(cfg)
    report = junction_report(reg, tol=args.tol, stencil=args.stencil)
    meta.stop("total")
    report.to_csv(out / "junction_report.csv")
    meta.record("passed", report.passed)
    meta.record("delta_eps", reg.delta_eps)
    meta.record("a_const", reg.a_const)
    meta.save(out / "run_meta.json")
    status = "pass" if report.passed else "FAIL"
    print(f"junction-report ({cfg.model.type}, eps={cfg.run.eps:g}) -> {status}")
    return 0 if report.passed else 1


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file")
    p.add_argument("--seed", type=int, help="Monte Carlo seed override")
    p.add_argument("--out", help="output directory")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="config override, repeatable")
    p.add_argument("--no-figures", action="store_true",
                   help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gfk",
        description="Uncertain-volatility experiments: tables, paths, sweeps",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("table1", help="3x3 call table for the proportional model")
    _add_common(p)
    p.set_defaults(fn=cmd_table1)

    p = sub.add_parser("table2", help="3x3 bond table for the log-reverting model")
    _add_common(p)
    p.set_defaults(fn=cmd_table2)

    p = sub.add_parser("trajectories", help="simulate paths and report statistics")
    _add_common(p)
    p.add_argument("--n-paths", type=int, default=0)
    p.set_defaults(fn=cmd_trajectories)

    p = sub.add_parser("eps-sweep", help="value vs cutoff width on one grid")
    _add_common(p)
    p.add_argument("--eps-list", default=DEFAULT_EPS_SWEEP)
    p.set_defaults(fn=cmd_eps_sweep)

    p = sub.add_parser("classical-check", help="degenerate-band drift statistic")
    _add_common(p)
    p.add_argument("--n-paths", type=int, default=0)
    p.set_defaults(fn=cmd_classical_check)

    p = sub.add_parser("gheat-cdf", help="tabulate the increment law")
    _add_common(p)
    p.set_defaults(fn=cmd_gheat_cdf)

    p = sub.add_parser("junction-report", help="cutoff junction verification")
    _add_common(p)
    p.add_argument("--model", choices=["dothan", "expvasicek"], default="dothan")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--stencil", type=float, default=1e-6)
    p.set_defaults(fn=cmd_junction_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
