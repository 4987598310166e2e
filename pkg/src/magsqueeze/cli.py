"""Command-line interface.

Subcommands: derive-params, simulate, sweep, wigner, validate.
Exit codes: 0 success, 1 runtime/numerical failure, 2 configuration error.
The default output directory is, in order of precedence: --output-dir, the
MAGSQUEEZE_OUTPUT_DIR environment variable, the config's output_dir field.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .config import ConfigError, RunConfig, load_config
from .experiments import ScenarioError, run_scenario
from .lindblad import IntegrationError
from .params import check_regime, derive
from .validate import run_validation

ENV_OUTPUT_DIR = "MAGSQUEEZE_OUTPUT_DIR"


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("config", help="path to the JSON configuration file")
    sub.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="PATH=VALUE",
        help="override a config entry by dotted path (repeatable), e.g. --set system.kappa=0.2",
    )
    sub.add_argument(
        "--output-dir",
        default=None,
        help=f"output directory (default: ${ENV_OUTPUT_DIR} or the config's output_dir)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magsqueeze",
        description="Simulate critical-point magnon squeezing in a cavity-magnon-qubit system.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p_derive = subs.add_parser(
        "derive-params", help="print all derived model parameters and regime warnings"
    )
    _add_common(p_derive)
    p_derive.add_argument("--json", action="store_true", help="machine-readable output")

    p_sim = subs.add_parser("simulate", help="evolve one model branch and write its trajectory CSV")
    _add_common(p_sim)
    p_sim.add_argument(
        "--model",
        choices=("full", "rabi", "effective", "quadratic"),
        default=None,
        help="model branch (default: scenario.model from the config)",
    )

    p_sweep = subs.add_parser("sweep", help="run the configured scenario (sweeps, grids, phases)")
    _add_common(p_sweep)
    p_sweep.add_argument("--jobs", type=int, default=1, help="worker pool size (default 1)")

    p_wig = subs.add_parser(
        "wigner", help="compute the Wigner function at the configured model's optimal time"
    )
    _add_common(p_wig)
    p_wig.add_argument(
        "--model",
        choices=("full", "rabi", "effective", "quadratic"),
        default=None,
        help="model branch (default: scenario.model from the config)",
    )

    subs.add_parser("validate", help="run the built-in oracle and invariant suite")
    return parser


def _resolve_output(args, cfg: RunConfig) -> str:
    return args.output_dir or os.environ.get(ENV_OUTPUT_DIR) or cfg.output_dir


def _cmd_derive(args) -> int:
    cfg = load_config(args.config, args.overrides)
    d = derive(cfg.system)
    warnings = check_regime(d, cfg.system)
    if args.json:
        print(json.dumps({"derived": dataclasses.asdict(d), "regime_warnings": warnings}, indent=2))
        return 0
    rows = [
        ("Delta_q / 2pi", d.Delta_q, "MHz"),
        ("Delta_m / 2pi", d.Delta_m, "MHz"),
        ("nu_q", d.nu_q, "MHz"),
        ("nu_m", d.nu_m, "MHz"),
        ("G / 2pi", d.G, "MHz"),
        ("g / 2pi", d.g, "MHz"),
        ("delta_m / 2pi", d.delta_m, "MHz"),
        ("delta_q / 2pi", d.delta_q, "MHz"),
        ("Delta_12 / 2pi", d.Delta_12, "MHz"),
        ("g_c", d.g_c, ""),
        ("zeta", d.zeta, ""),
        ("nbar_m", d.nbar_m, ""),
        ("nbar_q", d.nbar_q, ""),
    ]
    width = max(len(r[0]) for r in rows)
    for name, value, unit in rows:
        print(f"{name:<{width}}  {value:.10g} {unit}".rstrip())
    for w in warnings:
        print(f"warning: {w}")
    return 0


def _cmd_simulate(args) -> int:
    overrides = list(args.overrides)
    overrides.append("scenario.kind=single")
    if args.model:
        overrides.append(f"scenario.model={args.model}")
    cfg = load_config(args.config, overrides)
    run_scenario(cfg, jobs=1, output_dir=_resolve_output(args, cfg))
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.overrides)
    if cfg.scenario.kind == "single":
        raise ConfigError("sweep needs a sweep scenario; set scenario.kind")
    run_scenario(cfg, jobs=max(1, args.jobs), output_dir=_resolve_output(args, cfg))
    return 0


def _cmd_wigner(args) -> int:
    overrides = list(args.overrides)
    overrides.append("scenario.kind=rate_grid")
    if args.model:
        overrides.append(f"scenario.model={args.model}")
    cfg = load_config(args.config, overrides)
    # single-cell grid at the configured operating point
    cfg.scenario.kappa_values_mhz = [cfg.system.kappa]
    cfg.scenario.gamma_values_mhz = [cfg.system.gamma]
    run_scenario(cfg, jobs=1, output_dir=_resolve_output(args, cfg))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "derive-params":
            return _cmd_derive(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "wigner":
            return _cmd_wigner(args)
        if args.command == "validate":
            return 0 if run_validation() else 1
        parser.error(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (IntegrationError, ScenarioError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
