"""Command-line surface.

Subcommands::

    jchsim run --config scenario.ini --out results/
    jchsim run --preset fig2 --out results/
    jchsim critical --config sweep.ini --out results/
    jchsim validate --suite mapping

``run`` executes either a scenario config file or a named preset (presets
bundle one or more scenarios, or a criticality sweep for ``fig4``).
``critical`` runs a sweep config.  ``validate`` runs one of the on-demand
check suites and exits non-zero on failure.  ``--seed``, ``--traj`` and
``--threads`` override the corresponding config fields.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from typing import Optional, Sequence

from .checks import SUITE_NAMES, run_suite
from .config import load_scenario_config, load_sweep_config
from .critical import gamma_c_curve
from .errors import JchsimError
from .presets import PRESET_NAMES, load_preset
from .runner import run_scenario, write_criticality_outputs

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jchsim",
        description="Dissipative cavity-array simulator: trajectory ensembles, "
                    "entanglement-peak classification, critical-damping sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario config or a named preset")
    src = run_p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="scenario config file (INI or JSON)")
    src.add_argument("--preset", choices=PRESET_NAMES,
                     help="named preset bundle")
    run_p.add_argument("--out", required=True, help="output directory")
    _add_overrides(run_p)

    crit_p = sub.add_parser("critical",
                            help="run a critical-damping sweep config")
    crit_p.add_argument("--config", required=True,
                        help="sweep config file (INI or JSON)")
    crit_p.add_argument("--out", required=True, help="output directory")
    _add_overrides(crit_p)

    val_p = sub.add_parser("validate", help="run an on-demand check suite")
    val_p.add_argument("--suite", required=True, choices=SUITE_NAMES)
    val_p.add_argument("--json", action="store_true",
                       help="print the machine-readable report as JSON")
    _add_overrides(val_p)
    return parser


def _add_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="override the master seed")
    parser.add_argument("--traj", type=int, default=None,
                        help="override the trajectory count")
    parser.add_argument("--threads", type=int, default=None,
                        help="override the worker-thread count")


def _apply_overrides(config, args):
    updates = {}
    if args.seed is not None:
        updates["master_seed"] = args.seed
    if args.traj is not None:
        updates["n_traj"] = args.traj
    if args.threads is not None:
        updates["n_threads"] = args.threads
    return replace(config, **updates) if updates else config


def _run_sweep(config, out_dir) -> None:
    result = gamma_c_curve(config)
    paths = write_criticality_outputs(result, out_dir)
    slope = "n/a" if result.slope is None else f"{result.slope:.4f}"
    print(f"sweep '{config.output_name}': slope through origin = {slope}")
    for est in result.estimates:
        gc = "not bracketed" if est.gamma_c is None else repr(est.gamma_c)
        flags = f" [{';'.join(est.flags)}]" if est.flags else ""
        print(f"  hop {est.hop!r}: gamma_c = {gc}{flags}")
    for key in ("rows", "estimates", "sidecar"):
        print(f"wrote {paths[key]}")


def _cmd_run(args) -> int:
    if args.config is not None:
        config = _apply_overrides(load_scenario_config(args.config), args)
        result = run_scenario(config, args.out)
        print(f"scenario '{config.output_name}': {config.n_traj} trajectories, "
              f"{config.grid.n_samples} samples")
        print(f"wrote {result.table_path}")
        print(f"wrote {result.sidecar_path}")
        return 0
    bundle = load_preset(args.preset).with_overrides(
        n_traj=args.traj, master_seed=args.seed, n_threads=args.threads)
    if bundle.kind == "sweep":
        _run_sweep(bundle.sweep, args.out)
        return 0
    for config in bundle.scenarios:
        result = run_scenario(config, args.out)
        print(f"scenario '{config.output_name}': {config.n_traj} trajectories, "
              f"{config.grid.n_samples} samples")
        print(f"wrote {result.table_path}")
        print(f"wrote {result.sidecar_path}")
    return 0


def _cmd_critical(args) -> int:
    config = _apply_overrides(load_sweep_config(args.config), args)
    _run_sweep(config, args.out)
    return 0


def _cmd_validate(args) -> int:
    kwargs = {}
    if args.traj is not None:
        kwargs["n_traj"] = args.traj
    if args.seed is not None:
        kwargs["master_seed"] = args.seed
    if args.threads is not None:
        kwargs["n_threads"] = args.threads
    report = run_suite(args.suite, **kwargs)
    if args.json:
        print(json.dumps(report.to_mapping(), sort_keys=True, indent=2))
    else:
        print("\n".join(report.summary_lines()))
    return 0 if report.passed else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "critical":
            return _cmd_critical(args)
        return _cmd_validate(args)
    except JchsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
