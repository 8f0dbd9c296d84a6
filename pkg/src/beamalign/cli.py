"""Command-line front end: run experiments, compare runs, sweep a knob.

Subcommands:

    run      execute one agent kind over the config's seeds
    compare  summarize manifests from runs of one scenario
    sweep    re-run a config with one parameter varied over several values

The output directory defaults to ``$BEAMALIGN_OUT_DIR`` or ``./runs``.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from .config import (
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    default_config,
    grid_preset,
    load_config,
)
from .errors import BeamAlignError
from .harness import (
    AGENT_KINDS,
    compare_runs,
    comparison_table,
    default_out_dir,
    load_manifest,
    run_experiment,
    write_comparison_csv,
)


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="YAML config file (defaults apply without one)")
    parser.add_argument("--agent", choices=AGENT_KINDS, default="dqn")
    parser.add_argument(
        "--seed", type=int, nargs="+", help="override the config's seed list"
    )
    parser.add_argument("--out-dir", type=Path, help="artifact root (default: $BEAMALIGN_OUT_DIR or ./runs)")
    parser.add_argument("--episodes", type=int, help="override the episode budget")
    parser.add_argument(
        "--grid-size", type=int, choices=(1, 8, 32, 72), help="override the grid with a preset"
    )
    parser.add_argument("--jobs", type=int, help="max parallel seed processes")


def _load(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if args.grid_size is not None:
        cfg = replace(cfg, grid=grid_preset(args.grid_size))
    return cfg


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load(args)
    manifests = run_experiment(
        cfg,
        agent_kind=args.agent,
        out_dir=args.out_dir,
        seeds=args.seed,
        episodes=args.episodes,
        n_jobs=args.jobs,
    )
    for path in manifests:
        m = load_manifest(path)
        conv = m.final_metrics.get("ttu_to_convergence")
        print(
            f"seed {m.seed}: {m.total_ttu} TTU, "
            f"convergence at {conv if conv is not None else 'n/a'} TTU -> {path}"
        )
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    rows = compare_runs(args.manifests)
    print(comparison_table(rows))
    if args.out:
        write_comparison_csv(rows, args.out)
        print(f"wrote {args.out}")
    return 0


def _set_nested(tree: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = tree
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            raise BeamAlignError(f"no config section {k!r} along {dotted!r}")
        node = node[k]
    if keys[-1] not in node:
        raise BeamAlignError(f"no config key {dotted!r}")
    node[keys[-1]] = value


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out_root = Path(args.out_dir) if args.out_dir else default_out_dir()
    for raw in args.values:
        value = yaml.safe_load(raw)
        if args.param == "grid":
            point = replace(cfg, grid=grid_preset(value))
        else:
            tree = config_to_dict(cfg)
            _set_nested(tree, args.param, value)
            point = config_from_dict(tree)
        label = str(value).replace(".", "p")
        point = replace(
            point, scenario_id=f"{cfg.scenario_id}_{args.param.replace('.', '-')}-{label}"
        )
        manifests = run_experiment(
            point,
            agent_kind=args.agent,
            out_dir=out_root,
            seeds=args.seed,
            episodes=args.episodes,
            n_jobs=args.jobs,
        )
        print(f"{args.param}={value}: {len(manifests)} run(s) under {out_root}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beamalign",
        description="Beam-alignment training simulator: DQN, UCB1 and exhaustive sweep.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one agent over the config's seeds")
    _add_run_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="summarize manifests of one scenario")
    p_cmp.add_argument("--manifests", type=Path, nargs="+", required=True)
    p_cmp.add_argument("--out", type=Path, help="also write the summary as CSV")
    p_cmp.set_defaults(func=_cmd_compare)

    p_sweep = sub.add_parser("sweep", help="vary one parameter over several values")
    _add_run_flags(p_sweep)
    p_sweep.add_argument(
        "--param",
        required=True,
        help="'grid' for presets, or a dotted config path like dqn.eps_tau",
    )
    p_sweep.add_argument("--values", nargs="+", required=True)
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BeamAlignError, OSError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
