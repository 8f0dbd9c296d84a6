"""Experiment orchestration: seeded runs, metric artifacts, comparisons.

One run = (config, agent kind, seed).  Each run owns its environment, agent
and generators, writes one CSV per metric series plus a JSON manifest into
its own directory, and is byte-for-byte reproducible from (config, seed):
CSVs carry no timestamps and floats are serialized with ``repr``.  Seeds
execute as independent processes when more than one worker is requested.

Series emitted per run: full episode log, accumulated reward vs TTU
(sampled every ``reward_ttu_cadence`` TTUs), episode length vs episode,
loss vs optimizer step, and RSS error vs episode at the probe cadence.

Convergence here means: 50 consecutive episodes all terminating with
reward +1 at episode length <= 2; the reported TTU is the counter value at
the start of the first such streak (warmup included).
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .agents import (
    DqnAgent,
    EpisodeRecord,
    GucbAgent,
    run_exhaustive,
    run_gucb,
    run_training,
    run_warmup,
)
from .config import OUT_DIR_ENV, ExperimentConfig, config_hash, scenario_hash
from .env import BeamEnv
from .errors import ConfigError

try:
    _SOFTWARE_VERSION = version("beamalign")
except PackageNotFoundError:
    _SOFTWARE_VERSION = "0+unknown"

AGENT_KINDS = ("dqn", "gucb", "exhaustive")
CONVERGENCE_STREAK = 50
CONVERGENCE_MAX_LEN = 2
TRAILING_RSS_WINDOW = 100
ORACLE_RATE_TOL = 1e-9

_EPISODE_COLUMNS = (
    "episode",
    "cell",
    "length",
    "terminal_reward",
    "episode_reward",
    "cum_reward",
    "epsilon",
    "mean_loss",
    "train_steps",
    "ttu_total",
    "rss_error",
)


# ----------------------------------------------------------------------
# metrics over episode records


def ttu_to_convergence(
    records: Sequence[EpisodeRecord],
    streak: int = CONVERGENCE_STREAK,
    max_len: int = CONVERGENCE_MAX_LEN,
) -> tuple[Optional[int], Optional[int]]:
    """(TTU, episode index) at the start of the first qualifying streak.

    Returns (None, None) when no streak of ``streak`` episodes with +1
    terminal reward and length <= ``max_len`` exists.  The TTU is taken
    just before the streak's first episode spends its reset measurement.
    """
    run = 0
    for i, rec in enumerate(records):
        if rec.terminal_reward == 1 and rec.length <= max_len:
            run += 1
        else:
            run = 0
        if run == streak:
            first = records[i - streak + 1]
            return first.ttu_total - first.length - 1, i - streak + 1
    return None, None


def mean_length_tail(records: Sequence[EpisodeRecord], fraction: float = 0.1) -> float:
    """Mean episode length over the trailing fraction of episodes."""
    n = max(1, int(len(records) * fraction))
    return float(np.mean([r.length for r in records[-n:]]))


def trailing_rss_mean(
    records: Sequence[EpisodeRecord], window: int = TRAILING_RSS_WINDOW
) -> Optional[float]:
    """Mean of the probed RSS errors over the trailing episode window."""
    vals = [r.rss_error for r in records[-window:] if not math.isnan(r.rss_error)]
    return float(np.mean(vals)) if vals else None


def reward_vs_ttu_series(
    reward_log: Sequence[tuple[int, int]], cadence: int
) -> list[tuple[int, int]]:
    """Accumulated reward sampled at TTU multiples of ``cadence``.

    The final point is appended when the log does not end on a multiple.
    """
    if not reward_log:
        return []
    ttus = np.array([t for t, _ in reward_log])
    cums = np.cumsum([r for _, r in reward_log])
    last = int(ttus[-1])
    points = []
    for p in range(cadence, last + 1, cadence):
        idx = int(np.searchsorted(ttus, p, side="right")) - 1
        points.append((p, int(cums[idx]) if idx >= 0 else 0))
    if last % cadence != 0:
        points.append((last, int(cums[-1])))
    return points


def oracle_match_fraction(env: BeamEnv, policy, tol: float = ORACLE_RATE_TOL) -> float:
    """Fraction of cells where the policy's rate ties the sweep optimum."""
    ok = 0
    for cell in range(len(env.grid)):
        rates = env.peek_rates(cell)
        if rates.max() - rates[policy(cell)] <= tol:
            ok += 1
    return ok / len(env.grid)


# ----------------------------------------------------------------------
# artifact writing


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


@dataclass(frozen=True)
class RunManifest:
    """Provenance and summary of one (config, agent, seed) run."""

    scenario_id: str
    agent: str
    seed: int
    config_hash: str
    scenario_hash: str
    software_version: str
    started_at: str
    finished_at: str
    n_cells: int
    n_actions: int
    episodes: int
    warmup_ttu: int
    total_ttu: int
    files: dict
    final_metrics: dict

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "agent": self.agent,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "scenario_hash": self.scenario_hash,
            "software_version": self.software_version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "n_cells": self.n_cells,
            "n_actions": self.n_actions,
            "episodes": self.episodes,
            "warmup_ttu": self.warmup_ttu,
            "total_ttu": self.total_ttu,
            "files": dict(self.files),
            "final_metrics": dict(self.final_metrics),
        }


def load_manifest(path: str | Path) -> RunManifest:
    raw = json.loads(Path(path).read_text())
    try:
        return RunManifest(**raw)
    except TypeError as exc:
        raise ConfigError(f"{path}: not a run manifest ({exc})") from None


def _utc_now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


# ----------------------------------------------------------------------
# single-seed execution


def run_single_seed(
    cfg: ExperimentConfig, agent_kind: str, seed: int, run_dir: str | Path
) -> Path:
    """Execute one seeded run and write its artifacts; returns the manifest path."""
    if agent_kind not in AGENT_KINDS:
        raise ConfigError(f"unknown agent {agent_kind!r}; choose from {AGENT_KINDS}")
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    started = _utc_now()

    master = np.random.default_rng(seed)
    env_rng, agent_rng, aux_rng = master.spawn(3)
    env = BeamEnv(
        cfg.grid,
        cfg.channel,
        cfg.budget,
        cfg.tx_array,
        cfg.rx_array,
        rng=env_rng,
        rmax_decay=cfg.rmax_decay,
    )

    warmup_ttu = 0
    if agent_kind == "dqn":
        agent = DqnAgent(env.state_dim, len(env.actions), cfg.dqn, rng=agent_rng)
        warmup_ttu = run_warmup(env, agent, aux_rng)
        probe_final = TRAILING_RSS_WINDOW if cfg.rss_probe_every > 0 else 0
        records = run_training(
            env,
            agent,
            cfg.episodes,
            rss_probe_every=cfg.rss_probe_every,
            rss_probe_final=probe_final,
        )
        policy = lambda cell: agent.greedy_action_marginal(env.encode_all_contexts(cell))
        agent.save_policy(run_dir / "policy.bin")
        reward_log = list(env.reward_log)
    elif agent_kind == "gucb":
        agent = GucbAgent(len(env.grid), len(env.actions), c=cfg.gucb_c)
        records = run_gucb(env, agent, cfg.episodes)
        policy = agent.best_action
        reward_log = list(env.reward_log)
    else:
        records = run_exhaustive(env, cfg.episodes, aux_rng)
        policy = lambda cell: int(np.argmax(env.peek_rates(cell)))
        reward_log = [(r.ttu_total, 1) for r in records]

    conv_ttu, conv_episode = ttu_to_convergence(records)
    metrics = {
        "total_ttu": env.ttu_total,
        "warmup_ttu": warmup_ttu,
        "ttu_to_convergence": conv_ttu,
        "episodes_to_convergence": conv_episode,
        "iterations_per_cell": (
            conv_episode / len(env.grid) if conv_episode is not None else None
        ),
        "mean_episode_length_last10pct": mean_length_tail(records),
        "final_cum_reward": records[-1].cum_reward if records else 0,
        "final_rss_error_db": env.rss_error(policy),
        "trailing_rss_error_db": trailing_rss_mean(records),
        "oracle_match_fraction": oracle_match_fraction(env, policy),
    }

    files = {
        "episodes": "episodes.csv",
        "reward_vs_ttu": "reward_vs_ttu.csv",
        "episode_length": "episode_length.csv",
        "loss": "loss.csv",
        "rss_error": "rss_error.csv",
    }
    _write_csv(
        run_dir / files["episodes"],
        _EPISODE_COLUMNS,
        ([getattr(r, c) for c in _EPISODE_COLUMNS] for r in records),
    )
    _write_csv(
        run_dir / files["reward_vs_ttu"],
        ("ttu", "cum_reward"),
        reward_vs_ttu_series(reward_log, cfg.reward_ttu_cadence),
    )
    _write_csv(
        run_dir / files["episode_length"],
        ("episode", "length"),
        ((r.episode, r.length) for r in records),
    )
    _write_csv(
        run_dir / files["loss"],
        ("train_step", "mean_loss"),
        (
            (r.train_steps, r.mean_loss)
            for r in records
            if not math.isnan(r.mean_loss)
        ),
    )
    _write_csv(
        run_dir / files["rss_error"],
        ("episode", "rss_error_db"),
        (
            (r.episode, r.rss_error)
            for r in records
            if not math.isnan(r.rss_error)
        ),
    )

    manifest = RunManifest(
        scenario_id=cfg.scenario_id,
        agent=agent_kind,
        seed=seed,
        config_hash=config_hash(cfg),
        scenario_hash=scenario_hash(cfg),
        software_version=_SOFTWARE_VERSION,
        started_at=started,
        finished_at=_utc_now(),
        n_cells=len(env.grid),
        n_actions=len(env.actions),
        episodes=cfg.episodes,
        warmup_ttu=warmup_ttu,
        total_ttu=env.ttu_total,
        files=files,
        final_metrics=metrics,
    )
    manifest_path = run_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
    return manifest_path


# ----------------------------------------------------------------------
# multi-seed orchestration


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, "runs"))


def run_experiment(
    cfg: ExperimentConfig,
    agent_kind: str = "dqn",
    out_dir: str | Path | None = None,
    seeds: Optional[Sequence[int]] = None,
    episodes: Optional[int] = None,
    n_jobs: Optional[int] = None,
) -> list[Path]:
    """Run every seed of a config and return the manifest paths in seed order.

    Seeds run in parallel worker processes when ``n_jobs`` permits; each run
    writes to ``<out_dir>/<scenario_id>_<agent>_s<seed>/`` with no shared
    state between seeds.
    """
    if seeds is not None:
        cfg = replace(cfg, seeds=tuple(int(s) for s in seeds))
    if episodes is not None:
        cfg = replace(cfg, episodes=int(episodes))
    out = Path(out_dir) if out_dir is not None else default_out_dir()

    dirs = [out / f"{cfg.scenario_id}_{agent_kind}_s{seed}" for seed in cfg.seeds]
    if n_jobs is None:
        n_jobs = min(len(cfg.seeds), os.cpu_count() or 1)
    if n_jobs <= 1 or len(cfg.seeds) == 1:
        return [
            run_single_seed(cfg, agent_kind, seed, d)
            for seed, d in zip(cfg.seeds, dirs)
        ]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        futures = [
            pool.submit(run_single_seed, cfg, agent_kind, seed, d)
            for seed, d in zip(cfg.seeds, dirs)
        ]
        return [f.result() for f in futures]


def channel_variation_scenario(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    seeds: Optional[Sequence[int]] = None,
    n_jobs: Optional[int] = None,
) -> list[Path]:
    """DQN training under per-episode channel variation, with RSS probes.

    Requires fading plus a LoS/nLoS mix; RSS probing is switched on (every
    10 episodes) when the config leaves it off, since the RSS-error series
    is this scenario's product.
    """
    if not cfg.channel.fading:
        raise ConfigError("channel variation scenario requires channel.fading: true")
    if cfg.channel.los_mode != "mixed":
        raise ConfigError("channel variation scenario requires channel.los_mode: mixed")
    if cfg.rss_probe_every == 0:
        cfg = replace(cfg, rss_probe_every=10)
    return run_experiment(cfg, "dqn", out_dir=out_dir, seeds=seeds, n_jobs=n_jobs)


# ----------------------------------------------------------------------
# cross-run comparison


_SUMMARY_METRICS = (
    ("ttu_to_convergence", "median_ttu_to_convergence"),
    ("episodes_to_convergence", "median_episodes_to_convergence"),
    ("iterations_per_cell", "median_iterations_per_cell"),
    ("mean_episode_length_last10pct", "median_episode_length_last10pct"),
    ("final_rss_error_db", "median_final_rss_error_db"),
)

COMPARISON_COLUMNS = (
    "agent",
    "runs",
    "converged_runs",
) + tuple(out_name for _, out_name in _SUMMARY_METRICS)


def compare_runs(manifest_paths: Sequence[str | Path]) -> list[dict]:
    """Per-agent summary rows over manifests sharing one scenario.

    Medians are taken over the seeds where the metric is defined; a metric
    undefined for every seed reports None.  Manifests from different
    scenarios are refused.
    """
    if len(manifest_paths) < 2:
        raise ConfigError("compare needs at least two manifests")
    manifests = [load_manifest(p) for p in manifest_paths]
    hashes = {m.scenario_hash for m in manifests}
    if len(hashes) != 1:
        ids = sorted({f"{m.scenario_id}({m.scenario_hash[:8]})" for m in manifests})
        raise ConfigError(f"manifests span different scenarios: {ids}")

    rows = []
    for agent in sorted({m.agent for m in manifests}):
        group = [m for m in manifests if m.agent == agent]
        row: dict = {
            "agent": agent,
            "runs": len(group),
            "converged_runs": sum(
                1
                for m in group
                if m.final_metrics.get("ttu_to_convergence") is not None
            ),
        }
        for key, out_name in _SUMMARY_METRICS:
            vals = [
                m.final_metrics.get(key)
                for m in group
                if m.final_metrics.get(key) is not None
            ]
            row[out_name] = float(np.median(vals)) if vals else None
        rows.append(row)
    return rows


def comparison_table(rows: Sequence[dict]) -> str:
    """Fixed-width text rendering of comparison rows."""
    headers = list(COMPARISON_COLUMNS)
    cells = [
        [
            "n/a" if row.get(h) is None else _fmt(row.get(h))
            for h in headers
        ]
        for row in rows
    ]
    widths = [
        max(len(h), *(len(c[i]) for c in cells)) if cells else len(h)
        for i, h in enumerate(headers)
    ]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for c in cells:
        lines.append("  ".join(v.ljust(w) for v, w in zip(c, widths)))
    return "\n".join(lines)


def write_comparison_csv(rows: Sequence[dict], path: str | Path) -> None:
    _write_csv(
        Path(path),
        COMPARISON_COLUMNS,
        ([row.get(h) for h in COMPARISON_COLUMNS] for row in rows),
    )
