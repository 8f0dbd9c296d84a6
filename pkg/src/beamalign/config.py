"""Experiment configuration: defaults, presets, YAML loading, hashing.

One :class:`ExperimentConfig` aggregates every knob of a run.  YAML files
override the built-in defaults section by section; unknown keys fail fast so
typos cannot silently fall back to defaults.  Two hashes identify a run:
``config_hash`` covers everything, ``scenario_hash`` covers only the
physical setup (grid, channel, link, arrays) so runs of different agents on
the same scenario can be matched up for comparison.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any

import yaml

from .agents import DqnConfig
from .channel import ChannelScenario, LinkBudget
from .codebook import UlaConfig
from .env import GridConfig
from .errors import ConfigError

OUT_DIR_ENV = "BEAMALIGN_OUT_DIR"

GRID_PRESETS: dict[int, GridConfig] = {
    1: GridConfig(x=(-10.0, 10.0, 20.0), y=(-10.0, 10.0, 20.0), z_levels=(41.5,)),
    8: GridConfig(x=(-20.0, 20.0, 20.0), y=(-20.0, 20.0, 20.0), z_levels=(41.5, 81.5)),
    32: GridConfig(x=(-40.0, 40.0, 20.0), y=(-40.0, 40.0, 20.0), z_levels=(41.5, 81.5)),
    72: GridConfig(x=(-60.0, 60.0, 20.0), y=(-60.0, 60.0, 20.0), z_levels=(41.5, 81.5)),
}


def grid_preset(n_cells: int) -> GridConfig:
    """Square coverage grids of 1, 8, 32 or 72 cells around the BS."""
    try:
        return GRID_PRESETS[int(n_cells)]
    except (KeyError, ValueError):
        raise ConfigError(
            f"no grid preset for size {n_cells!r}; choose from {sorted(GRID_PRESETS)}"
        ) from None


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs, serializable to/from a YAML section tree."""

    scenario_id: str = "ideal-72"
    grid: GridConfig = GRID_PRESETS[72]
    channel: ChannelScenario = ChannelScenario(los_mode="los")
    budget: LinkBudget = LinkBudget()
    tx_array: UlaConfig = UlaConfig(n_antennas=8)
    rx_array: UlaConfig = UlaConfig(n_antennas=8)
    dqn: DqnConfig = DqnConfig()
    gucb_c: float = math.sqrt(2.0)
    seeds: tuple[int, ...] = (0,)
    episodes: int = 2000
    rmax_decay: float = 1.0
    rss_probe_every: int = 0
    reward_ttu_cadence: int = 50

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.episodes <= 0:
            raise ConfigError(f"episodes must be positive, got {self.episodes}")
        if self.reward_ttu_cadence <= 0:
            raise ConfigError(
                f"reward_ttu_cadence must be positive, got {self.reward_ttu_cadence}"
            )
        if self.rss_probe_every < 0:
            raise ConfigError(
                f"rss_probe_every must be >= 0, got {self.rss_probe_every}"
            )


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


# YAML section name -> (config attribute, dataclass type); scalar sections
# are handled separately.
_SECTION_TYPES = {
    "grid": ("grid", GridConfig),
    "channel": ("channel", ChannelScenario),
    "link": ("budget", LinkBudget),
    "dqn": ("dqn", DqnConfig),
}
_RUN_KEYS = ("seeds", "episodes", "rmax_decay", "rss_probe_every", "reward_ttu_cadence")


def _tupled(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value


def _build_section(cls: type, section: dict, name: str) -> Any:
    known = {f.name for f in fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in section {name!r}")
    return cls(**{k: _tupled(v) for k, v in section.items()})


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a config from a section tree, starting from the defaults."""
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")
    cfg = default_config()
    seen = set()

    for section_name, (attr, cls) in _SECTION_TYPES.items():
        if section_name in raw:
            seen.add(section_name)
            section = raw[section_name]
            if not isinstance(section, dict):
                raise ConfigError(f"section {section_name!r} must be a mapping")
            if section_name == "grid" and "preset" in section:
                base = grid_preset(section["preset"])
                rest = {k: v for k, v in section.items() if k != "preset"}
                merged = {**asdict(base), **rest}
                cfg = replace(cfg, grid=_build_section(GridConfig, merged, "grid"))
            else:
                base_dict = asdict(getattr(cfg, attr))
                merged = {**base_dict, **section}
                cfg = replace(cfg, **{attr: _build_section(cls, merged, section_name)})

    if "arrays" in raw:
        seen.add("arrays")
        section = raw["arrays"]
        allowed = {"n_tx", "n_rx", "spacing_over_lambda"}
        unknown = set(section) - allowed
        if unknown:
            raise ConfigError(f"unknown key(s) {sorted(unknown)} in section 'arrays'")
        spacing = section.get("spacing_over_lambda", cfg.tx_array.spacing_over_lambda)
        cfg = replace(
            cfg,
            tx_array=UlaConfig(
                n_antennas=section.get("n_tx", cfg.tx_array.n_antennas),
                spacing_over_lambda=spacing,
            ),
            rx_array=UlaConfig(
                n_antennas=section.get("n_rx", cfg.rx_array.n_antennas),
                spacing_over_lambda=spacing,
            ),
        )

    if "gucb" in raw:
        seen.add("gucb")
        section = raw["gucb"]
        unknown = set(section) - {"c"}
        if unknown:
            raise ConfigError(f"unknown key(s) {sorted(unknown)} in section 'gucb'")
        if "c" in section:
            cfg = replace(cfg, gucb_c=float(section["c"]))

    if "run" in raw:
        seen.add("run")
        section = raw["run"]
        unknown = set(section) - set(_RUN_KEYS)
        if unknown:
            raise ConfigError(f"unknown key(s) {sorted(unknown)} in section 'run'")
        cfg = replace(cfg, **{k: _tupled(v) for k, v in section.items()})

    if "scenario_id" in raw:
        seen.add("scenario_id")
        cfg = replace(cfg, scenario_id=str(raw["scenario_id"]))

    unknown = set(raw) - seen
    if unknown:
        raise ConfigError(f"unknown top-level config key(s): {sorted(unknown)}")
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse a YAML config file over the defaults."""
    text = Path(path).read_text()
    raw = yaml.safe_load(text)
    if raw is None:
        raw = {}
    return config_from_dict(raw)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Full section tree with plain JSON-serializable values."""
    return {
        "scenario_id": cfg.scenario_id,
        "grid": asdict(cfg.grid),
        "channel": asdict(cfg.channel),
        "link": asdict(cfg.budget),
        "arrays": {
            "n_tx": cfg.tx_array.n_antennas,
            "n_rx": cfg.rx_array.n_antennas,
            "spacing_over_lambda": cfg.tx_array.spacing_over_lambda,
        },
        "dqn": asdict(cfg.dqn),
        "gucb": {"c": cfg.gucb_c},
        "run": {
            "seeds": list(cfg.seeds),
            "episodes": cfg.episodes,
            "rmax_decay": cfg.rmax_decay,
            "rss_probe_every": cfg.rss_probe_every,
            "reward_ttu_cadence": cfg.reward_ttu_cadence,
        },
    }


def _canonical_json(tree: Any) -> str:
    def plain(x: Any) -> Any:
        if isinstance(x, (list, tuple)):
            return [plain(v) for v in x]
        if isinstance(x, dict):
            return {k: plain(v) for k, v in x.items()}
        return x

    return json.dumps(plain(tree), sort_keys=True, separators=(",", ":"))


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical serialization; stable under key reordering."""
    return hashlib.sha256(_canonical_json(config_to_dict(cfg)).encode()).hexdigest()


def scenario_hash(cfg: ExperimentConfig) -> str:
    """Hash of the physical setup only; agents sharing it are comparable."""
    tree = config_to_dict(cfg)
    scenario = {
        k: tree[k] for k in ("grid", "channel", "link", "arrays")
    }
    scenario["rmax_decay"] = cfg.rmax_decay
    return hashlib.sha256(_canonical_json(scenario).encode()).hexdigest()
