"""Link-level simulator of learned mmWave beam alignment.

A UAV-to-BS uplink with analog beamforming on both ends: discrete beam
codebooks over uniform linear arrays, a geometric multipath channel with
3GPP urban-macro pathloss and optional Rician fading, and a grid-world
environment where selecting a (TX, RX) beam pair costs one transmission
time unit.  Beam training runs as deep Q-learning, per-cell UCB1, or an
exhaustive sweep, with a seeded harness that writes reproducible metric
artifacts for overhead comparisons.
"""

__version__ = "0.1.0"

from .agents import (
    DqnAgent,
    DqnConfig,
    EpisodeRecord,
    GucbAgent,
    ReplayBuffer,
    Transition,
    run_exhaustive,
    run_gucb,
    run_training,
    run_warmup,
)
from .channel import (
    ChannelRealization,
    ChannelScenario,
    FadingState,
    LinkBudget,
    PathComponent,
    initial_fading,
    measure_beam_pair,
    narrowband_gain,
    pathloss_uma,
    realize_channel,
    rss_dbm,
    snr_and_rate,
    step_fading,
)
from .codebook import (
    BeamCodebook,
    UlaConfig,
    beamforming_gain,
    make_codebook,
    steering_vector,
)
from .config import (
    ExperimentConfig,
    config_from_dict,
    config_hash,
    config_to_dict,
    default_config,
    grid_preset,
    load_config,
    scenario_hash,
)
from .env import (
    ActionSpace,
    BeamEnv,
    CoverageGrid,
    EnvState,
    GridConfig,
    RateRecord,
    StepOutcome,
    build_grid,
)
from .errors import BeamAlignError, ConfigError, DimensionError, EpisodeError
from .harness import (
    RunManifest,
    channel_variation_scenario,
    compare_runs,
    comparison_table,
    load_manifest,
    run_experiment,
    run_single_seed,
    ttu_to_convergence,
    write_comparison_csv,
)

__all__ = [
    "__version__",
    "ActionSpace",
    "BeamAlignError",
    "BeamCodebook",
    "BeamEnv",
    "ChannelRealization",
    "ChannelScenario",
    "ConfigError",
    "CoverageGrid",
    "DimensionError",
    "DqnAgent",
    "DqnConfig",
    "EnvState",
    "EpisodeError",
    "EpisodeRecord",
    "ExperimentConfig",
    "FadingState",
    "GridConfig",
    "GucbAgent",
    "LinkBudget",
    "PathComponent",
    "RateRecord",
    "ReplayBuffer",
    "RunManifest",
    "StepOutcome",
    "Transition",
    "UlaConfig",
    "beamforming_gain",
    "build_grid",
    "channel_variation_scenario",
    "compare_runs",
    "comparison_table",
    "config_from_dict",
    "config_hash",
    "config_to_dict",
    "default_config",
    "grid_preset",
    "initial_fading",
    "load_config",
    "load_manifest",
    "make_codebook",
    "measure_beam_pair",
    "narrowband_gain",
    "pathloss_uma",
    "realize_channel",
    "rss_dbm",
    "run_exhaustive",
    "run_experiment",
    "run_gucb",
    "run_single_seed",
    "run_training",
    "run_warmup",
    "scenario_hash",
    "snr_and_rate",
    "steering_vector",
    "step_fading",
    "ttu_to_convergence",
    "write_comparison_csv",
]
