"""Beam-alignment environment: coverage grid, beam-pair actions, rewards, TTU.

The coverage area is a 3D grid of cell centers; the UE occupies one cell per
episode.  An action is a (TX beam, RX beam) pair from the two codebooks, and
every applied action is one channel measurement costing one transmission
time unit (TTU), the unit in which all sweep overhead is accounted.  The
reward is +1 when the measured rate matches or beats the best rate observed
so far for that cell, else -1, and an episode ends on the first +1 (training
phase) or after one full action-space worth of steps.

Each cell's multipath state is realized once at construction; when fading is
enabled it advances one AR(1) step per episode for every cell.  Rates for
all beam pairs of a cell are evaluated through cached per-cell projection
matrices, which tests cross-check against the reference per-path sum in
:mod:`beamalign.channel`.

Metric probes (``peek_rates``, ``rss_error``) read the same tables without
spending TTUs: they are observer access for diagnostics, not part of the
beam-training protocol.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .channel import (
    ChannelRealization,
    ChannelScenario,
    FadingState,
    LinkBudget,
    initial_fading,
    realize_channel,
    step_fading,
)
from .codebook import make_codebook, steering_vector, UlaConfig
from .errors import ConfigError, EpisodeError


@dataclass(frozen=True)
class GridConfig:
    """Coverage-area discretization: per-axis (min, max, step) plus heights."""

    x: tuple[float, float, float] = (-60.0, 60.0, 20.0)
    y: tuple[float, float, float] = (-60.0, 60.0, 20.0)
    z_levels: tuple[float, ...] = (41.5, 81.5)
    bs_position: tuple[float, float, float] = (0.0, 0.0, 25.0)


def _axis_centers(axis: tuple[float, float, float]) -> np.ndarray:
    lo, hi, step = axis
    if step <= 0:
        raise ConfigError(f"axis step must be positive, got {step}")
    if hi < lo:
        raise ConfigError(f"axis range inverted: ({lo}, {hi})")
    span = hi - lo
    n = int(np.floor(span / step + 1e-9))
    if n == 0:
        # step wider than the range: one cell covering it all
        return np.array([(lo + hi) / 2.0])
    return lo + step / 2.0 + step * np.arange(n)


@dataclass(frozen=True)
class CoverageGrid:
    """Enumerated cell centers, row-major over (z, y, x)."""

    x_centers: np.ndarray
    y_centers: np.ndarray
    z_levels: np.ndarray
    cells: np.ndarray
    bs_position: np.ndarray

    def __len__(self) -> int:
        return len(self.cells)

    def normalized_cells(self) -> np.ndarray:
        """Cell centers scaled per axis to [-1, 1] (0 for a single-value axis)."""
        out = np.zeros_like(self.cells)
        for k in range(3):
            col = self.cells[:, k]
            lo, hi = col.min(), col.max()
            if hi > lo:
                out[:, k] = 2.0 * (col - lo) / (hi - lo) - 1.0
        return out


def build_grid(cfg: GridConfig) -> CoverageGrid:
    """Enumerate cell centers from the per-axis ranges."""
    xs = _axis_centers(cfg.x)
    ys = _axis_centers(cfg.y)
    zs = np.asarray(cfg.z_levels, dtype=float)
    if len(zs) == 0:
        raise ConfigError("z_levels must be nonempty")
    cells = np.array(
        [(x, y, z) for z in zs for y in ys for x in xs], dtype=float
    )
    return CoverageGrid(
        x_centers=xs,
        y_centers=ys,
        z_levels=zs,
        cells=cells,
        bs_position=np.asarray(cfg.bs_position, dtype=float),
    )


@dataclass(frozen=True)
class ActionSpace:
    """All (TX beam, RX beam) pairs, indexed a = tx * n_rx + rx."""

    n_tx: int
    n_rx: int

    def __len__(self) -> int:
        return self.n_tx * self.n_rx

    def tx_rx(self, action: int) -> tuple[int, int]:
        if not 0 <= action < len(self):
            raise ConfigError(f"action {action} outside [0, {len(self)})")
        return action // self.n_rx, action % self.n_rx

    def index(self, tx: int, rx: int) -> int:
        return tx * self.n_rx + rx

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(a // self.n_rx, a % self.n_rx) for a in range(len(self))]


@dataclass(frozen=True)
class EnvState:
    """Agent-visible state: occupied cell plus the most recent action."""

    cell_index: int
    last_action: Optional[int]


@dataclass(frozen=True)
class StepOutcome:
    next_state: EnvState
    reward: int
    rate: float
    rss_dbm: float
    done: bool
    ttu_cost: int


class RateRecord:
    """Per-cell best observed rate and the action that achieved it.

    Under a frozen channel the best rate never decreases.  Under channel
    variation a decay factor < 1 relaxes stale optima so that a +1 reward
    stays reachable after the channel drifts.
    """

    def __init__(self, n_cells: int) -> None:
        self.best_rate = np.full(n_cells, np.nan)
        self.best_action = np.full(n_cells, -1, dtype=int)

    def has(self, cell: int) -> bool:
        return not np.isnan(self.best_rate[cell])

    def rate_of(self, cell: int) -> float:
        return float(self.best_rate[cell])

    def observe(self, cell: int, action: int, rate: float) -> None:
        if not self.has(cell) or rate > self.best_rate[cell]:
            self.best_rate[cell] = rate
            self.best_action[cell] = action

    def decay(self, factor: float) -> None:
        mask = ~np.isnan(self.best_rate)
        self.best_rate[mask] *= factor


class BeamEnv:
    """Single-UE beam-alignment environment over a coverage grid.

    One instance is single-threaded: it owns mutable rate records, fading
    states and the TTU counter.  Run independent instances with independent
    seeds for multi-seed experiments.
    """

    def __init__(
        self,
        grid_cfg: GridConfig,
        scenario: ChannelScenario,
        budget: LinkBudget,
        tx_cfg: UlaConfig,
        rx_cfg: UlaConfig,
        rng: np.random.Generator | int | None = None,
        rmax_decay: float = 1.0,
    ) -> None:
        if not 0.0 < rmax_decay <= 1.0:
            raise ConfigError(f"rmax_decay must be in (0, 1], got {rmax_decay}")
        self.grid = build_grid(grid_cfg)
        self.scenario = scenario
        self.budget = budget
        self.tx_cfg = tx_cfg
        self.rx_cfg = rx_cfg
        self.tx_codebook = make_codebook(tx_cfg)
        self.rx_codebook = make_codebook(rx_cfg)
        self.actions = ActionSpace(n_tx=len(self.tx_codebook), n_rx=len(self.rx_codebook))
        self.rmax_decay = rmax_decay
        self._rng = (
            rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        )

        self.channels: list[ChannelRealization] = [
            realize_channel(cell, self.grid.bs_position, scenario, budget, self._rng)
            for cell in self.grid.cells
        ]
        self.fading: list[Optional[FadingState]] = [
            initial_fading(ch, scenario, self._rng) if scenario.fading else None
            for ch in self.channels
        ]

        # Per-cell beam projections onto path angles; angles are frozen, so
        # these survive fading updates (only the gain vector changes).
        self._proj_rx: list[np.ndarray] = []
        self._proj_tx: list[np.ndarray] = []
        self._gain_cache: dict[int, np.ndarray] = {}
        self.refresh_channels()
        self.rate_record = RateRecord(len(self.grid))
        self.ttu_total = 0
        # (ttu_total, reward) per step call; reset/sweep measurements carry
        # no reward and are absent
        self.reward_log: list[tuple[int, int]] = []
        self._norm_cells = self.grid.normalized_cells()

        self._state: Optional[EnvState] = None
        self._episode_len = 0
        self._episode_done = True

    def refresh_channels(self) -> None:
        """Rebuild beam projections after ``channels`` entries were replaced."""
        self._proj_rx.clear()
        self._proj_tx.clear()
        for ch in self.channels:
            a_r = np.stack([steering_vector(p.aoa, self.rx_cfg) for p in ch.paths])
            a_t = np.stack([steering_vector(p.aod, self.tx_cfg) for p in ch.paths])
            self._proj_rx.append(np.conj(self.rx_codebook.vectors) @ a_r.T)
            self._proj_tx.append(np.conj(a_t) @ self.tx_codebook.vectors.T)
        self._gain_cache.clear()

    # ------------------------------------------------------------------
    # rate evaluation

    def _pair_gains(self, cell: int) -> np.ndarray:
        """Complex beam-pair gains for every action, indexed a = tx*n_rx + rx."""
        cached = self._gain_cache.get(cell)
        if cached is not None:
            return cached
        gains = self.channels[cell].base_gains()
        fad = self.fading[cell]
        if fad is not None:
            gains = gains * fad.coeffs
        g_mat = (self._proj_rx[cell] * gains) @ self._proj_tx[cell]  # (rx, tx)
        table = g_mat.T.ravel()
        self._gain_cache[cell] = table
        return table

    def peek_rates(self, cell: int) -> np.ndarray:
        """Rates for all actions of a cell; diagnostic access, no TTU cost."""
        gains = self._pair_gains(cell)
        snr = (
            self.budget.tx_power_mw
            * np.abs(gains) ** 2
            / self.budget.noise_power_mw
        )
        return np.log2(1.0 + snr)

    def peek_rss_dbm(self, cell: int) -> np.ndarray:
        """RSS in dBm for all actions of a cell; diagnostic access, no TTU."""
        mags = np.abs(self._pair_gains(cell))
        with np.errstate(divide="ignore"):
            return self.budget.tx_power_dbm + 20.0 * np.log10(mags)

    def _measure(self, cell: int, action: int) -> tuple[float, float]:
        """One in-protocol measurement: (rate, rss_dbm), costs one TTU."""
        self.ttu_total += 1
        rate = float(self.peek_rates(cell)[action])
        rss = float(self.peek_rss_dbm(cell)[action])
        return rate, rss

    # ------------------------------------------------------------------
    # episode protocol

    def advance_channel(self) -> None:
        """One fading step for every cell plus best-rate decay; per episode.

        ``reset`` calls this once; episode loops that bypass ``reset`` (the
        exhaustive baseline) call it directly to keep channel time aligned.
        """
        if self.scenario.fading:
            for i, fad in enumerate(self.fading):
                self.fading[i] = step_fading(fad, self._rng)
            self._gain_cache.clear()
        if self.rmax_decay < 1.0:
            self.rate_record.decay(self.rmax_decay)

    def reset(
        self,
        cell_index: Optional[int] = None,
        first_action: Optional[int] = None,
    ) -> EnvState:
        """Start an episode: land in a cell and apply one initial action.

        The initial action defaults to a uniformly random one; its rate seeds
        the cell's best-rate record and it costs one TTU but does not count
        toward episode length.
        """
        self.advance_channel()
        if cell_index is None:
            cell_index = int(self._rng.integers(len(self.grid)))
        elif not 0 <= cell_index < len(self.grid):
            raise ConfigError(f"cell_index {cell_index} outside [0, {len(self.grid)})")
        if first_action is None:
            first_action = int(self._rng.integers(len(self.actions)))
        elif not 0 <= first_action < len(self.actions):
            raise ConfigError(f"action {first_action} outside [0, {len(self.actions)})")

        rate, _ = self._measure(cell_index, first_action)
        self.rate_record.observe(cell_index, first_action, rate)
        self._state = EnvState(cell_index=cell_index, last_action=first_action)
        self._episode_len = 0
        self._episode_done = False
        return self._state

    def step(self, action: int, end_on_success: bool = True) -> StepOutcome:
        """Apply a beam pair, collect the +1/-1 reward, advance the episode.

        ``end_on_success=False`` (warmup) keeps the episode running after a
        +1 so a full sweep of the action space can be driven through.
        """
        if self._state is None or self._episode_done:
            raise EpisodeError("step() called without an active episode; call reset()")
        if not 0 <= action < len(self.actions):
            raise ConfigError(f"action {action} outside [0, {len(self.actions)})")

        cell = self._state.cell_index
        rate, rss = self._measure(cell, action)
        reward = 1 if rate >= self.rate_record.rate_of(cell) else -1
        self.rate_record.observe(cell, action, rate)
        self.reward_log.append((self.ttu_total, reward))

        self._episode_len += 1
        done = (reward == 1 and end_on_success) or self._episode_len >= len(self.actions)
        self._episode_done = done
        self._state = EnvState(cell_index=cell, last_action=action)
        return StepOutcome(
            next_state=self._state,
            reward=reward,
            rate=rate,
            rss_dbm=rss,
            done=done,
            ttu_cost=1,
        )

    @property
    def episode_len(self) -> int:
        return self._episode_len

    # ------------------------------------------------------------------
    # baselines and metrics

    def exhaustive_sweep(self, cell_index: int) -> tuple[int, float, int]:
        """Measure every beam pair of a cell; cost is the full action count.

        Returns (best action, best rate, ttu cost); ties go to the lowest
        action index.
        """
        if not 0 <= cell_index < len(self.grid):
            raise ConfigError(f"cell_index {cell_index} outside [0, {len(self.grid)})")
        rates = self.peek_rates(cell_index)
        self.ttu_total += len(self.actions)
        best = int(np.argmax(rates))
        best_rate = float(rates[best])
        self.rate_record.observe(cell_index, best, best_rate)
        return best, best_rate, len(self.actions)

    def rss_error(self, policy: Callable[[int], int]) -> float:
        """Mean dB gap between the best and the policy's RSS over all cells.

        Diagnostic probe against the current channel state; spends no TTUs.
        """
        gaps = []
        for cell in range(len(self.grid)):
            rss = self.peek_rss_dbm(cell)
            gaps.append(float(rss.max() - rss[policy(cell)]))
        return float(np.mean(gaps))

    # ------------------------------------------------------------------
    # state encoding for function approximation

    @property
    def state_dim(self) -> int:
        return 3 + len(self.actions)

    def encode(self, state: EnvState) -> np.ndarray:
        """Normalized cell position plus one-hot of the last action.

        A missing last action encodes as the all-zero one-hot block.
        """
        out = np.zeros(self.state_dim)
        out[:3] = self._norm_cells[state.cell_index]
        if state.last_action is not None:
            out[3 + state.last_action] = 1.0
        return out

    def encode_all_contexts(self, cell: int) -> np.ndarray:
        """Encodings of one cell under every possible last action (rows)."""
        n = len(self.actions)
        out = np.zeros((n, self.state_dim))
        out[:, :3] = self._norm_cells[cell]
        out[:, 3:] = np.eye(n)
        return out
