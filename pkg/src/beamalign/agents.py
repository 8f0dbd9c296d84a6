"""Beam-selection policies: DQN, per-cell UCB1, and the exhaustive baseline.

The DQN agent learns a shared Q-function over (cell position, last action)
encodings with experience replay and a periodically synced target network.
Training is preceded by a warmup pass that sweeps every action once per cell
so the environment's best-rate records are grounded before rewards start
steering the policy.

The bandit baseline keeps an independent UCB1 arm table per cell and feeds
it the same +1/-1 rewards the DQN sees, so both spend TTUs under identical
accounting.  The exhaustive baseline simply measures all pairs per episode.

All runners emit per-episode records with cumulative TTU so overhead
comparisons read straight off the logs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import mlp
from .env import BeamEnv
from .errors import ConfigError


@dataclass(frozen=True)
class Transition:
    """One stored interaction for replay."""

    state_enc: np.ndarray
    action: int
    reward: int
    next_state_enc: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform minibatch sampling."""

    def __init__(self, capacity: int) -> None:
        if capacity <= 0:
            raise ConfigError(f"buffer capacity must be positive, got {capacity}")
        self.capacity = capacity
        self._slots: list[Transition] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._slots)

    def push(self, transition: Transition) -> None:
        if len(self._slots) < self.capacity:
            self._slots.append(transition)
        else:
            self._slots[self._next] = transition
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        if len(self._slots) == 0:
            raise ConfigError("cannot sample from an empty buffer")
        idx = rng.integers(0, len(self._slots), size=batch_size)
        return [self._slots[i] for i in idx]


@dataclass(frozen=True)
class DqnConfig:
    """Q-learning hyperparameters.

    The exploration rate follows eps_end + (eps_start - eps_end) *
    exp(-t / eps_tau) over greedy-phase action selections t.
    """

    hidden_sizes: tuple[int, ...] = (128, 128)
    learning_rate: float = 1e-3
    gamma: float = 0.9
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_tau: float = 2000.0
    buffer_capacity: int = 50_000
    batch_size: int = 64
    target_sync: int = 200
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self) -> None:
        if not 0.0 < self.learning_rate:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0.0 <= self.eps_end <= self.eps_start <= 1.0:
            raise ConfigError(
                f"need 0 <= eps_end <= eps_start <= 1, got "
                f"({self.eps_start}, {self.eps_end})"
            )
        if self.eps_tau <= 0:
            raise ConfigError(f"eps_tau must be positive, got {self.eps_tau}")
        if self.batch_size <= 0 or self.buffer_capacity < self.batch_size:
            raise ConfigError(
                f"need buffer_capacity >= batch_size > 0, got "
                f"({self.buffer_capacity}, {self.batch_size})"
            )
        if self.target_sync <= 0:
            raise ConfigError(f"target_sync must be positive, got {self.target_sync}")
        if not self.hidden_sizes or any(h <= 0 for h in self.hidden_sizes):
            raise ConfigError(f"hidden_sizes must be positive, got {self.hidden_sizes}")


class DqnAgent:
    """Value network, target network, replay buffer and exploration state."""

    def __init__(
        self,
        state_dim: int,
        n_actions: int,
        cfg: DqnConfig,
        rng: np.random.Generator | int | None = None,
    ) -> None:
        self.cfg = cfg
        self.n_actions = n_actions
        self.state_dim = state_dim
        self._rng = (
            rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        )
        sizes = [state_dim, *cfg.hidden_sizes, n_actions]
        self.policy = mlp.init_params(sizes, self._rng)
        self.target = mlp.clone_params(self.policy)
        self.adam = mlp.init_adam(self.policy)
        self.buffer = ReplayBuffer(cfg.buffer_capacity)
        self.warmup = False
        self.select_steps = 0
        self.train_steps = 0

    @property
    def epsilon(self) -> float:
        """Current exploration rate; pinned to 1 during warmup."""
        if self.warmup:
            return 1.0
        c = self.cfg
        return c.eps_end + (c.eps_start - c.eps_end) * np.exp(
            -self.select_steps / c.eps_tau
        )

    def select_action(self, state_enc: np.ndarray) -> int:
        """Epsilon-greedy pick; greedy ties resolve to the lowest index."""
        eps = self.epsilon
        if not self.warmup:
            self.select_steps += 1
        if self._rng.random() < eps:
            return int(self._rng.integers(self.n_actions))
        return self.greedy_action(state_enc)

    def greedy_action(self, state_enc: np.ndarray) -> int:
        return int(np.argmax(mlp.forward(self.policy, state_enc)))

    def greedy_action_marginal(self, context_encs: np.ndarray) -> int:
        """Majority vote of greedy picks over a batch of context encodings.

        Evaluation policies use this with one row per possible last action,
        since the trained network never sees the no-history encoding.  The
        vote ignores Q magnitudes, so contexts the behavior policy never
        visits (whose values are pure extrapolation) cannot outweigh the
        well-trained ones; ties break to the lowest action index.
        """
        q = mlp.forward(self.policy, context_encs)
        votes = np.bincount(np.argmax(q, axis=1), minlength=q.shape[1])
        return int(np.argmax(votes))

    def store(self, transition: Transition) -> None:
        self.buffer.push(transition)

    def train_step(self) -> Optional[float]:
        """One replay minibatch update; None while the buffer is short."""
        if len(self.buffer) < self.cfg.batch_size:
            return None
        batch = self.buffer.sample(self.cfg.batch_size, self._rng)
        states = np.stack([t.state_enc for t in batch])
        actions = np.array([t.action for t in batch], dtype=int)
        rewards = np.array([t.reward for t in batch], dtype=float)
        next_states = np.stack([t.next_state_enc for t in batch])
        live = np.array([0.0 if t.done else 1.0 for t in batch])

        next_q = mlp.forward(self.target, next_states)
        targets = rewards + self.cfg.gamma * live * next_q.max(axis=1)
        loss, grads = mlp.mse_loss_and_grad(self.policy, states, actions, targets)
        mlp.adam_step(
            self.policy,
            grads,
            self.adam,
            lr=self.cfg.learning_rate,
            beta1=self.cfg.adam_beta1,
            beta2=self.cfg.adam_beta2,
            eps=self.cfg.adam_eps,
        )
        self.train_steps += 1
        if self.train_steps % self.cfg.target_sync == 0:
            self.target = mlp.clone_params(self.policy)
        return loss

    def save_policy(self, path: str | Path) -> None:
        mlp.save_params(path, self.policy)

    def load_policy(self, path: str | Path) -> None:
        self.policy = mlp.load_params(path)
        self.target = mlp.clone_params(self.policy)


class GucbAgent:
    """Independent UCB1 arm table per cell over the beam-pair actions."""

    def __init__(self, n_cells: int, n_actions: int, c: float = float(np.sqrt(2.0))) -> None:
        if n_cells <= 0 or n_actions <= 0:
            raise ConfigError(f"need positive table shape, got ({n_cells}, {n_actions})")
        if c < 0:
            raise ConfigError(f"exploration constant must be >= 0, got {c}")
        self.c = c
        self.counts = np.zeros((n_cells, n_actions), dtype=int)
        self.means = np.zeros((n_cells, n_actions))

    def select(self, cell: int) -> int:
        """Untried arms first (lowest index), then the max-UCB arm."""
        counts = self.counts[cell]
        untried = np.flatnonzero(counts == 0)
        if untried.size:
            return int(untried[0])
        t = counts.sum()
        ucb = self.means[cell] + self.c * np.sqrt(np.log(t) / counts)
        return int(np.argmax(ucb))

    def update(self, cell: int, action: int, reward: float) -> None:
        self.counts[cell, action] += 1
        n = self.counts[cell, action]
        self.means[cell, action] += (reward - self.means[cell, action]) / n

    def select_and_update(self, cell: int, env: BeamEnv):
        """Pick an arm, apply it through the environment, absorb the reward."""
        action = self.select(cell)
        outcome = env.step(action)
        self.update(cell, action, outcome.reward)
        return action, outcome

    def best_action(self, cell: int) -> int:
        """Most-pulled arm of a cell, the bandit's exploit choice."""
        return int(np.argmax(self.counts[cell]))


@dataclass(frozen=True)
class EpisodeRecord:
    """One training/evaluation episode as logged by the runners."""

    episode: int
    cell: int
    length: int
    terminal_reward: int
    episode_reward: int
    cum_reward: int
    epsilon: float
    mean_loss: float
    train_steps: int
    ttu_total: int
    rss_error: float


def run_warmup(env: BeamEnv, agent: DqnAgent, rng: np.random.Generator) -> int:
    """Sweep every action exactly once per cell, storing all transitions.

    Per cell one episode is driven through a random permutation of the
    action space; the permutation's head is applied by ``reset`` so the
    sweep costs exactly one TTU per action.  No gradient steps happen here.
    Returns the TTUs spent.
    """
    start = env.ttu_total
    agent.warmup = True
    try:
        for cell in range(len(env.grid)):
            perm = rng.permutation(len(env.actions))
            state = env.reset(cell_index=cell, first_action=int(perm[0]))
            enc = env.encode(state)
            for action in perm[1:]:
                outcome = env.step(int(action), end_on_success=False)
                next_enc = env.encode(outcome.next_state)
                agent.store(
                    Transition(enc, int(action), outcome.reward, next_enc, outcome.done)
                )
                enc = next_enc
    finally:
        agent.warmup = False
    return env.ttu_total - start


def _probe_rss(env: BeamEnv, agent: DqnAgent) -> float:
    return env.rss_error(
        lambda cell: agent.greedy_action_marginal(env.encode_all_contexts(cell))
    )


def run_training(
    env: BeamEnv,
    agent: DqnAgent,
    n_episodes: int,
    rss_probe_every: int = 0,
    rss_probe_final: int = 0,
) -> list[EpisodeRecord]:
    """Epsilon-greedy training over uniformly random cells.

    Each episode runs from ``reset`` until the first +1 or the action-space
    cap, with one replay update per step.  ``rss_probe_every`` > 0 adds a
    periodic greedy-policy RSS-error probe to the records (NaN elsewhere);
    ``rss_probe_final`` > 0 additionally probes each of that many trailing
    episodes, so windowed end-of-run error statistics are exact.
    """
    records = []
    cum_reward = 0
    for episode in range(n_episodes):
        state = env.reset()
        ep_reward = 0
        terminal = 0
        losses: list[float] = []
        while True:
            enc = env.encode(state)
            action = agent.select_action(enc)
            outcome = env.step(action)
            agent.store(
                Transition(
                    enc,
                    action,
                    outcome.reward,
                    env.encode(outcome.next_state),
                    outcome.done,
                )
            )
            loss = agent.train_step()
            if loss is not None:
                losses.append(loss)
            ep_reward += outcome.reward
            state = outcome.next_state
            if outcome.done:
                terminal = outcome.reward
                break
        cum_reward += ep_reward
        probe_now = (
            rss_probe_every > 0 and (episode + 1) % rss_probe_every == 0
        ) or (rss_probe_final > 0 and episode >= n_episodes - rss_probe_final)
        records.append(
            EpisodeRecord(
                episode=episode,
                cell=state.cell_index,
                length=env.episode_len,
                terminal_reward=terminal,
                episode_reward=ep_reward,
                cum_reward=cum_reward,
                epsilon=float(agent.epsilon),
                mean_loss=float(np.mean(losses)) if losses else np.nan,
                train_steps=agent.train_steps,
                ttu_total=env.ttu_total,
                rss_error=_probe_rss(env, agent) if probe_now else np.nan,
            )
        )
    return records


def run_gucb(env: BeamEnv, agent: GucbAgent, n_episodes: int) -> list[EpisodeRecord]:
    """Bandit training loop under the same episode protocol as the DQN.

    The reset measurement seeds the cell's best-rate record but is not an
    arm pull, so the arm statistics only ever see chosen actions.
    """
    records = []
    cum_reward = 0
    for episode in range(n_episodes):
        state = env.reset()
        cell = state.cell_index
        ep_reward = 0
        terminal = 0
        while True:
            _, outcome = agent.select_and_update(cell, env)
            ep_reward += outcome.reward
            if outcome.done:
                terminal = outcome.reward
                break
        cum_reward += ep_reward
        records.append(
            EpisodeRecord(
                episode=episode,
                cell=cell,
                length=env.episode_len,
                terminal_reward=terminal,
                episode_reward=ep_reward,
                cum_reward=cum_reward,
                epsilon=np.nan,
                mean_loss=np.nan,
                train_steps=0,
                ttu_total=env.ttu_total,
                rss_error=np.nan,
            )
        )
    return records


def run_exhaustive(
    env: BeamEnv, n_episodes: int, rng: np.random.Generator
) -> list[EpisodeRecord]:
    """Full-sweep baseline: every alignment costs the whole action space."""
    records = []
    cum_reward = 0
    for episode in range(n_episodes):
        env.advance_channel()
        cell = int(rng.integers(len(env.grid)))
        _, _, cost = env.exhaustive_sweep(cell)
        cum_reward += 1
        records.append(
            EpisodeRecord(
                episode=episode,
                cell=cell,
                length=cost,
                terminal_reward=1,
                episode_reward=1,
                cum_reward=cum_reward,
                epsilon=np.nan,
                mean_loss=np.nan,
                train_steps=0,
                ttu_total=env.ttu_total,
                rss_error=np.nan,
            )
        )
    return records
