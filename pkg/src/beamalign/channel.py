"""Multipath channel generation, UMa pathloss, SNR and rate measurement.

A channel realization for one UE grid position is a small set of plane-wave
paths.  The direct path (present under LoS) takes its departure/arrival
angles from the BS-UE geometry; reflected paths get angles drawn uniformly
over the codebook's angular domain [0, pi) and an extra per-path attenuation
relative to the direct-path budget.  Path gains fold in pathloss, shadow
fading and the excess loss, so the narrowband beam-pair gain

    g = sum_m beta_m * (w_rx^H a_R(aoa_m)) * (a_T(aod_m)^H w_tx)

is the full coefficient multiplying the unit-energy transmit symbol.  Slow
time variation is modelled as a first-order autoregressive process per path,
with the direct path anchored on a deterministic specular component set by
the Rician K-factor.

Large-scale pathloss follows the 3GPP urban-macro aerial-UE closed forms:

    LoS : 28.0 + 22*log10(d3d) + 20*log10(fc_GHz)
    nLoS: max(LoS, 13.54 + 39.08*log10(d3d) + 20*log10(fc_GHz)
               - 0.6*(h_ue - 1.5))

Both arrays are oriented along the global x axis, so the angle of a path
between two points is arccos(dx / d3d), which always lands inside [0, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .codebook import steering_vector, UlaConfig
from .errors import ConfigError, DimensionError


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class LinkBudget:
    """Transmit power, noise density and bandwidth of the uplink."""

    tx_power_dbm: float = 0.0
    noise_psd_dbm_hz: float = -174.0
    bandwidth_hz: float = 100e6
    carrier_hz: float = 30e9

    def __post_init__(self) -> None:
        if self.bandwidth_hz <= 0:
            raise ConfigError(f"bandwidth_hz must be positive, got {self.bandwidth_hz}")
        if self.carrier_hz <= 0:
            raise ConfigError(f"carrier_hz must be positive, got {self.carrier_hz}")

    @property
    def noise_power_mw(self) -> float:
        """Total thermal noise over the bandwidth, in mW."""
        return db_to_linear(self.noise_psd_dbm_hz) * self.bandwidth_hz

    @property
    def tx_power_mw(self) -> float:
        return db_to_linear(self.tx_power_dbm)


@dataclass(frozen=True)
class ChannelScenario:
    """Propagation scenario knobs for one coverage area.

    los_mode: "los", "nlos", or "mixed" (per-cell Bernoulli draw with
    ``los_probability``).  ``n_reflections`` is the number of reflected
    paths on top of the direct one.  ``excess_loss_db`` is either a scalar
    applied to every reflected path or a per-path sequence.  Fading, when
    enabled, evolves per episode with AR(1) coefficient ``fading_rho`` and
    a specular-to-diffuse ratio of ``rician_k_db`` on the direct path.
    """

    los_mode: str = "nlos"
    los_probability: float = 0.5
    n_reflections: int = 6
    excess_loss_db: Union[float, Sequence[float]] = 10.0
    shadow_sigma_db: float = 0.0
    fading: bool = False
    fading_rho: float = 0.99
    rician_k_db: float = 10.0

    def __post_init__(self) -> None:
        if self.los_mode not in ("los", "nlos", "mixed"):
            raise ConfigError(f"unknown los_mode {self.los_mode!r}")
        if self.n_reflections < 0:
            raise ConfigError("n_reflections must be >= 0")
        if not 0.0 <= self.fading_rho <= 1.0:
            raise ConfigError(f"fading_rho must be in [0, 1], got {self.fading_rho}")
        if not 0.0 <= self.los_probability <= 1.0:
            raise ConfigError("los_probability must be in [0, 1]")

    def excess_profile(self) -> np.ndarray:
        """Per-reflected-path excess attenuation in dB, length n_reflections."""
        if np.isscalar(self.excess_loss_db):
            return np.full(self.n_reflections, float(self.excess_loss_db))
        prof = np.asarray(self.excess_loss_db, dtype=float)
        if prof.shape != (self.n_reflections,):
            raise ConfigError(
                f"excess_loss_db profile needs {self.n_reflections} entries, got {prof.shape}"
            )
        return prof

    def resolve_los(self, rng: np.random.Generator) -> bool:
        if self.los_mode == "los":
            return True
        if self.los_mode == "nlos":
            return False
        return bool(rng.random() < self.los_probability)


@dataclass(frozen=True)
class PathComponent:
    """One plane-wave path: departure angle, arrival angle, complex gain."""

    aod: float
    aoa: float
    gain: complex


@dataclass(frozen=True)
class ChannelRealization:
    """Frozen large-scale state of one UE position's multipath channel.

    ``paths[0]`` is the direct path when ``los`` is set.  Path gains already
    include pathloss, shadow fading and per-path excess loss as amplitudes.
    """

    paths: tuple[PathComponent, ...]
    los: bool
    pathloss_db: float
    shadow_db: float
    rician_k_db: Optional[float]

    @property
    def n_paths(self) -> int:
        return len(self.paths)

    def base_gains(self) -> np.ndarray:
        return np.array([p.gain for p in self.paths], dtype=complex)


@dataclass(frozen=True)
class FadingState:
    """Per-path AR(1) fading coefficients with unit average power.

    ``mean`` holds each path's deterministic specular component and
    ``diffuse_power`` the variance of its diffuse part; mean^2 + diffuse
    power is 1 for every path, so fading never changes the average budget.
    """

    coeffs: np.ndarray
    rho: float
    mean: np.ndarray = field(repr=False)
    diffuse_power: np.ndarray = field(repr=False)


def pathloss_uma(d3d_m: float, h_ue_m: float, los: bool, budget: LinkBudget) -> float:
    """Urban-macro aerial-UE pathloss in dB for a 3D distance and UE height."""
    if d3d_m <= 0:
        raise ConfigError(f"d3d_m must be positive, got {d3d_m}")
    fc_ghz = budget.carrier_hz / 1e9
    pl_los = 28.0 + 22.0 * math.log10(d3d_m) + 20.0 * math.log10(fc_ghz)
    if los:
        return pl_los
    pl_nlos = (
        13.54
        + 39.08 * math.log10(d3d_m)
        + 20.0 * math.log10(fc_ghz)
        - 0.6 * (h_ue_m - 1.5)
    )
    return max(pl_los, pl_nlos)


def path_angle(p_from: np.ndarray, p_to: np.ndarray) -> float:
    """Angle in [0, pi] between the from->to direction and the array axis (+x)."""
    delta = np.asarray(p_to, dtype=float) - np.asarray(p_from, dtype=float)
    dist = float(np.linalg.norm(delta))
    if dist == 0.0:
        raise ConfigError("path endpoints coincide")
    return float(np.arccos(np.clip(delta[0] / dist, -1.0, 1.0)))


def realize_channel(
    ue_pos: np.ndarray,
    bs_pos: np.ndarray,
    scenario: ChannelScenario,
    budget: LinkBudget,
    rng: np.random.Generator,
    *,
    los: Optional[bool] = None,
) -> ChannelRealization:
    """Draw the frozen multipath state for one UE position.

    ``los`` overrides the scenario's mode when given (the environment uses
    this to pin per-cell conditions drawn once).  Reflected-path angles are
    uniform over [0, pi), reflected phases uniform over [0, 2*pi), and the
    direct path has zero phase.  Deterministic given inputs and generator
    state.
    """
    ue_pos = np.asarray(ue_pos, dtype=float)
    bs_pos = np.asarray(bs_pos, dtype=float)
    if los is None:
        los = scenario.resolve_los(rng)

    d3d = float(np.linalg.norm(ue_pos - bs_pos))
    pl_db = pathloss_uma(d3d, float(ue_pos[2]), los, budget)
    shadow_db = (
        float(rng.normal(0.0, scenario.shadow_sigma_db))
        if scenario.shadow_sigma_db > 0
        else 0.0
    )

    paths: list[PathComponent] = []
    base_amp = 10.0 ** (-(pl_db + shadow_db) / 20.0)
    if los:
        aod = path_angle(ue_pos, bs_pos)
        aoa = path_angle(bs_pos, ue_pos)
        paths.append(PathComponent(aod=aod, aoa=aoa, gain=complex(base_amp)))

    excess = scenario.excess_profile()
    for m in range(scenario.n_reflections):
        aod = float(rng.uniform(0.0, np.pi))
        aoa = float(rng.uniform(0.0, np.pi))
        phase = float(rng.uniform(0.0, 2.0 * np.pi))
        amp = base_amp * 10.0 ** (-excess[m] / 20.0)
        paths.append(PathComponent(aod=aod, aoa=aoa, gain=amp * np.exp(1j * phase)))

    if not paths:
        raise ConfigError("scenario produced no paths (nlos with n_reflections=0)")

    return ChannelRealization(
        paths=tuple(paths),
        los=los,
        pathloss_db=pl_db,
        shadow_db=shadow_db,
        rician_k_db=scenario.rician_k_db if scenario.fading else None,
    )


def initial_fading(
    ch: ChannelRealization, scenario: ChannelScenario, rng: np.random.Generator
) -> FadingState:
    """Draw fading coefficients from their stationary distribution.

    The direct path keeps a deterministic component of power K/(K+1) and a
    diffuse component of power 1/(K+1); reflected paths are fully diffuse.
    """
    n = ch.n_paths
    mean = np.zeros(n)
    diffuse = np.ones(n)
    if ch.los:
        k_lin = db_to_linear(scenario.rician_k_db)
        mean[0] = math.sqrt(k_lin / (k_lin + 1.0))
        diffuse[0] = 1.0 / (k_lin + 1.0)
    noise = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    coeffs = mean + np.sqrt(diffuse / 2.0) * noise
    return FadingState(
        coeffs=coeffs, rho=scenario.fading_rho, mean=mean, diffuse_power=diffuse
    )


def step_fading(state: FadingState, rng: np.random.Generator) -> FadingState:
    """Advance the AR(1) fading one step, preserving each path's moments.

    diffuse' = rho * diffuse + sqrt(1 - rho^2) * innovation, so rho = 1
    freezes the channel and rho = 0 redraws it independently.
    """
    rho = state.rho
    n = len(state.coeffs)
    diffuse = state.coeffs - state.mean
    noise = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    innovation = np.sqrt(state.diffuse_power / 2.0) * noise
    new_diffuse = rho * diffuse + math.sqrt(max(0.0, 1.0 - rho * rho)) * innovation
    return FadingState(
        coeffs=state.mean + new_diffuse,
        rho=rho,
        mean=state.mean,
        diffuse_power=state.diffuse_power,
    )


def narrowband_gain(
    ch: ChannelRealization,
    w_tx: np.ndarray,
    w_rx: np.ndarray,
    tx_cfg: UlaConfig,
    rx_cfg: UlaConfig,
    fading: Optional[FadingState] = None,
) -> complex:
    """Beam-pair channel coefficient summed over paths.

    Returns sum_m beta_m * (w_rx^H a_R(aoa_m)) * (a_T(aod_m)^H w_tx), with
    beta_m scaled by the fading coefficients when a fading state is given.
    """
    w_tx = np.asarray(w_tx)
    w_rx = np.asarray(w_rx)
    if w_tx.shape != (tx_cfg.n_antennas,):
        raise DimensionError(f"w_tx has shape {w_tx.shape}, expected ({tx_cfg.n_antennas},)")
    if w_rx.shape != (rx_cfg.n_antennas,):
        raise DimensionError(f"w_rx has shape {w_rx.shape}, expected ({rx_cfg.n_antennas},)")

    gains = ch.base_gains()
    if fading is not None:
        if len(fading.coeffs) != ch.n_paths:
            raise DimensionError("fading state does not match path count")
        gains = gains * fading.coeffs

    total = 0.0 + 0.0j
    for beta, p in zip(gains, ch.paths):
        a_r = steering_vector(p.aoa, rx_cfg)
        a_t = steering_vector(p.aod, tx_cfg)
        total += beta * np.vdot(w_rx, a_r) * np.vdot(a_t, w_tx)
    return complex(total)


def snr_and_rate(gain: complex, budget: LinkBudget) -> tuple[float, float]:
    """SNR (linear) and rate (bits per channel use) for a beam-pair gain.

    SNR = P_tx * |gain|^2 / (N0 * W); rate = log2(1 + SNR).  Deterministic:
    all randomness lives in channel realization and fading.
    """
    snr = budget.tx_power_mw * abs(gain) ** 2 / budget.noise_power_mw
    return snr, math.log2(1.0 + snr)


def measure_beam_pair(
    ch: ChannelRealization,
    w_tx: np.ndarray,
    w_rx: np.ndarray,
    tx_cfg: UlaConfig,
    rx_cfg: UlaConfig,
    budget: LinkBudget,
    fading: Optional[FadingState] = None,
) -> tuple[float, float]:
    """(SNR, rate) of one TX/RX beam pair against a realization."""
    gain = narrowband_gain(ch, w_tx, w_rx, tx_cfg, rx_cfg, fading)
    return snr_and_rate(gain, budget)


def rss_dbm(gain: complex, budget: LinkBudget) -> float:
    """Received signal strength in dBm for a beam-pair gain."""
    mag = abs(gain)
    if mag <= 0.0:
        return -math.inf
    return budget.tx_power_dbm + 20.0 * math.log10(mag)
