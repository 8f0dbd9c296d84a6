"""ULA steering vectors and discrete beam codebooks.

Both the UAV (TX) and the BS (RX) carry a uniform linear array with a single
RF chain, so analog beamforming reduces to picking one phase-steering vector
per side.  The codebook quantizes the angular domain [0, pi) into N beams,

    b_i = (i - 1) * pi / N     for i = 1..N   (0-based in code: index i-1),

and realizes beam ``b`` with the unit-norm vector

    w(b)[n] = exp(j * 2*pi * n * (d/lambda) * sin(b)) / sqrt(N),  n = 0..N-1.

Steering vectors use the same phase profile, so a beam pointed exactly at a
path angle collects the full array response (|w^H a| = 1).  Note that sin is
symmetric about pi/2, so angle pairs (theta, pi - theta) map to identical
vectors; the codebook keeps both entries and ties are resolved downstream by
lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError

UNIT_NORM_TOL = 1e-12


@dataclass(frozen=True)
class UlaConfig:
    """Uniform linear array: element count and spacing in wavelengths."""

    n_antennas: int
    spacing_over_lambda: float = 0.5

    def __post_init__(self) -> None:
        if self.n_antennas <= 0:
            raise ConfigError(f"n_antennas must be positive, got {self.n_antennas}")
        if self.spacing_over_lambda <= 0:
            raise ConfigError(
                f"spacing_over_lambda must be positive, got {self.spacing_over_lambda}"
            )


@dataclass(frozen=True)
class BeamCodebook:
    """N quantized beam directions and their unit-norm beamforming vectors.

    ``angles[i]`` is the pointing angle of beam i in radians and
    ``vectors[i]`` the matching length-N complex steering vector (rows).
    """

    n_antennas: int
    angles: np.ndarray
    vectors: np.ndarray

    def __len__(self) -> int:
        return len(self.angles)


def steering_vector(theta: float, cfg: UlaConfig) -> np.ndarray:
    """Array response a(theta): unit-norm phase ramp for a plane wave at theta.

    a(theta)[l] = exp(j * 2*pi * l * (d/lambda) * sin(theta)) / sqrt(N).
    """
    if not np.isfinite(theta):
        raise ConfigError(f"theta must be finite, got {theta}")
    n = cfg.n_antennas
    phase = 2.0 * np.pi * cfg.spacing_over_lambda * np.sin(theta)
    return np.exp(1j * phase * np.arange(n)) / np.sqrt(n)


def make_codebook(cfg: UlaConfig) -> BeamCodebook:
    """Build the N-beam codebook with angles (i-1)*pi/N, i = 1..N."""
    n = cfg.n_antennas
    angles = np.arange(n) * np.pi / n
    vectors = np.stack([steering_vector(b, cfg) for b in angles])
    return BeamCodebook(n_antennas=n, angles=angles, vectors=vectors)


def beamforming_gain(w: np.ndarray, a: np.ndarray) -> complex:
    """Hermitian inner product w^H a between a beam and an array response."""
    w = np.asarray(w)
    a = np.asarray(a)
    if w.shape != a.shape:
        raise DimensionError(f"length mismatch: {w.shape} vs {a.shape}")
    return complex(np.vdot(w, a))
