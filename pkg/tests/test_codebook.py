"""Codebook and steering-vector math against closed forms and a scalar oracle."""

import cmath
import math

import numpy as np
import pytest

from beamalign.codebook import (
    BeamCodebook,
    UlaConfig,
    beamforming_gain,
    make_codebook,
    steering_vector,
)
from beamalign.errors import ConfigError, DimensionError

UNIT_TOL = 1e-12


def scalar_steering(theta: float, n: int, spacing: float) -> list[complex]:
    """Independent per-element evaluation of the steering formula."""
    return [
        cmath.exp(1j * 2.0 * math.pi * l * spacing * math.sin(theta)) / math.sqrt(n)
        for l in range(n)
    ]


def scalar_inner(w, a) -> complex:
    """Plain-loop Hermitian inner product, the gain oracle."""
    total = 0.0 + 0.0j
    for wl, al in zip(w, a):
        total += complex(wl).conjugate() * complex(al)
    return total


def test_codebook_angles_n8():
    cb = make_codebook(UlaConfig(n_antennas=8))
    assert np.allclose(cb.angles, np.arange(8) * np.pi / 8.0)
    assert len(cb) == 8
    assert cb.vectors.shape == (8, 8)


def test_codebook_first_beam_is_uniform():
    cb = make_codebook(UlaConfig(n_antennas=8))
    assert np.allclose(cb.vectors[0], np.full(8, 1.0 / math.sqrt(8.0)), atol=UNIT_TOL)


def test_codebook_unit_norms():
    for n in (1, 2, 4, 8, 16, 64):
        cb = make_codebook(UlaConfig(n_antennas=n))
        norms = np.linalg.norm(cb.vectors, axis=1)
        assert np.max(np.abs(norms - 1.0)) < UNIT_TOL


def test_codebook_matches_steering_vector_on_grid():
    cfg = UlaConfig(n_antennas=8)
    cb = make_codebook(cfg)
    for i, angle in enumerate(cb.angles):
        assert np.allclose(cb.vectors[i], steering_vector(angle, cfg), atol=UNIT_TOL)


def test_steering_vector_closed_forms():
    v = steering_vector(0.0, UlaConfig(n_antennas=4))
    assert np.allclose(v, [0.5, 0.5, 0.5, 0.5], atol=UNIT_TOL)
    v = steering_vector(math.pi / 2.0, UlaConfig(n_antennas=2))
    assert np.allclose(v, np.array([1.0, -1.0]) / math.sqrt(2.0), atol=1e-12)


def test_steering_vector_against_scalar_oracle():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 33))
        theta = float(rng.uniform(-math.pi, math.pi))
        spacing = float(rng.uniform(0.1, 1.0))
        got = steering_vector(theta, UlaConfig(n_antennas=n, spacing_over_lambda=spacing))
        want = scalar_steering(theta, n, spacing)
        assert np.allclose(got, want, atol=1e-13)
        assert abs(np.linalg.norm(got) - 1.0) < UNIT_TOL


def test_steering_vector_conjugate_symmetry():
    cfg = UlaConfig(n_antennas=8)
    rng = np.random.default_rng(11)
    for theta in rng.uniform(0.0, math.pi, size=20):
        assert np.allclose(
            steering_vector(-theta, cfg), np.conj(steering_vector(theta, cfg)), atol=1e-13
        )


def test_steering_vector_mirror_angles_identical():
    # sin(theta) = sin(pi - theta) makes the two vectors exactly equal
    cfg = UlaConfig(n_antennas=8)
    rng = np.random.default_rng(13)
    for theta in rng.uniform(0.0, math.pi, size=20):
        a = steering_vector(theta, cfg)
        b = steering_vector(math.pi - theta, cfg)
        assert np.allclose(a, b, atol=1e-12)


def test_matched_beam_maximality():
    cfg = UlaConfig(n_antennas=8)
    cb = make_codebook(cfg)
    for k, angle in enumerate(cb.angles):
        a = steering_vector(angle, cfg)
        mags = np.abs([beamforming_gain(w, a) for w in cb.vectors])
        argmax_set = np.flatnonzero(mags >= mags.max() - 1e-12)
        assert k in argmax_set
        assert mags[k] == pytest.approx(1.0, abs=1e-12)


def test_beamforming_gain_matched_and_orthogonal():
    cfg = UlaConfig(n_antennas=8)
    rng = np.random.default_rng(3)
    a = steering_vector(float(rng.uniform(0, math.pi)), cfg)
    assert abs(beamforming_gain(a, a)) == pytest.approx(1.0, abs=1e-12)
    # explicit orthogonal pair
    w = np.zeros(2, dtype=complex)
    w[0] = 1.0
    v = np.zeros(2, dtype=complex)
    v[1] = 1.0
    assert beamforming_gain(w, v) == 0.0


def test_beamforming_gain_against_scalar_oracle():
    cfg = UlaConfig(n_antennas=8)
    cb = make_codebook(cfg)
    got = beamforming_gain(cb.vectors[0], cb.vectors[4])
    want = scalar_inner(cb.vectors[0], cb.vectors[4])
    assert got == pytest.approx(want, abs=1e-12)
    rng = np.random.default_rng(5)
    for _ in range(30):
        w = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        a = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        assert beamforming_gain(w, a) == pytest.approx(scalar_inner(w, a), abs=1e-10)


def test_beamforming_gain_hermitian_swap():
    rng = np.random.default_rng(17)
    for _ in range(20):
        w = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        a = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        assert beamforming_gain(w, a) == pytest.approx(
            np.conj(beamforming_gain(a, w)), abs=1e-12
        )


def test_invalid_inputs_raise():
    with pytest.raises(ConfigError):
        UlaConfig(n_antennas=0)
    with pytest.raises(ConfigError):
        UlaConfig(n_antennas=4, spacing_over_lambda=0.0)
    with pytest.raises(ConfigError):
        steering_vector(math.nan, UlaConfig(n_antennas=4))
    with pytest.raises(DimensionError):
        beamforming_gain(np.ones(4, dtype=complex), np.ones(5, dtype=complex))
