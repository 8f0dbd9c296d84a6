"""Minimal dense MLP on numpy: forward pass, MSE backprop, Adam.

Only what Q-learning on small state vectors needs: ReLU hidden layers, a
linear output head, a scalar-regression loss applied to one selected output
per sample, and Adam with bias correction.  Gradients reuse the parameter
container so the optimizer walks both in lockstep.

Checkpoint format (little-endian, version 1):

    bytes 0..7    magic ``b"BEAMMLP\\0"``
    u32           format version (1)
    u32           number of layer sizes S
    S x u32       layer sizes, input first
    per layer     W as float64 row-major with shape (fan_in, fan_out),
                  then b as float64 with shape (fan_out,)

No pickling, so checkpoints are portable and safe to load.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError

_MAGIC = b"BEAMMLP\x00"
_VERSION = 1


@dataclass
class MlpParams:
    """Weights and biases per layer; also used as the gradient container."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_layers(self) -> int:
        return len(self.weights)


@dataclass
class AdamState:
    """First/second moment accumulators and the shared step counter."""

    m_weights: list[np.ndarray]
    v_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_biases: list[np.ndarray]
    t: int = 0


def init_params(layer_sizes: list[int], rng: np.random.Generator) -> MlpParams:
    """He-normal weights (std sqrt(2/fan_in)) and zero biases."""
    if len(layer_sizes) < 2:
        raise ConfigError(f"need at least input and output sizes, got {layer_sizes}")
    if any(int(s) <= 0 for s in layer_sizes):
        raise ConfigError(f"layer sizes must be positive, got {layer_sizes}")
    weights = []
    biases = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        std = np.sqrt(2.0 / fan_in)
        weights.append(rng.normal(0.0, std, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights=weights, biases=biases)


def clone_params(params: MlpParams) -> MlpParams:
    return MlpParams(
        weights=[w.copy() for w in params.weights],
        biases=[b.copy() for b in params.biases],
    )


def zeros_like_params(params: MlpParams) -> MlpParams:
    return MlpParams(
        weights=[np.zeros_like(w) for w in params.weights],
        biases=[np.zeros_like(b) for b in params.biases],
    )


def _forward_cached(
    params: MlpParams, x: np.ndarray
) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    """Batch forward returning output, layer inputs and pre-activations."""
    act = x
    layer_inputs = []
    pre_acts = []
    last = params.n_layers - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        layer_inputs.append(act)
        z = act @ w + b
        pre_acts.append(z)
        act = z if i == last else np.maximum(z, 0.0)
    return act, layer_inputs, pre_acts


def forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Network output for a single input (1D) or a batch (2D, rows)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != params.weights[0].shape[0]:
        raise DimensionError(
            f"input shape {x.shape} incompatible with first layer "
            f"fan-in {params.weights[0].shape[0]}"
        )
    out, _, _ = _forward_cached(params, batch)
    return out[0] if single else out


def mse_loss_and_grad(
    params: MlpParams,
    inputs: np.ndarray,
    action_indices: np.ndarray,
    targets: np.ndarray,
) -> tuple[float, MlpParams]:
    """Mean squared error on one selected output per sample, with gradients.

    loss = mean_i (out[i, action_indices[i]] - targets[i])^2.  Outputs not
    selected by any sample receive zero gradient.  A 1D input with scalar
    action/target is treated as a batch of one.
    """
    inputs = np.asarray(inputs, dtype=float)
    action_indices = np.atleast_1d(np.asarray(action_indices, dtype=int))
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    if inputs.ndim == 1:
        inputs = inputs[None, :]
    if inputs.ndim != 2:
        raise DimensionError(f"inputs must be a 2D batch, got shape {inputs.shape}")
    n = inputs.shape[0]
    if action_indices.shape != (n,) or targets.shape != (n,):
        raise DimensionError(
            f"batch size mismatch: inputs {inputs.shape}, "
            f"actions {action_indices.shape}, targets {targets.shape}"
        )

    out, layer_inputs, pre_acts = _forward_cached(params, inputs)
    rows = np.arange(n)
    picked = out[rows, action_indices]
    err = picked - targets
    loss = float(np.mean(err**2))

    d_out = np.zeros_like(out)
    d_out[rows, action_indices] = 2.0 * err / n

    grads = zeros_like_params(params)
    delta = d_out
    for i in range(params.n_layers - 1, -1, -1):
        grads.weights[i] = layer_inputs[i].T @ delta
        grads.biases[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (pre_acts[i - 1] > 0.0)
    return loss, grads


def init_adam(params: MlpParams) -> AdamState:
    zeros = zeros_like_params(params)
    return AdamState(
        m_weights=zeros.weights,
        v_weights=[np.zeros_like(w) for w in params.weights],
        m_biases=zeros.biases,
        v_biases=[np.zeros_like(b) for b in params.biases],
        t=0,
    )


def adam_step(
    params: MlpParams,
    grads: MlpParams,
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update, in place on params and state."""
    state.t += 1
    c1 = 1.0 - beta1**state.t
    c2 = 1.0 - beta2**state.t
    for i in range(params.n_layers):
        for p, g, m, v in (
            (params.weights[i], grads.weights[i], state.m_weights[i], state.v_weights[i]),
            (params.biases[i], grads.biases[i], state.m_biases[i], state.v_biases[i]),
        ):
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g**2
            p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def save_params(path: str | Path, params: MlpParams) -> None:
    """Write a version-1 checkpoint (layout in the module docstring)."""
    sizes = params.layer_sizes
    chunks = [_MAGIC, struct.pack("<II", _VERSION, len(sizes))]
    chunks.append(struct.pack(f"<{len(sizes)}I", *sizes))
    for w, b in zip(params.weights, params.biases):
        chunks.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        chunks.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_params(path: str | Path) -> MlpParams:
    """Read a checkpoint written by :func:`save_params`."""
    raw = Path(path).read_bytes()
    if raw[: len(_MAGIC)] != _MAGIC:
        raise ConfigError(f"{path}: not a network checkpoint")
    off = len(_MAGIC)
    version, n_sizes = struct.unpack_from("<II", raw, off)
    off += 8
    if version != _VERSION:
        raise ConfigError(f"{path}: unsupported checkpoint version {version}")
    sizes = list(struct.unpack_from(f"<{n_sizes}I", raw, off))
    off += 4 * n_sizes
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = np.frombuffer(raw, dtype="<f8", count=fan_in * fan_out, offset=off)
        off += 8 * fan_in * fan_out
        b = np.frombuffer(raw, dtype="<f8", count=fan_out, offset=off)
        off += 8 * fan_out
        weights.append(w.reshape(fan_in, fan_out).astype(float))
        biases.append(b.astype(float))
    if off != len(raw):
        raise ConfigError(f"{path}: trailing bytes in checkpoint")
    return MlpParams(weights=weights, biases=biases)
