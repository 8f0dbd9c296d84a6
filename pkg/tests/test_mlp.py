"""Forward/backward oracles, Adam traces, checkpoint round trips."""

import math
import struct

import numpy as np
import pytest

from beamalign.errors import ConfigError, DimensionError
from beamalign.mlp import (
    AdamState,
    MlpParams,
    adam_step,
    clone_params,
    forward,
    init_adam,
    init_params,
    load_params,
    mse_loss_and_grad,
    save_params,
    zeros_like_params,
)


def forward_scalar(params: MlpParams, x):
    """Per-neuron loop reference: relu hidden layers, linear output."""
    act = list(x)
    for layer, (w, b) in enumerate(zip(params.weights, params.biases)):
        fan_in, fan_out = w.shape
        nxt = []
        for j in range(fan_out):
            s = b[j]
            for i in range(fan_in):
                s += act[i] * w[i, j]
            if layer < params.n_layers - 1:
                s = max(s, 0.0)
            nxt.append(s)
        act = nxt
    return np.array(act)


def random_params(sizes, seed=0) -> MlpParams:
    rng = np.random.default_rng(seed)
    p = init_params(list(sizes), rng)
    # nonzero biases exercise the bias gradients too
    for b in p.biases:
        b[:] = rng.normal(scale=0.3, size=b.shape)
    return p


# ----------------------------------------------------------------------
# forward


def test_forward_matches_scalar_loop():
    rng = np.random.default_rng(1)
    for sizes in ([3, 5, 2], [4, 8, 8, 6], [1, 1], [6, 3]):
        params = random_params(sizes, seed=len(sizes))
        for _ in range(5):
            x = rng.normal(size=sizes[0])
            want = forward_scalar(params, x)
            got = forward(params, x)
            assert np.max(np.abs(got - want)) < 1e-12


def test_forward_batch_rows_match_single():
    params = random_params([5, 7, 3], seed=2)
    rng = np.random.default_rng(3)
    batch = rng.normal(size=(6, 5))
    out = forward(params, batch)
    assert out.shape == (6, 3)
    # batched and single matmuls may differ in blas reduction order
    for i in range(6):
        assert np.allclose(out[i], forward(params, batch[i]), atol=1e-12)


def test_forward_zero_params_zero_output():
    params = zeros_like_params(random_params([4, 6, 2]))
    assert np.all(forward(params, np.ones(4)) == 0.0)


def test_forward_single_linear_layer_exact():
    w = np.array([[1.0, -2.0], [0.5, 4.0], [3.0, 0.0]])
    b = np.array([0.25, -1.0])
    params = MlpParams(weights=[w.copy()], biases=[b.copy()])
    x = np.array([2.0, -1.0, 0.5])
    assert np.allclose(forward(params, x), x @ w + b, atol=0.0)


def test_forward_shape_errors():
    params = random_params([4, 3])
    with pytest.raises(DimensionError):
        forward(params, np.ones(5))
    with pytest.raises(DimensionError):
        forward(params, np.ones((2, 2, 2)))


def test_init_kaiming_statistics():
    rng = np.random.default_rng(0)
    params = init_params([256, 128, 64], rng)
    for w in params.weights:
        fan_in = w.shape[0]
        assert abs(w.std() - math.sqrt(2.0 / fan_in)) < 0.1 * math.sqrt(2.0 / fan_in)
        assert abs(w.mean()) < 0.05
    for b in params.biases:
        assert np.all(b == 0.0)


# ----------------------------------------------------------------------
# gradients


def numeric_grad(params, inputs, actions, targets, h=1e-5):
    """Central finite differences over every parameter entry."""
    num = zeros_like_params(params)
    for kind in ("weights", "biases"):
        arrs = getattr(params, kind)
        outs = getattr(num, kind)
        for arr, out in zip(arrs, outs):
            flat = arr.ravel()
            for k in range(flat.size):
                keep = flat[k]
                flat[k] = keep + h
                up, _ = mse_loss_and_grad(params, inputs, actions, targets)
                flat[k] = keep - h
                dn, _ = mse_loss_and_grad(params, inputs, actions, targets)
                flat[k] = keep
                out.ravel()[k] = (up - dn) / (2.0 * h)
    return num


def max_rel_err(analytic: MlpParams, numeric: MlpParams) -> float:
    worst = 0.0
    for a, n in zip(analytic.weights + analytic.biases, numeric.weights + numeric.biases):
        denom = np.maximum(np.abs(a) + np.abs(n), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def test_gradient_check_against_finite_differences():
    rng = np.random.default_rng(42)
    worst = 0.0
    for trial in range(100):
        sizes = [int(rng.integers(2, 6)) for _ in range(int(rng.integers(2, 4)) + 1)]
        params = random_params(sizes, seed=1000 + trial)
        n = int(rng.integers(1, 4))
        inputs = rng.normal(size=(n, sizes[0]))
        actions = rng.integers(0, sizes[-1], size=n)
        targets = rng.normal(size=n)
        _, grads = mse_loss_and_grad(params, inputs, actions, targets)
        num = numeric_grad(params, inputs, actions, targets)
        worst = max(worst, max_rel_err(grads, num))
    assert worst < 1e-4


def test_loss_value_definition():
    params = random_params([3, 4, 2], seed=9)
    rng = np.random.default_rng(10)
    inputs = rng.normal(size=(5, 3))
    actions = rng.integers(0, 2, size=5)
    targets = rng.normal(size=5)
    loss, _ = mse_loss_and_grad(params, inputs, actions, targets)
    out = forward(params, inputs)
    want = np.mean((out[np.arange(5), actions] - targets) ** 2)
    assert loss == pytest.approx(want, rel=1e-14)


def test_single_sample_equals_batch_of_one():
    params = random_params([4, 6, 3], seed=5)
    x = np.array([0.3, -1.2, 0.8, 2.0])
    l1, g1 = mse_loss_and_grad(params, x, 2, 0.7)
    l2, g2 = mse_loss_and_grad(params, x[None, :], np.array([2]), np.array([0.7]))
    assert l1 == l2
    for a, b in zip(g1.weights + g1.biases, g2.weights + g2.biases):
        assert np.array_equal(a, b)


def test_batch_loss_is_mean_of_samples():
    params = random_params([3, 5, 4], seed=6)
    rng = np.random.default_rng(7)
    inputs = rng.normal(size=(8, 3))
    actions = rng.integers(0, 4, size=8)
    targets = rng.normal(size=8)
    batch_loss, batch_grads = mse_loss_and_grad(params, inputs, actions, targets)
    singles = [
        mse_loss_and_grad(params, inputs[i], int(actions[i]), float(targets[i]))
        for i in range(8)
    ]
    assert batch_loss == pytest.approx(np.mean([s[0] for s in singles]), rel=1e-12)
    for idx in range(params.n_layers):
        mean_w = np.mean([s[1].weights[idx] for s in singles], axis=0)
        assert np.allclose(batch_grads.weights[idx], mean_w, atol=1e-14)


def test_relu_dead_path_zero_gradient():
    # one hidden neuron driven hard negative: its incoming weights get no signal
    w1 = np.array([[1.0], [1.0]])
    b1 = np.array([-100.0])
    w2 = np.array([[2.0]])
    b2 = np.array([0.0])
    params = MlpParams(weights=[w1, w2], biases=[b1, b2])
    _, grads = mse_loss_and_grad(params, np.array([1.0, 1.0]), 0, 5.0)
    assert np.all(grads.weights[0] == 0.0)
    assert np.all(grads.biases[0] == 0.0)
    # output bias still sees the error
    assert grads.biases[1][0] != 0.0


def test_unselected_outputs_get_no_gradient():
    params = random_params([3, 4], seed=8)
    _, grads = mse_loss_and_grad(params, np.array([1.0, 2.0, 3.0]), 1, 0.0)
    dead = [0, 2, 3]
    assert np.all(grads.weights[0][:, dead] == 0.0)
    assert np.all(grads.biases[0][dead] == 0.0)


def test_grad_shape_mismatch_raises():
    params = random_params([3, 2])
    with pytest.raises(DimensionError):
        mse_loss_and_grad(params, np.ones((2, 3)), np.array([0]), np.array([0.0]))


# ----------------------------------------------------------------------
# Adam


def test_adam_zero_gradient_keeps_params():
    params = random_params([3, 4, 2], seed=11)
    before = clone_params(params)
    state = init_adam(params)
    adam_step(params, zeros_like_params(params), state)
    assert state.t == 1
    for a, b in zip(params.weights + params.biases, before.weights + before.biases):
        assert np.array_equal(a, b)


def test_adam_first_step_matches_hand_recurrence():
    # scalar parameter, gradient g: first step moves by lr * g/(|g| + eps)
    params = MlpParams(weights=[np.array([[0.5]])], biases=[np.array([0.0])])
    grads = MlpParams(weights=[np.array([[3.0]])], biases=[np.array([-2.0])])
    state = init_adam(params)
    lr, eps = 1e-3, 1e-8
    adam_step(params, grads, state, lr=lr, beta1=0.9, beta2=0.999, eps=eps)
    assert params.weights[0][0, 0] == pytest.approx(0.5 - lr * 3.0 / (3.0 + eps), rel=1e-12)
    assert params.biases[0][0] == pytest.approx(0.0 - lr * (-2.0) / (2.0 + eps), rel=1e-12)


def test_adam_two_steps_match_reference_loop():
    rng = np.random.default_rng(12)
    params = random_params([2, 3], seed=13)
    ref_w = params.weights[0].copy()
    ref_b = params.biases[0].copy()
    state = init_adam(params)
    lr, b1, b2, eps = 2e-3, 0.9, 0.999, 1e-8
    mw = np.zeros_like(ref_w)
    vw = np.zeros_like(ref_w)
    mb = np.zeros_like(ref_b)
    vb = np.zeros_like(ref_b)
    for t in range(1, 3):
        gw = rng.normal(size=ref_w.shape)
        gb = rng.normal(size=ref_b.shape)
        grads = MlpParams(weights=[gw.copy()], biases=[gb.copy()])
        adam_step(params, grads, state, lr=lr, beta1=b1, beta2=b2, eps=eps)
        mw = b1 * mw + (1 - b1) * gw
        vw = b2 * vw + (1 - b2) * gw**2
        mb = b1 * mb + (1 - b1) * gb
        vb = b2 * vb + (1 - b2) * gb**2
        ref_w -= lr * (mw / (1 - b1**t)) / (np.sqrt(vw / (1 - b2**t)) + eps)
        ref_b -= lr * (mb / (1 - b1**t)) / (np.sqrt(vb / (1 - b2**t)) + eps)
    assert np.allclose(params.weights[0], ref_w, atol=1e-15)
    assert np.allclose(params.biases[0], ref_b, atol=1e-15)


def test_adam_descends_quadratic():
    # minimize (w x - y)^2 for a 1x1 net: Adam should reach the solution
    params = MlpParams(weights=[np.array([[0.0]])], biases=[np.array([0.0])])
    state = init_adam(params)
    for _ in range(4000):
        _, grads = mse_loss_and_grad(params, np.array([1.0]), 0, 3.0)
        adam_step(params, grads, state, lr=1e-2)
    loss, _ = mse_loss_and_grad(params, np.array([1.0]), 0, 3.0)
    assert loss < 1e-6


def test_training_run_determinism():
    def run():
        rng = np.random.default_rng(99)
        params = init_params([4, 8, 3], rng)
        state = init_adam(params)
        data = np.random.default_rng(7).normal(size=(16, 4))
        for i in range(50):
            _, grads = mse_loss_and_grad(
                params, data, np.arange(16) % 3, np.linspace(-1, 1, 16)
            )
            adam_step(params, grads, state)
        return params

    a, b = run(), run()
    for x, y in zip(a.weights + a.biases, b.weights + b.biases):
        assert np.array_equal(x, y)


# ----------------------------------------------------------------------
# checkpoints


def test_checkpoint_round_trip_bit_exact(tmp_path):
    params = random_params([67, 128, 128, 64], seed=21)
    path = tmp_path / "policy.bin"
    save_params(path, params)
    loaded = load_params(path)
    assert loaded.layer_sizes == params.layer_sizes
    for a, b in zip(params.weights + params.biases, loaded.weights + loaded.biases):
        assert np.array_equal(a, b)


def test_checkpoint_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOTMYFMT" + b"\x00" * 32)
    with pytest.raises(ConfigError):
        load_params(path)


def test_checkpoint_rejects_bad_version(tmp_path):
    params = random_params([2, 2], seed=1)
    path = tmp_path / "v9.bin"
    save_params(path, params)
    raw = bytearray(path.read_bytes())
    raw[8:12] = struct.pack("<I", 9)
    path.write_bytes(bytes(raw))
    with pytest.raises(ConfigError):
        load_params(path)


def test_checkpoint_rejects_trailing_bytes(tmp_path):
    params = random_params([2, 2], seed=1)
    path = tmp_path / "long.bin"
    save_params(path, params)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(ConfigError):
        load_params(path)
