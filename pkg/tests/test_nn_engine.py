import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leakage_lab.errors import CheckpointError, DomainError
from leakage_lab.nn_engine import (
    Dense,
    DenseNet,
    GaussianHead,
    adam_init,
    adam_step,
    backward,
    cross_entropy,
    forward,
    forward_cache,
    grad,
    init_dense,
    load_checkpoint,
    mean_cross_entropy,
    reparam_sample,
    save_checkpoint,
    softmax,
    squared_error,
)

ACTS = ("identity", "relu", "softplus")


def fd_grads(net, x, loss, h=1e-5):
    params = [p.copy() for p in net.params()]
    out = []
    for k, p in enumerate(params):
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            up = [q.copy() for q in params]
            dn = [q.copy() for q in params]
            up[k][idx] += h
            dn[k][idx] -= h
            g[idx] = (loss(forward(net.with_params(up), x))[0] - loss(forward(net.with_params(dn), x))[0]) / (2 * h)
        out.append(g)
    return out


def random_instance(rng, batch=4, max_params=200):
    """Random net and input away from ReLU kinks, where finite differences fail."""
    while True:
        depth = int(rng.integers(1, 4))
        sizes = [int(rng.integers(1, 6)) for _ in range(depth + 1)]
        acts = [str(rng.choice(ACTS)) for _ in range(depth - 1)] + ["softmax" if sizes[-1] > 1 else "identity"]
        net = init_dense(sizes, acts, seed=int(rng.integers(1 << 30)))
        if net.parameter_count > max_params:
            continue
        net = net.with_params([p if p.ndim == 2 else 0.5 * rng.standard_normal(p.shape) for p in net.params()])
        x = rng.standard_normal((batch, net.in_dim))
        _, cache = forward_cache(net, x)
        near_kink = any(
            np.any(np.abs(pre) < 1e-3) for pre, l in zip(cache.pre, net.layers) if l.activation == "relu"
        )
        if not near_kink:
            return net, x


# --- forward --------------------------------------------------------------


def test_zero_network_outputs_zero():
    net = DenseNet([Dense(np.zeros((3, 2)), np.zeros(2))])
    assert np.array_equal(forward(net, np.array([1.0, -2.0, 3.0])), np.zeros(2))


def test_softmax_equal_logits_uniform():
    net = DenseNet([Dense(np.zeros((2, 4)), np.full(4, 0.7), "softmax")])
    assert np.allclose(forward(net, np.array([3.0, 1.0])), 0.25, atol=1e-15)


def test_hand_computed_relu_net():
    w1 = np.array([[1.0, -1.0], [2.0, 0.5]])
    b1 = np.array([0.5, -0.25])
    w2 = np.array([[1.0, 2.0], [-3.0, 1.0]])
    b2 = np.array([0.0, 1.0])
    net = DenseNet([Dense(w1, b1, "relu"), Dense(w2, b2, "identity")])
    x = np.array([1.0, 2.0])
    # hidden pre-activations: [1 + 4 + 0.5, -1 + 1 - 0.25] = [5.5, -0.25] -> relu [5.5, 0]
    expected = np.array([5.5 * 1.0 + 0.0, 5.5 * 2.0 + 1.0])
    assert np.allclose(forward(net, x), expected, atol=1e-12, rtol=0)


def test_shape_mismatch_raises():
    net = init_dense((3, 2), ["identity"], seed=0)
    with pytest.raises(DomainError):
        forward(net, np.ones(4))


def test_network_structure_validation():
    with pytest.raises(DomainError):
        DenseNet([Dense(np.zeros((2, 3)), np.zeros(3)), Dense(np.zeros((2, 1)), np.zeros(1))])
    with pytest.raises(DomainError):
        DenseNet([Dense(np.zeros((2, 2)), np.zeros(2), "softmax"), Dense(np.zeros((2, 1)), np.zeros(1))])
    with pytest.raises(DomainError):
        Dense(np.zeros((2, 2)), np.zeros(2), "tanh")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=8), st.floats(-100, 100))
def test_softmax_shift_invariant(logits, c):
    x = np.array(logits)
    a, b = softmax(x), softmax(x + c)
    assert np.allclose(a, b, atol=1e-12, rtol=0)
    assert abs(a.sum() - 1) <= 1e-9


def test_same_seed_same_network():
    a = init_dense((4, 3, 2), ["relu", "softmax"], seed=42)
    b = init_dense((4, 3, 2), ["relu", "softmax"], seed=42)
    assert all(np.array_equal(p, q) for p, q in zip(a.params(), b.params()))
    assert a.parameter_count == 4 * 3 + 3 + 3 * 2 + 2


def test_init_scale_is_inverse_fan_in():
    net = init_dense((400, 300), ["identity"], seed=1)
    assert np.std(net.layers[0].weight) == pytest.approx(1 / math.sqrt(400), rel=0.02)
    assert np.all(net.layers[0].bias == 0)


# --- gradients -------------------------------------------------------------


def test_constant_loss_has_zero_gradient():
    net = init_dense((3, 4, 2), ["relu", "softmax"], seed=3)
    _, grads = grad(net, np.ones((5, 3)), lambda out: (1.5, np.zeros_like(out)))
    assert all(np.all(g == 0) for g in grads)


def test_linear_least_squares_gradient():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((20, 3))
    y = rng.standard_normal((20, 1))
    net = init_dense((3, 1), ["identity"], seed=4)
    w, b = net.params()
    _, (gw, gb) = grad(net, x, lambda out: squared_error(out, y))
    resid = x @ w + b - y
    assert np.allclose(gw, 2 * x.T @ resid, rtol=1e-12)
    assert np.allclose(gb, 2 * resid.sum(axis=0), rtol=1e-12)


def test_cross_entropy_net_matches_finite_differences():
    net = init_dense((1, 4, 2), ["relu", "softmax"], seed=8)
    x = np.array([[0.3], [-1.2], [2.0]])
    labels = np.array([0, 1, 1])
    loss = lambda out: mean_cross_entropy(out, labels)  # noqa: E731
    _, grads = grad(net, x, loss)
    for a, b in zip(grads, fd_grads(net, x, loss)):
        assert np.allclose(a, b, rtol=1e-4, atol=1e-8)


@pytest.mark.parametrize("seed", range(50))
def test_random_net_gradients(seed):
    rng = np.random.default_rng(seed)
    net, x = random_instance(rng)
    if net.layers[-1].activation == "softmax":
        labels = rng.integers(0, net.out_dim, 4)
        loss = lambda out: mean_cross_entropy(out, labels)  # noqa: E731
    else:
        target = rng.standard_normal((4, net.out_dim))
        loss = lambda out: squared_error(out, target)  # noqa: E731
    _, grads = grad(net, x, loss)
    for a, b in zip(grads, fd_grads(net, x, loss)):
        scale = max(np.max(np.abs(b)), 1e-6)
        assert np.max(np.abs(a - b)) <= 1e-4 * scale + 1e-8


def test_input_gradient_matches_finite_differences():
    net = init_dense((3, 5, 2), ["softplus", "identity"], seed=6)
    x = np.array([[0.2, -0.4, 1.1]])
    target = np.array([[1.0, -1.0]])
    out, cache = forward_cache(net, x)
    _, g_out = squared_error(out, target)
    _, g_in = backward(net, cache, g_out)
    h = 1e-6
    for j in range(3):
        e = np.zeros_like(x)
        e[0, j] = h
        fd = (squared_error(forward(net, x + e), target)[0] - squared_error(forward(net, x - e), target)[0]) / (2 * h)
        assert g_in[0, j] == pytest.approx(fd, rel=1e-6)


def test_nonfinite_loss_raises():
    net = init_dense((2, 1), ["identity"], seed=0)
    with pytest.raises(FloatingPointError):
        grad(net, np.ones(2), lambda out: (math.nan, np.zeros_like(out)))


def test_dropout_only_in_training_mode():
    net = init_dense((3, 50, 2), ["relu", "identity"], seed=0, dropout=[0.5, 0.0])
    x = np.ones((4, 3))
    assert np.array_equal(forward(net, x), forward_cache(net, x)[0])
    trained, _ = forward_cache(net, x, rng=np.random.default_rng(1))
    assert not np.allclose(trained, forward(net, x))


def test_dropout_backward_uses_same_mask():
    net = init_dense((2, 6, 1), ["relu", "identity"], seed=3, dropout=[0.3, 0.0])
    x = np.array([[0.5, -0.2]])
    out, cache = forward_cache(net, x, rng=np.random.default_rng(9))
    grads, _ = backward(net, cache, np.ones_like(out))
    mask = cache.masks[0]
    hidden = cache.out[0] * mask
    assert np.allclose(grads[2], hidden.T)


# --- losses -----------------------------------------------------------------


def test_cross_entropy_values():
    assert cross_entropy(np.array([0.0, 1.0, 0.0]), 1) == 0.0
    assert cross_entropy(np.full(10, 0.1), 3) == pytest.approx(math.log(10))
    assert cross_entropy(np.array([0.25, 0.75]), 0) == pytest.approx(math.log(4))
    assert cross_entropy(np.array([1.0, 0.0]), 1) == pytest.approx(-math.log(1e-12))
    with pytest.raises(DomainError):
        cross_entropy(np.array([0.5, 0.5]), 2)


# --- reparameterization --------------------------------------------------------


def test_reparam_degenerate_cases():
    mu = np.array([1.0, -2.0])
    head = GaussianHead(mu, np.array([0.3, -0.1]))
    assert np.array_equal(reparam_sample(head, np.zeros(2)), mu)
    tiny = GaussianHead(mu, np.full(2, -40.0))
    assert np.allclose(reparam_sample(tiny, np.array([3.0, -3.0])), mu, atol=1e-12, rtol=0)


def test_reparam_moments():
    n = 100_000
    eps = np.random.default_rng(0).standard_normal(n)
    z = reparam_sample(GaussianHead(np.ones(n), np.full(n, math.log(2.0))), eps)
    assert abs(z.mean() - 1) < 4 * 2 / math.sqrt(n)
    assert abs(z.std() - 2) < 4 * 2 / math.sqrt(2 * n)


# --- Adam -------------------------------------------------------------------


def test_adam_zero_gradient_keeps_parameters():
    params = [np.array([1.0, -2.0])]
    new, state = adam_step(adam_init(params), params, [np.zeros(2)])
    assert np.array_equal(new[0], params[0]) and state.t == 1


def test_adam_first_step_size():
    params = [np.array([0.0, 0.0])]
    g = np.array([3.0, -0.5])
    new, _ = adam_step(adam_init(params, lr=1e-3), params, [g])
    assert np.allclose(new[0], -1e-3 * g / (np.abs(g) + 1e-8), rtol=1e-12)


def test_adam_is_deterministic():
    rng = np.random.default_rng(0)
    params = [rng.standard_normal((3, 2)), rng.standard_normal(2)]
    grads = [rng.standard_normal((3, 2)), rng.standard_normal(2)]
    s = adam_init(params)
    a, sa = adam_step(s, params, grads)
    b, sb = adam_step(s, params, grads)
    a, _ = adam_step(sa, a, grads)
    b, _ = adam_step(sb, b, grads)
    assert all(np.array_equal(p, q) for p, q in zip(a, b))


def test_adam_rejects_nonfinite_gradient():
    params = [np.zeros(2)]
    with pytest.raises(FloatingPointError):
        adam_step(adam_init(params), params, [np.array([1.0, math.inf])])


# --- checkpoints ------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    net = init_dense((3, 4, 2), ["relu", "softmax"], seed=5)
    path = tmp_path / "net.llnn"
    save_checkpoint(net, path)
    back = load_checkpoint(path)
    assert [l.activation for l in back.layers] == ["relu", "softmax"]
    assert all(np.array_equal(p, q) for p, q in zip(net.params(), back.params()))


def test_checkpoint_layout(tmp_path):
    net = DenseNet([Dense(np.array([[1.5, -2.0]]), np.array([0.25, 0.5]), "softplus")])
    path = tmp_path / "net.llnn"
    save_checkpoint(net, path)
    blob = path.read_bytes()
    expected = b"LLNN" + struct.pack("<IIIIB", 1, 1, 1, 2, 3) + struct.pack("<4d", 1.5, -2.0, 0.25, 0.5)
    assert blob == expected


def test_checkpoint_corruption(tmp_path):
    net = init_dense((2, 2), ["identity"], seed=0)
    path = tmp_path / "net.llnn"
    save_checkpoint(net, path)
    blob = path.read_bytes()
    for bad in (b"XXXX" + blob[4:], blob[:4] + struct.pack("<I", 2) + blob[8:], blob[:-3], blob + b"\0"):
        path.write_bytes(bad)
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
