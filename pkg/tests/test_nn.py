import numpy as np
import pytest

from dgrl import nn


def _loss(net, x, sel, y):
    out = net.forward(x)
    k = x.shape[0]
    return float(np.mean((out[np.arange(k), sel] - y) ** 2))


def test_create_shapes_and_init_bounds():
    net = nn.Mlp.create((3, 8, 5), np.random.default_rng(0))
    assert [w.shape for w in net.weights] == [(3, 8), (8, 5)]
    assert all(np.all(b == 0.0) for b in net.biases)
    assert np.max(np.abs(net.weights[0])) <= np.sqrt(6 / 3)
    assert net.num_params == 4 * 8 + 9 * 5


def test_create_rejects_single_layer():
    with pytest.raises(nn.NetworkError):
        nn.Mlp.create((4,), np.random.default_rng(0))


def test_forward_handmade_relu():
    net = nn.Mlp((1, 2, 1),
                 [np.array([[1.0, -1.0]]), np.array([[1.0], [1.0]])],
                 [np.zeros(2), np.zeros(1)])
    # output = relu(x) + relu(-x) = |x|
    for x in (-2.0, -0.5, 0.0, 1.5):
        assert net.forward(np.array([x]))[0] == pytest.approx(abs(x))


def test_forward_batch_and_width_check():
    net = nn.Mlp.create((4, 6, 2), np.random.default_rng(1))
    out = net.forward(np.zeros((7, 4)))
    assert out.shape == (7, 2)
    with pytest.raises(nn.NetworkError):
        net.forward(np.zeros((7, 5)))


def test_mse_grad_matches_central_differences():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(10):
        net = nn.Mlp.create((3, 12, 6, 4), rng)
        x = rng.normal(size=(5, 3))
        sel = rng.integers(4, size=5)
        y = rng.normal(size=5)
        grads, loss = nn.mse_grad(net, x, sel, y)
        assert loss == pytest.approx(_loss(net, x, sel, y))
        eps = 1e-6
        for _ in range(8):
            layer = int(rng.integers(len(net.weights)))
            i = int(rng.integers(net.weights[layer].shape[0]))
            j = int(rng.integers(net.weights[layer].shape[1]))
            orig = net.weights[layer][i, j]
            net.weights[layer][i, j] = orig + eps
            lp = _loss(net, x, sel, y)
            net.weights[layer][i, j] = orig - eps
            lm = _loss(net, x, sel, y)
            net.weights[layer][i, j] = orig
            fd = (lp - lm) / (2 * eps)
            an = grads[layer][0][i, j]
            worst = max(worst, abs(fd - an) / max(1e-8, abs(fd) + abs(an)))
    assert worst <= 1e-4


def test_residual_grad_consistent_with_mse_grad():
    rng = np.random.default_rng(3)
    net = nn.Mlp.create((2, 5, 3), rng)
    x = rng.normal(size=(4, 2))
    sel = rng.integers(3, size=4)
    y = rng.normal(size=4)
    grads_a, _ = nn.mse_grad(net, x, sel, y)
    out = net.forward(x)
    residuals = out[np.arange(4), sel] - y
    grads_b = nn.residual_grad(net, x, sel, residuals)
    for (wa, ba), (wb, bb) in zip(grads_a, grads_b):
        np.testing.assert_allclose(wa, wb, atol=1e-14)
        np.testing.assert_allclose(ba, bb, atol=1e-14)


def test_adam_reduces_loss():
    rng = np.random.default_rng(4)
    net = nn.Mlp.create((2, 16, 1), rng)
    state = nn.AdamState.for_net(net, lr=1e-2)
    x = rng.normal(size=(32, 2))
    y = x[:, 0] * x[:, 1]
    sel = np.zeros(32, dtype=int)
    first = _loss(net, x, sel, y)
    for _ in range(300):
        grads, _ = nn.mse_grad(net, x, sel, y)
        nn.adam_step(net, state, grads)
    assert _loss(net, x, sel, y) < 0.1 * first


def test_adam_rejects_nonfinite_gradients():
    net = nn.Mlp.create((1, 2, 1), np.random.default_rng(0))
    state = nn.AdamState.for_net(net)
    grads = [(np.full_like(w, np.nan), np.zeros_like(b))
             for w, b in zip(net.weights, net.biases)]
    with pytest.raises(nn.NetworkError):
        nn.adam_step(net, state, grads)


def test_polyak_convex_combination():
    rng = np.random.default_rng(5)
    online = nn.Mlp.create((2, 3, 1), rng)
    target = nn.Mlp.create((2, 3, 1), rng)
    before = [w.copy() for w in target.weights]
    nn.polyak_update(target, online, 0.25)
    for wt, wb, wo in zip(target.weights, before, online.weights):
        np.testing.assert_allclose(wt, 0.75 * wb + 0.25 * wo)
    # tau = 1 copies exactly
    nn.polyak_update(target, online, 1.0)
    for wt, wo in zip(target.weights, online.weights):
        np.testing.assert_array_equal(wt, wo)


def test_polyak_architecture_mismatch():
    a = nn.Mlp.create((2, 3, 1), np.random.default_rng(0))
    b = nn.Mlp.create((2, 4, 1), np.random.default_rng(0))
    with pytest.raises(nn.NetworkError):
        nn.polyak_update(a, b, 0.5)


def test_checkpoint_roundtrip_bitexact(tmp_path):
    net = nn.Mlp.create((3, 7, 2), np.random.default_rng(6), init_seed=6)
    path = tmp_path / "net.json"
    nn.save_checkpoint(net, path)
    loaded = nn.load_checkpoint(path)
    assert loaded.layer_sizes == net.layer_sizes
    assert loaded.init_seed == 6
    for wa, wb in zip(net.weights, loaded.weights):
        np.testing.assert_array_equal(wa, wb)
    x = np.random.default_rng(7).normal(size=(4, 3))
    np.testing.assert_array_equal(net.forward(x), loaded.forward(x))


def test_checkpoint_version_check(tmp_path):
    import json
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"format_version": 99}))
    with pytest.raises(nn.NetworkError):
        nn.load_checkpoint(path)


def test_copy_is_deep():
    net = nn.Mlp.create((2, 2, 1), np.random.default_rng(8))
    dup = net.copy()
    dup.weights[0][0, 0] += 1.0
    assert net.weights[0][0, 0] != dup.weights[0][0, 0]
