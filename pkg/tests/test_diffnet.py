import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fennm import _jet_py, kernel
from fennm.diffnet import (
    DiffNet,
    NetConfig,
    dof_count,
    forward_jets,
    init_network,
    load_checkpoint,
    param_gradient,
    save_checkpoint,
)


@pytest.mark.parametrize("layers, width, dof", [(2, 20, 481), (4, 20, 1321), (3, 20, 901)])
def test_dof_count(layers, width, dof):
    # [PAPER] 481 for the two-layer, 20-neuron network
    assert dof_count(NetConfig(layers, width).sizes) == dof
    assert init_network(NetConfig(layers, width)).dof == dof


def test_init_reproducible_and_glorot():
    a = init_network(NetConfig(2, 20, seed=7))
    b = init_network(NetConfig(2, 20, seed=7))
    c = init_network(NetConfig(2, 20, seed=8))
    assert np.array_equal(a.params, b.params)
    assert not np.array_equal(a.params, c.params)
    W, bias = a.unflatten()[1]
    assert np.all(np.abs(W) <= np.sqrt(6 / 40)) and np.all(bias == 0)


def test_flatten_roundtrip():
    net = init_network(NetConfig(3, 5, seed=1))
    assert np.array_equal(DiffNet.flatten(net.unflatten()), net.params)


def test_config_validation():
    with pytest.raises(ValueError):
        NetConfig(0, 4)
    with pytest.raises(ValueError):
        NetConfig(2, 4, "relu")
    with pytest.raises(ValueError):
        DiffNet(NetConfig(2, 4), np.zeros(3))


def _numpy_net(net, x):
    # [DERIVED] independent plain-numpy forward pass
    h = x[:, None]
    layers = net.unflatten()
    act = np.tanh if net.config.activation == "tanh" else np.sin
    for W, b in layers[:-1]:
        h = act(h @ W.T + b)
    W, b = layers[-1]
    return (h @ W.T + b)[:, 0]


@pytest.mark.parametrize("act", ["tanh", "sin"])
def test_value_matches_plain_forward(act):
    net = init_network(NetConfig(3, 6, act, seed=2))
    x = np.linspace(-1, 1, 11)
    assert np.allclose(net(x), _numpy_net(net, x), atol=1e-14)


@pytest.mark.parametrize("act", ["tanh", "sin"])
def test_jets_match_finite_differences(act):
    net = init_network(NetConfig(2, 4, act, seed=5))
    x = np.linspace(-0.8, 0.8, 9)
    jets = forward_jets(net, x, 3)
    h = 1e-3
    f = lambda s: _numpy_net(net, x + s)
    d1 = (f(h) - f(-h)) / (2 * h)
    d2 = (f(h) - 2 * f(0) + f(-h)) / h**2
    d3 = (f(2 * h) - 2 * f(h) + 2 * f(-h) - f(-2 * h)) / (2 * h**3)
    assert np.allclose(jets.du, d1, rtol=1e-6, atol=1e-7)
    assert np.allclose(jets.d2u, d2, rtol=1e-5, atol=1e-6)
    assert np.allclose(jets.d3u, d3, rtol=1e-4, atol=1e-5)


def test_jet_orders_consistent():
    net = init_network(NetConfig(3, 7, seed=4))
    x = np.linspace(0, 2, 5)
    full = forward_jets(net, x, 3).data
    for r in range(3):
        assert np.allclose(forward_jets(net, x, r).data, full[: r + 1], atol=1e-15)


def test_jet_batch_order_guard():
    jets = forward_jets(init_network(NetConfig()), [0.1, 0.2], 1)
    assert jets.du.shape == (2,)
    with pytest.raises(ValueError):
        jets.d2u


@pytest.mark.parametrize("bad", [[np.nan], [[0.1, 0.2]]])
def test_invalid_points(bad):
    with pytest.raises(ValueError):
        forward_jets(init_network(NetConfig()), bad, 1)


def test_invalid_order():
    with pytest.raises(ValueError):
        forward_jets(init_network(NetConfig()), [0.0], 4)


def _fd_gradient(net, fn, h=1e-6):
    g = np.empty(net.dof)
    for i in range(net.dof):
        p = net.params.copy()
        p[i] += h
        up = fn(DiffNet(net.config, p))
        p[i] -= 2 * h
        dn = fn(DiffNet(net.config, p))
        g[i] = (up - dn) / (2 * h)
    return g


@pytest.mark.parametrize("order", [0, 1, 2, 3])
@pytest.mark.parametrize("act", ["tanh", "sin"])
def test_param_gradient_matches_central_differences(order, act):
    net = init_network(NetConfig(2, 4, act, seed=order))
    x = np.linspace(-0.7, 0.9, 6)
    w = np.linspace(0.5, 1.5, 6)

    def loss_of(n):
        d = forward_jets(n, x, order).data[order]
        return float(np.sum(w * d * d))

    def builder(jets):
        d = jets.data[order]
        seeds = np.zeros_like(jets.data)
        seeds[order] = 2 * w * d
        return float(np.sum(w * d * d)), seeds

    loss, grad = param_gradient(net, x, builder, order)
    assert abs(loss - loss_of(net)) < 1e-14
    fd = _fd_gradient(net, loss_of)
    assert np.linalg.norm(grad - fd) <= 1e-6 * np.linalg.norm(fd)


def test_param_gradient_seed_shape_checked():
    net = init_network(NetConfig(2, 4))
    with pytest.raises(ValueError):
        param_gradient(net, [0.1], lambda j: (0.0, np.zeros((5, 1))), 1)


@pytest.mark.skipif("cython" not in kernel.available_backends(), reason="compiled core not built")
@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3), st.sampled_from([0, 1]), st.integers(0, 10_000))
def test_backends_agree(order, act, seed):
    from fennm import _jet

    rng = np.random.default_rng(seed)
    sizes = (1, 5, 6, 1)
    p = rng.normal(size=dof_count(sizes))
    x = rng.uniform(-2, 2, size=13)
    a, ca = _jet_py.forward(p, sizes, act, order, x)
    b, cb = _jet.forward(p, sizes, act, order, x)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)
    seeds = rng.normal(size=a.shape)
    ga = _jet_py.backward(p, sizes, act, order, ca, seeds)
    gb = _jet.backward(p, sizes, act, order, cb, seeds)
    assert np.allclose(ga, gb, rtol=1e-12, atol=1e-12)


def test_backend_selection_reported():
    assert kernel.BACKEND in ("cython", "python")
    assert "python" in kernel.available_backends()


def test_checkpoint_roundtrip(tmp_path):
    net = init_network(NetConfig(3, 5, "sin", seed=11))
    save_checkpoint(net, tmp_path / "net.bin")
    raw = (tmp_path / "net.bin").read_bytes()
    # header then little-endian float64 parameters
    assert np.array_equal(np.frombuffer(raw[-8 * net.dof:], "<f8"), net.params)
    back = load_checkpoint(tmp_path / "net.bin")
    assert back.config == net.config
    assert np.array_equal(back.params, net.params)


def test_checkpoint_rejects_garbage(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"\0" * 64)
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "x.bin")
