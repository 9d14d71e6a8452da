import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from madpl_lab.errors import DimensionMismatch, StaleCache
from madpl_lab.nets import MlpNet, Rmsprop, fd_gradient, load_nets, save_nets


def zeroed(dims, out_act):
    net = MlpNet(dims, out_act=out_act, rng=np.random.default_rng(0))
    for p in net.param_list():
        p[...] = 0.0
    return net


def test_zero_net_sigmoid_gives_half():
    net = zeroed([4, 3, 3, 2], "sigmoid")
    out, _ = net.forward(np.array([1.0, -2.0, 0.5, 3.0]))
    assert np.array_equal(out, np.full(2, 0.5))


def test_identity_single_layer_passthrough():
    net = zeroed([5, 5], "identity")
    net.weights[0][...] = np.eye(5)
    x = np.array([0.3, -1.2, 4.0, 0.0, 2.5])
    out, _ = net.forward(x)
    assert np.array_equal(out, x)


def test_forward_is_pure():
    net = MlpNet([6, 8, 8, 3], out_act="tanh", rng=np.random.default_rng(42))
    x = np.random.default_rng(1).standard_normal(6)
    a, _ = net.forward(x)
    b, _ = net.forward(x)
    assert np.array_equal(a, b)


def test_forward_rejects_wrong_width():
    net = MlpNet([6, 4, 2], rng=np.random.default_rng(0))
    with pytest.raises(DimensionMismatch):
        net.forward(np.zeros(5))


def test_batch_and_single_forward_match():
    net = MlpNet([7, 9, 9, 4], out_act="sigmoid", rng=np.random.default_rng(5))
    xs = np.random.default_rng(2).standard_normal((3, 7))
    batch, _ = net.forward(xs)
    for i in range(3):
        single, _ = net.forward(xs[i])
        assert np.allclose(single, batch[i], atol=1e-12)


@pytest.mark.parametrize("out_act", ["identity", "sigmoid", "tanh"])
def test_backward_matches_finite_differences(out_act):
    rng = np.random.default_rng(77)
    net = MlpNet([8, 16, 16, 4], out_act=out_act, rng=rng)
    net.set_flat(rng.uniform(-0.5, 0.5, size=net.n_params()))
    x = rng.standard_normal(8)
    dout = rng.standard_normal(4)

    out, cache = net.forward(x)
    grads, _ = net.backward(cache, dout)
    flat_bp = np.concatenate([g.reshape(-1) for g in grads])

    base = net.get_flat()

    def loss(theta):
        net.set_flat(theta)
        y, _ = net.forward(x)
        return float(np.dot(dout, y))

    flat_fd = fd_gradient(loss, base.copy(), h=1e-5)
    net.set_flat(base)
    denom = np.maximum(1.0, np.maximum(np.abs(flat_fd), np.abs(flat_bp)))
    assert np.max(np.abs(flat_fd - flat_bp) / denom) < 1e-4


def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(78)
    net = MlpNet([5, 12, 12, 3], out_act="sigmoid", rng=rng)
    x = rng.standard_normal(5)
    dout = rng.standard_normal(3)
    _, cache = net.forward(x)
    _, dx = net.backward(cache, dout)

    def loss(xv):
        y, _ = net.forward(xv)
        return float(np.dot(dout, y))

    fd = fd_gradient(loss, x.copy(), h=1e-5)
    assert np.allclose(dx, fd, atol=1e-6)


def test_zero_output_gradient_zeroes_everything():
    net = MlpNet([4, 6, 6, 2], out_act="sigmoid", rng=np.random.default_rng(9))
    _, cache = net.forward(np.ones(4))
    grads, dx = net.backward(cache, np.zeros(2))
    assert all(np.array_equal(g, np.zeros_like(g)) for g in grads)
    assert np.array_equal(dx, np.zeros(4))


@pytest.mark.parametrize(
    "out_act,deriv",
    [
        ("sigmoid", lambda p: p * (1.0 - p)),
        ("tanh", lambda p: 1.0 - p * p),
        ("identity", lambda p: np.ones_like(p)),
    ],
)
def test_last_bias_gradient_is_activation_derivative(out_act, deriv):
    # d(sum of outputs)/d(last bias) hand-differentiates to act'(z_last)
    net = MlpNet([2, 2, 1], out_act=out_act, rng=np.random.default_rng(3))
    out, cache = net.forward(np.array([0.7, -0.3]))
    grads, _ = net.backward(cache, np.ones(1))
    assert np.allclose(grads[-1], deriv(np.atleast_1d(out)), atol=1e-12)


def test_backward_rejects_stale_cache():
    net = MlpNet([3, 4, 2], rng=np.random.default_rng(0))
    _, cache = net.forward(np.zeros(3))
    with pytest.raises(StaleCache):
        net.backward(cache, np.zeros(5))


def test_rmsprop_zero_gradient_is_noop():
    net = MlpNet([3, 5, 2], rng=np.random.default_rng(4))
    before = net.get_flat()
    opt = Rmsprop(net.param_list(), lr=0.1)
    opt.step([np.zeros_like(p) for p in net.param_list()])
    assert np.array_equal(net.get_flat(), before)


def test_rmsprop_hand_example():
    # v = 0.99*0 + 0.01*1 = 0.01 ; p = 1 - 0.1/(sqrt(0.01)+1e-8)
    p = np.array([1.0])
    opt = Rmsprop([p], lr=0.1)
    opt.step([np.array([1.0])])
    assert np.isclose(opt.avg[0][0], 0.01, atol=1e-15)
    assert abs(p[0]) < 1e-6


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.integers(0, 2**16))
def test_rmsprop_averages_stay_nonnegative(grad_vals, seed):
    rng = np.random.default_rng(seed)
    p = rng.standard_normal(4)
    opt = Rmsprop([p], lr=1e-3)
    for _ in range(3):
        opt.step([np.array(grad_vals)])
    assert (opt.avg[0] >= 0).all()
    assert np.isfinite(p).all()


def test_init_is_seed_deterministic():
    a = MlpNet([6, 8, 3], rng=np.random.default_rng(123))
    b = MlpNet([6, 8, 3], rng=np.random.default_rng(123))
    c = MlpNet([6, 8, 3], rng=np.random.default_rng(124))
    assert np.array_equal(a.get_flat(), b.get_flat())
    assert not np.array_equal(a.get_flat(), c.get_flat())


def test_flat_roundtrip_and_copy():
    net = MlpNet([4, 7, 2], out_act="tanh", rng=np.random.default_rng(8))
    vec = net.get_flat()
    clone = net.copy()
    assert np.array_equal(clone.get_flat(), vec)
    clone.set_flat(np.zeros_like(vec))
    assert not np.array_equal(net.get_flat(), clone.get_flat())
    clone.copy_from(net)
    assert np.array_equal(net.get_flat(), clone.get_flat())
    with pytest.raises(DimensionMismatch):
        net.set_flat(np.zeros(3))


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(55)
    nets = {
        "actor": MlpNet([10, 16, 16, 5], out_act="sigmoid", rng=rng),
        "critic": MlpNet([10, 8, 8, 1], out_act="identity", rng=rng),
    }
    path = tmp_path / "ckpt.bin"
    save_nets(path, nets, meta={"stage": "test", "seed": 55})
    loaded, meta = load_nets(path)
    assert meta == {"stage": "test", "seed": 55}
    assert set(loaded) == {"actor", "critic"}
    for name in nets:
        assert loaded[name].dims == nets[name].dims
        assert loaded[name].out_act == nets[name].out_act
        assert np.array_equal(loaded[name].get_flat(), nets[name].get_flat())


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
    with pytest.raises(ValueError):
        load_nets(path)
