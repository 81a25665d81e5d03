import numpy as np
import pytest

from robustirs.nn import MLP, Adam, soft_update
from robustirs.verify import finite_difference


def test_forward_shapes_and_views(rng):
    net = MLP([5, 7, 3], rng)
    out, acts = net.forward(rng.standard_normal((4, 5)))
    assert out.shape == (4, 3)
    assert len(acts) == 3
    net.params[0][0, 0] = 42.0
    assert 42.0 in net.flat


@pytest.mark.parametrize("activation", ["tanh", "relu"])
def test_backward_matches_finite_differences(rng, activation):
    net = MLP([4, 6, 5, 2], rng, activation=activation, final_scale=0.5)
    x = rng.standard_normal((3, 4))
    c = rng.standard_normal((3, 2))

    def loss(flat):
        saved = net.get_flat()
        net.set_flat(flat)
        out = float(np.sum(c * net(x)))
        net.set_flat(saved)
        return out

    _, acts = net.forward(x)
    grad, dx = net.backward(acts, c)
    fd = finite_difference(loss, net.get_flat())
    assert np.linalg.norm(grad - fd) <= 1e-6 * np.linalg.norm(fd)

    def loss_x(xf):
        return float(np.sum(c * net(xf.reshape(3, 4))))

    fdx = finite_difference(loss_x, x.ravel())
    assert np.allclose(dx.ravel(), fdx, rtol=1e-5, atol=1e-8)


def test_backward_skips_unrequested(rng):
    net = MLP([3, 4, 1], rng)
    _, acts = net.forward(np.ones((2, 3)))
    g, dx = net.backward(acts, np.ones((2, 1)), param_grads=False)
    assert g is None and dx.shape == (2, 3)
    g, dx = net.backward(acts, np.ones((2, 1)), input_grad=False)
    assert dx is None and g.shape == net.flat.shape


def test_copy_is_independent(rng):
    net = MLP([3, 4, 2], rng)
    twin = net.copy()
    twin.flat[:] = 0.0
    assert np.any(net.flat != 0.0)


def test_float32(rng):
    net = MLP([3, 4, 2], rng, dtype=np.float32)
    out = net(np.ones((1, 3)))
    assert net.flat.dtype == np.float32 and out.dtype == np.float32


def test_unknown_activation(rng):
    with pytest.raises(ValueError):
        MLP([2, 2], rng, activation="swish")


def test_adam_zero_rate_is_noop():
    flat = np.arange(5.0)
    opt = Adam(5, lr=0.0)
    opt.step(flat, np.ones(5))
    assert np.array_equal(flat, np.arange(5.0))


def test_adam_first_step_size():
    # bias-corrected first step is lr * sign(grad)
    flat = np.zeros(3)
    Adam(3, lr=0.1).step(flat, np.array([2.0, -0.5, 1e-3]))
    assert np.allclose(flat, [-0.1, 0.1, -0.1], rtol=1e-4)


def test_adam_minimizes_quadratic():
    flat = np.array([3.0, -2.0])
    opt = Adam(2, lr=0.05)
    for _ in range(2000):
        opt.step(flat, 2 * flat)
    assert np.linalg.norm(flat) < 1e-2


def test_soft_update_rules():
    online, target = np.full(3, 2.0), np.zeros(3)
    soft_update(online, target, 0.5)
    assert np.allclose(target, 1.0)
    soft_update(online, target, 0.0)
    assert np.allclose(target, 1.0)
    soft_update(online, target, 1.0)
    assert np.array_equal(target, online)
    with pytest.raises(ValueError):
        soft_update(online, target, 1.5)
    with pytest.raises(ValueError):
        soft_update(online, np.zeros(2), 0.5)
