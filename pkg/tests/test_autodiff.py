import numpy as np
import pytest

from helpers import random_network
from euaf.activation import EUAF, RELU
from euaf.autodiff import (
    Architecture,
    TrainConfig,
    backward,
    grad,
    init_network,
    input_grad,
    loss_gradient,
    loss_value,
    record,
    train_toy,
)

KINK_MARGIN = 1e-3


def kink_distance(net, x):
    # smallest distance of any EUAF pre-activation to a kink (a nonnegative integer)
    h = np.atleast_2d(x)
    worst = np.inf
    for i, layer in enumerate(net.layers[:-1]):
        z = h @ layer.weights.T + layer.bias
        worst = min(worst, float(np.min(np.where(z < -0.5, np.inf, np.abs(z - np.round(z))))))
        h = net.activate(i, z)
    return worst


def smooth_sample(rng):
    # a random EUAF net and a point whose pre-activations all keep clear of kinks
    while True:
        net = random_network(rng, tags=(EUAF,), max_width=5, max_depth=3)
        x = rng.uniform(-1, 1, (1, net.input_dim))
        if kink_distance(net, x) >= KINK_MARGIN:
            return net, x


def test_parameter_gradients_match_central_differences():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        net, x = smooth_sample(rng)
        upstream = rng.normal(size=(1, net.output_dim))
        theta = net.parameters()
        g = grad(net, x, upstream)
        h = 1e-7
        fd = np.empty_like(theta)
        for k in range(theta.size):
            step = np.zeros_like(theta)
            step[k] = h
            up = float(np.sum(upstream * net.with_parameters(theta + step).evaluate(x)))
            down = float(np.sum(upstream * net.with_parameters(theta - step).evaluate(x)))
            fd[k] = (up - down) / (2 * h)
        worst = max(worst, float(np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(fd)))))
    assert worst < 1e-4


def test_input_gradients_match_central_differences():
    rng = np.random.default_rng(7)
    for _ in range(50):
        net, x = smooth_sample(rng)
        g = input_grad(net, x)[0]
        h = 1e-7
        for j in range(net.input_dim):
            e = np.zeros(net.input_dim)
            e[j] = h
            fd = (net.evaluate(x + e).sum() - net.evaluate(x - e).sum()) / (2 * h)
            assert g[j] == pytest.approx(fd, rel=1e-4, abs=1e-6)


def test_right_derivative_at_a_kink():
    net = init_network(Architecture(width=1, depth=1), np.random.default_rng(0))
    net = net.with_parameters(np.array([1.0, 0.0, 1.0, 0.0]))
    # output = euaf(x); slope +1 just right of 0, -1 right of 1
    assert input_grad(net, [0.0])[0, 0] == 1.0
    assert input_grad(net, [1.0])[0, 0] == -1.0


def test_backward_returns_batch_sums():
    rng = np.random.default_rng(1)
    net = random_network(rng, input_dim=2)
    x = rng.normal(size=(6, 2))
    tape = record(net, x)
    total, _ = backward(net, tape, np.ones_like(tape.output))
    parts = sum(grad(net, row[None, :]) for row in x)
    np.testing.assert_allclose(total, parts, atol=1e-10)


def test_losses_by_hand():
    p, y = np.array([1.0, 2.0, 4.0]), np.array([1.5, 2.0, 1.0])
    assert loss_value("MSE", p, y) == pytest.approx((0.25 + 0 + 9) / 3)
    assert loss_value("MAE", p, y) == pytest.approx(3.5 / 3)
    assert loss_value("max", p, y) == pytest.approx(3.0)
    np.testing.assert_allclose(loss_gradient("MSE", p, y), [-1 / 3, 0.0, 2.0])
    np.testing.assert_allclose(loss_gradient("MAE", p, y), [-1 / 3, 0.0, 1 / 3])
    np.testing.assert_allclose(loss_gradient("MAX", p, y), [0.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        loss_value("huber", p, y)


def test_glorot_initialisation():
    net = init_network(Architecture(width=40, depth=2), np.random.default_rng(0))
    limit = np.sqrt(6.0 / 80.0)
    assert np.all(np.abs(net.layers[1].weights) <= limit)
    assert all(np.all(layer.bias == 0.0) for layer in net.layers)


@pytest.mark.parametrize("activation", [EUAF, RELU])
def test_training_halves_the_error(activation):
    res = train_toy("sin8", Architecture(activation=activation), TrainConfig(steps=2000, seed=0))
    assert not res.diverged
    assert res.final_train_mse <= 0.5 * res.initial_train_mse
    assert len(res.trace) == 21


def test_training_is_deterministic():
    cfg = TrainConfig(steps=50, seed=3, log_every=10)
    a = train_toy("osc2d", Architecture(width=8), cfg)
    b = train_toy("osc2d", Architecture(width=8), cfg)
    assert a.trace == b.trace
    assert np.array_equal(a.network.parameters(), b.network.parameters())


def test_divergence_is_flagged():
    res = train_toy("sin8", Architecture(width=8), TrainConfig(steps=200, learning_rate=1e4, seed=0))
    assert res.diverged


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        TrainConfig(decay=1.5)
    with pytest.raises(ValueError):
        Architecture(width=0)
    with pytest.raises(ValueError):
        train_toy("nope")
    assert TrainConfig(learning_rate=0.1, decay=0.5, decay_period=10).rate(25) == pytest.approx(0.025)
