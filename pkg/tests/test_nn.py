#!/usr/bin/env python3
"""
Tests for the MLP, the gradient penalty and the Adam step
"""

import numpy as np
import pytest

from core.errors import ContractError, ShapeError, TrainingDivergedError, UnsupportedActivationError
from core.nn import (
    Activation,
    AdamState,
    MlpNet,
    adam_step,
    forward,
    grad,
    grad_penalty,
    grad_penalty_param_gradient,
    parameter_count,
)


@pytest.fixture
def hand_net():
    """2-4-1 tanh net with fixed weights."""
    W1 = np.array([[0.5, -0.3, 0.8, 0.1],
                   [-0.2, 0.4, 0.6, -0.7]])
    b1 = np.array([0.1, 0.0, -0.1, 0.2])
    W2 = np.array([[1.0], [-0.5], [0.25], [0.75]])
    b2 = np.array([0.05])
    weights = np.concatenate([W1.ravel(), b1, W2.ravel(), b2])
    return MlpNet((2, 4, 1), Activation.TANH, weights), (W1, b1, W2, b2)


@pytest.mark.unit
class TestMlpNet:
    """Construction, forward passes and checkpoints."""

    def test_parameter_count(self):
        assert parameter_count([2, 4, 1]) == 17
        assert MlpNet((3, 8, 8, 1)).n_params == 3 * 8 + 8 + 8 * 8 + 8 + 8 + 1

    def test_zero_weights_give_zero_output(self):
        net = MlpNet((2, 4, 1))
        np.testing.assert_array_equal(net(np.array([[1.0, -2.0], [0.3, 0.4]])), np.zeros((2, 1)))

    def test_identity_network(self):
        net = MlpNet((1, 1), weights=np.array([1.0, 0.0]))
        np.testing.assert_allclose(net(np.array([0.7])), [0.7])
        out, _ = forward(net, [0.7])
        np.testing.assert_allclose(out, [0.7])

    def test_hand_computed_forward(self, hand_net):
        net, (W1, b1, W2, b2) = hand_net
        x = np.array([0.3, -1.1])
        expected = np.tanh(x @ W1 + b1) @ W2 + b2
        out, _ = forward(net, x)
        np.testing.assert_allclose(out, expected, rtol=1e-12)
        np.testing.assert_allclose(net(x.reshape(1, -1))[0], expected, rtol=1e-12)

    def test_forward_length_mismatch(self, hand_net):
        net, _ = hand_net
        with pytest.raises(ShapeError):
            forward(net, [1.0, 2.0, 3.0])

    def test_affine_gradients(self):
        net = MlpNet((1, 1), weights=np.array([2.0, 0.5]))
        out, tape = forward(net, [1.5])
        assert out[0] == pytest.approx(3.5)
        np.testing.assert_allclose(grad(tape, 'input'), [2.0])
        np.testing.assert_allclose(grad(tape, 'params'), [1.5, 1.0])

    def test_parameter_gradient_matches_finite_differences(self, hand_net):
        net, _ = hand_net
        x = np.array([0.4, 0.9])
        _, tape = forward(net, x)
        analytic = grad(tape, 'params')
        h = 1e-6
        numeric = np.zeros(net.n_params)
        for i in range(net.n_params):
            up, down = net.copy(), net.copy()
            up.weights[i] += h
            down.weights[i] -= h
            numeric[i] = (up(x.reshape(1, -1))[0, 0] - down(x.reshape(1, -1))[0, 0]) / (2 * h)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)

    def test_grad_rejects_unknown_selector(self, hand_net):
        net, _ = hand_net
        _, tape = forward(net, [0.0, 0.0])
        with pytest.raises(ContractError):
            grad(tape, 'outputs')

    def test_invalid_widths(self):
        with pytest.raises(ContractError):
            MlpNet((3,))
        with pytest.raises(ShapeError):
            MlpNet((2, 1), weights=np.zeros(5))

    def test_bounded_head(self, rng):
        net = MlpNet.initialize([1, 8, 1], rng, Activation.RELU, output_bound=2.0, output_scale=50.0)
        out = net(np.linspace(-100.0, 100.0, 41))
        assert np.all(np.abs(out) <= 2.0)

    def test_json_checkpoint_restores_outputs(self, rng, tmp_path):
        net = MlpNet.initialize([3, 5, 1], rng, Activation.SOFTPLUS, output_shift=1.2, input_scale=2.0)
        path = tmp_path / 'net.json'
        net.save(path)
        restored = MlpNet.load(path)
        assert np.array_equal(restored.weights, net.weights)
        x = rng.normal(size=(6, 3))
        assert np.array_equal(restored(x), net(x))


@pytest.mark.unit
class TestGradientPenalty:
    """One-Lipschitz penalty on scalar-input critics."""

    def test_unit_slope_critic_has_zero_penalty(self):
        critic = MlpNet((1, 1), Activation.TANH, np.array([1.0, 0.0]))
        assert grad_penalty(critic, [0.3, -1.2, 4.0]) == pytest.approx(0.0, abs=1e-10)

    def test_double_slope_critic_has_unit_penalty(self):
        critic = MlpNet((1, 1), Activation.TANH, np.array([2.0, 0.0]))
        assert grad_penalty(critic, 0.5) == pytest.approx(1.0, rel=1e-9)

    def test_relu_critic_is_rejected(self):
        critic = MlpNet((1, 4, 1), Activation.RELU)
        with pytest.raises(UnsupportedActivationError):
            grad_penalty(critic, 0.0)
        with pytest.raises(UnsupportedActivationError):
            grad_penalty_param_gradient(critic, np.zeros(3))

    def test_penalty_parameter_gradient(self):
        # (|w| - 1)^2 has derivative 2(|w| - 1) sign(w) in w and none in b
        critic = MlpNet((1, 1), Activation.TANH, np.array([2.0, 0.3]))
        value, g = grad_penalty_param_gradient(critic, np.array([0.1, 0.7]))
        assert value == pytest.approx(1.0, rel=1e-9)
        np.testing.assert_allclose(g, [2.0, 0.0], atol=1e-9)

    def test_hidden_layer_penalty_matches_finite_differences(self, rng):
        critic = MlpNet.initialize([1, 6, 1], rng, Activation.TANH)
        y = np.array([-0.4, 0.2, 1.1])
        _, analytic = grad_penalty_param_gradient(critic, y)
        h = 1e-6
        numeric = np.zeros(critic.n_params)
        for i in range(critic.n_params):
            up, down = critic.copy(), critic.copy()
            up.weights[i] += h
            down.weights[i] -= h
            numeric[i] = (grad_penalty(up, y) - grad_penalty(down, y)) / (2 * h)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-7)


@pytest.mark.unit
class TestAdam:
    """Bias-corrected Adam updates."""

    def test_first_step_moves_by_learning_rate(self):
        state = AdamState.create(3, lr=0.01)
        params = adam_step(state, np.zeros(3), np.array([3.0, -0.5, 1e-3]))
        np.testing.assert_allclose(params, [-0.01, 0.01, -0.01], rtol=1e-4)
        assert state.step == 1

    def test_non_finite_gradient_reports_step(self):
        state = AdamState.create(2, lr=0.01)
        params = adam_step(state, np.zeros(2), np.ones(2))
        with pytest.raises(TrainingDivergedError) as exc_info:
            adam_step(state, params, np.array([np.nan, 1.0]))
        assert exc_info.value.step == 2
        assert state.step == 1

    def test_dimension_mismatch(self):
        state = AdamState.create(2, lr=0.01)
        with pytest.raises(ShapeError):
            adam_step(state, np.zeros(3), np.zeros(3))
