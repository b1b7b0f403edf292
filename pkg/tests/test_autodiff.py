#!/usr/bin/env python3
"""
Tests for the reverse-mode tape
"""

import numpy as np
import pytest

from core import autodiff as ad
from core.autodiff import Tape, grad
from core.errors import ContractError, ShapeError


def _finite_difference(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    out = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        up, down = x.copy(), x.copy()
        up[i] += h
        down[i] -= h
        out[i] = (f(up) - f(down)) / (2 * h)
    return out


@pytest.mark.unit
class TestTape:
    """Gradients, replay and higher-order sweeps."""

    def test_square_gradient(self):
        tape = Tape()
        x = tape.variable(3.0)
        (g,) = tape.gradient(x * x, [x])
        assert g == pytest.approx(6.0)

    def test_gradient_root_must_be_scalar(self):
        tape = Tape()
        x = tape.variable(np.ones(3))
        with pytest.raises(ContractError):
            tape.gradient(x * 2.0, [x])

    def test_matmul_shape_check(self):
        tape = Tape()
        a = tape.variable(np.ones((2, 3)))
        b = tape.variable(np.ones((2, 3)))
        with pytest.raises(ShapeError):
            ad.matmul(a, b)

    def test_constants_receive_no_gradient(self):
        tape = Tape()
        x = tape.variable(1.5)
        c = tape.constant(2.0)
        y = x * c + c
        gx, gc = tape.gradient(y, [x, c])
        assert gx == pytest.approx(2.0)
        assert gc == pytest.approx(0.0)

    def test_broadcast_gradient_sums_over_rows(self):
        tape = Tape()
        x = tape.variable(np.arange(6.0).reshape(2, 3))
        b = tape.variable(np.array([1.0, -1.0, 0.5]))
        gx, gb = tape.gradient(ad.sum_(x + b), [x, b])
        np.testing.assert_allclose(gx, np.ones((2, 3)))
        np.testing.assert_allclose(gb, [2.0, 2.0, 2.0])

    def test_take_rows_accumulates_repeated_indices(self):
        tape = Tape()
        a = tape.variable(np.arange(6.0).reshape(3, 2))
        rows = ad.take_rows(a, np.array([0, 0, 2]))
        (g,) = tape.gradient(ad.sum_(rows), [a])
        np.testing.assert_allclose(g, [[2.0, 2.0], [0.0, 0.0], [1.0, 1.0]])

    def test_matches_finite_differences(self, rng):
        X = rng.normal(size=(5, 3))
        W0 = rng.normal(size=(3, 2))

        def value(W):
            return float(np.sum(np.tanh(X @ W) ** 2) + np.sum(np.log(1.0 + np.exp(X @ W))))

        tape = Tape()
        W = tape.variable(W0)
        z = ad.matmul(X, W)
        loss = ad.sum_(ad.square(ad.tanh(z))) + ad.sum_(ad.softplus(z))
        (g,) = tape.gradient(loss, [W])
        np.testing.assert_allclose(g, _finite_difference(value, W0), rtol=1e-5, atol=1e-7)

    def test_elementwise_ops_match_finite_differences(self, rng):
        x0 = rng.uniform(0.5, 2.0, size=4)

        def value(x):
            return float(np.sum(np.sqrt(x) * np.exp(-x) + np.abs(x - 1.0) / (1.0 + x)))

        tape = Tape()
        x = tape.variable(x0)
        loss = ad.sum_(ad.sqrt(x) * ad.exp(-x) + ad.abs_(x - 1.0) / (x + 1.0))
        (g,) = tape.gradient(loss, [x])
        np.testing.assert_allclose(g, _finite_difference(value, x0), rtol=1e-5, atol=1e-7)

    def test_replay_is_bit_exact(self, rng):
        tape = Tape()
        x = tape.variable(rng.normal(size=(4, 3)))
        w = tape.variable(rng.normal(size=(3, 1)))
        out = ad.mean(ad.sigmoid(ad.matmul(x, w)) * 3.0 - 1.0)
        assert out.index is not None
        replayed = tape.replay()
        assert len(replayed) == len(tape)
        for recorded, again in zip(tape.values, replayed):
            assert np.array_equal(recorded, again)

    def test_paused_tape_records_nothing(self):
        tape = Tape()
        x = tape.variable(2.0)
        before = len(tape)
        with tape.paused():
            y = x * 3.0
        assert len(tape) == before
        assert float(y.value) == 6.0

    def test_double_backprop(self):
        tape = Tape()
        x = tape.variable(3.0)
        y = x * x * x
        (g,) = tape.gradient(y, [x], create_graph=True)
        assert float(g.value) == pytest.approx(27.0)
        (h,) = tape.gradient(g, [x])
        assert h == pytest.approx(18.0)

    def test_module_level_grad(self):
        tape = Tape()
        x = tape.variable(np.array([1.0, 2.0]))
        (g,) = grad(ad.sum_(ad.square(x)), [x])
        np.testing.assert_allclose(g, [2.0, 4.0])

    def test_unrelated_variable_gets_zero(self):
        tape = Tape()
        x = tape.variable(1.0)
        z = tape.variable(np.ones(2))
        (gz,) = tape.gradient(x * 5.0, [z])
        np.testing.assert_array_equal(gz, np.zeros(2))
