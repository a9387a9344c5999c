import unittest

import numpy as np

from auxstate.core import ConfigError, RngStream, TransitionRecord
from auxstate.learn.approximators import (
    LinearQ,
    RecurrentQ,
    WindowBatch,
    conv_q,
    dtype_for,
    mlp_forward_backward,
    mlp_q,
    pool_map,
    stack_windows,
)
from auxstate.learn.layers import Conv2D, Dense, Relu, Sequential

STEP = 1e-5


def _relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1e-5, abs(analytic), abs(numeric))


def _check_gradients(test, params, grads, loss, rng, coords=12):
    """Central differences on a random subset of coordinates of every parameter."""
    for name, value in params.items():
        flat = value.reshape(-1)
        picks = rng.choice(flat.size, size=min(coords, flat.size), replace=False)
        for i in picks:
            original = flat[i]
            flat[i] = original + STEP
            up = loss()
            flat[i] = original - STEP
            down = loss()
            flat[i] = original
            numeric = (up - down) / (2 * STEP)
            analytic = float(grads[name].reshape(-1)[i])
            test.assertLess(_relative_error(analytic, numeric), 1e-4, f"{name}[{i}]")


def _batch_loss(qf, X, actions, targets):
    q = qf.batch_q(X)
    picked = q[np.arange(len(actions)), actions]
    return 0.5 * float(np.mean((picked - targets) ** 2))


class LinearQTests(unittest.TestCase):
    def test_starts_at_zero(self):
        qf = LinearQ(4, 3)
        self.assertEqual(qf.theta.shape, (3, 4))
        np.testing.assert_array_equal(qf.q_values(np.ones(4)), np.zeros(3))

    def test_gradient(self):
        rng = RngStream(0, ("grad",))
        qf = LinearQ(4, 3)
        qf.params["theta"][...] = rng.uniform(-1, 1, (3, 4))
        X = rng.uniform(-1, 1, (5, 4))
        actions = np.array([0, 1, 2, 1, 0])
        targets = rng.uniform(-1, 1, 5)
        _, grads = qf.loss_gradients(X, actions, targets)
        _check_gradients(self, qf.params, grads, lambda: _batch_loss(qf, X, actions, targets), rng)


class MlpTests(unittest.TestCase):
    def test_zero_network_outputs_zero(self):
        qf = mlp_q(4, 3, 8, RngStream(0))
        for value in qf.params.values():
            value[...] = 0.0
        np.testing.assert_array_equal(qf.q_values(np.ones(4)), np.zeros(3))

    def test_gradients_at_random_points(self):
        rng = RngStream(1, ("grad",))
        for point in range(10):
            qf = mlp_q(4, 3, 6, RngStream(point, ("init",)))
            X = rng.uniform(-1, 1, (5, 4))
            actions = rng.integers(3, size=5)
            targets = rng.uniform(-1, 1, 5)
            _, grads = qf.loss_gradients(X, actions, targets)
            _check_gradients(self, qf.params, grads, lambda: _batch_loss(qf, X, actions, targets), rng)

    def test_single_sample_helper(self):
        qf = mlp_q(4, 3, 6, RngStream(2))
        x = np.array([0.5, -0.2, 0.1, 0.9])
        q, grads = mlp_forward_backward(qf, x, 1, 0.3)
        np.testing.assert_allclose(q, qf.q_values(x))
        self.assertEqual(set(grads), set(qf.params))

    def test_target_equal_to_estimate_gives_zero_gradient(self):
        qf = mlp_q(4, 3, 6, RngStream(3))
        x = np.array([0.1, 0.2, 0.3, 0.4])
        q = qf.q_values(x)
        _, grads = mlp_forward_backward(qf, x, 2, float(q[2]))
        for value in grads.values():
            np.testing.assert_array_equal(value, np.zeros_like(value))


class ConvTests(unittest.TestCase):
    def test_conv_layer_gradients(self):
        rng = RngStream(4, ("grad",))
        layer = Conv2D(2, 3, 3, RngStream(4))
        layer.params["b"][...] = rng.uniform(-0.5, 0.5, 3)
        x = rng.uniform(-1, 1, (2, 6, 6, 2))
        weights = rng.uniform(-1, 1, (2, 4, 4, 3))

        def loss():
            y, _ = layer.forward(x)
            return float(np.sum(y * weights))

        y, cache = layer.forward(x)
        self.assertEqual(y.shape, (2, 4, 4, 3))
        dx, grads = layer.backward(weights, cache)
        _check_gradients(self, layer.params, grads, loss, rng)
        _check_gradients(self, {"x": x}, {"x": dx}, loss, rng, coords=20)

    def test_conv_network_gradients(self):
        rng = RngStream(5, ("grad",))
        qf = conv_q(17, 2, 4, 3, RngStream(5))
        X = rng.uniform(0, 1, (2, 17 * 17 * 2))
        actions = np.array([0, 3])
        targets = np.array([0.5, -0.5])
        _, grads = qf.loss_gradients(X, actions, targets)
        _check_gradients(self, qf.params, grads, lambda: _batch_loss(qf, X, actions, targets), rng, coords=6)

    def test_small_map_rejected(self):
        with self.assertRaises(ConfigError):
            conv_q(12, 2, 4, 3, RngStream(0))


class PoolTests(unittest.TestCase):
    def test_pool_averages_blocks(self):
        grid = np.arange(16, dtype=np.float64).reshape(4, 4, 1)
        pooled = pool_map(grid.ravel(), 4, 1, 2)
        np.testing.assert_allclose(pooled, [2.5, 4.5, 10.5, 12.5])

    def test_pool_pads_ragged_edge(self):
        pooled = pool_map(np.ones(3 * 3 * 2), 3, 2, 2)
        self.assertEqual(pooled.shape, (2 * 2 * 2,))
        self.assertAlmostEqual(pooled[-1], 0.25)


class DtypeTests(unittest.TestCase):
    def test_widths(self):
        self.assertIs(dtype_for(32), np.float32)
        self.assertIs(dtype_for(64), np.float64)
        with self.assertRaises(ConfigError):
            dtype_for(16)

    def test_single_precision_network(self):
        qf = mlp_q(4, 3, 6, RngStream(0), dtype=np.float32)
        self.assertEqual(qf.q_values(np.ones(4)).dtype, np.float32)


def _window_batch(rng, steps, n_windows, n_inputs, hidden):
    return WindowBatch(
        inputs=rng.uniform(-1, 1, (steps + 1, n_windows, n_inputs)),
        h0=rng.uniform(-0.5, 0.5, (n_windows, hidden)),
        c0=rng.uniform(-0.5, 0.5, (n_windows, hidden)),
        actions=rng.integers(2, size=(steps, n_windows)),
        next_actions=rng.integers(2, size=(steps, n_windows)),
        rewards=rng.uniform(-1, 1, (steps, n_windows)),
        terminals=np.zeros((steps, n_windows)),
        mask=np.ones((steps, n_windows)),
    )


class RecurrentTests(unittest.TestCase):
    def test_unrolled_gradients(self):
        rng = RngStream(6, ("grad",))
        for point in range(3):
            net = RecurrentQ(3, 2, 4, RngStream(point, ("init",)))
            batch = _window_batch(rng, 3, 2, 3, 4)
            targets = rng.uniform(-1, 1, (3, 2))
            _, grads, _ = net.window_gradients(batch, 0.9, targets)
            _check_gradients(self, net.params, grads,
                             lambda: net.window_gradients(batch, 0.9, targets)[0], rng)

    def test_encoder_gradients(self):
        rng = RngStream(7, ("grad",))
        encoder = Sequential([Dense(3, 5, RngStream(7)), Relu()], prefix="enc.")
        net = RecurrentQ(3, 2, 4, RngStream(8), encoder=encoder, encoded_dim=5)
        batch = _window_batch(rng, 3, 2, 3, 4)
        targets = rng.uniform(-1, 1, (3, 2))
        _, grads, _ = net.window_gradients(batch, 0.9, targets)
        self.assertIn("enc.0.W", grads)
        _check_gradients(self, net.params, grads, lambda: net.window_gradients(batch, 0.9, targets)[0], rng)

    def test_step_matches_window_forward(self):
        net = RecurrentQ(3, 2, 4, RngStream(9))
        x0, x1 = np.array([0.1, 0.2, 0.3]), np.array([-0.3, 0.0, 0.5])
        q0, hidden = net.step(x0, net.initial_hidden())
        q1, _ = net.step(x1, hidden)
        batch = WindowBatch(np.stack([x0, x1])[:, None, :], np.zeros((1, 4)), np.zeros((1, 4)),
                            np.array([[1]]), np.array([[0]]), np.array([[0.5]]), np.zeros((1, 1)),
                            np.ones((1, 1)))
        _, _, targets = net.window_gradients(batch, 0.9)
        self.assertAlmostEqual(targets[0, 0], 0.5 + 0.9 * q1[0], places=12)
        self.assertEqual(q0.shape, (2,))

    def test_masked_steps_do_not_contribute(self):
        net = RecurrentQ(3, 2, 4, RngStream(10))
        batch = _window_batch(RngStream(10, ("batch",)), 3, 1, 3, 4)
        batch.mask[:] = 0.0
        loss, grads, _ = net.window_gradients(batch, 0.9)
        self.assertEqual(loss, 0.0)
        for value in grads.values():
            np.testing.assert_array_equal(value, np.zeros_like(value))

    def test_stack_windows_pads_and_masks(self):
        hidden = (np.zeros(4), np.ones(4))
        records = [
            TransitionRecord(np.full(3, float(t)), 1, 1.0, np.full(3, t + 1.0), 0, t == 1, hidden=hidden)
            for t in range(2)
        ]
        batch = stack_windows([records, records[:1]], 3)
        self.assertEqual(batch.inputs.shape, (4, 2, 3))
        np.testing.assert_array_equal(batch.mask[:, 0], [1.0, 1.0, 0.0])
        np.testing.assert_array_equal(batch.mask[:, 1], [1.0, 0.0, 0.0])
        np.testing.assert_array_equal(batch.inputs[2, 0], np.full(3, 2.0))
        np.testing.assert_array_equal(batch.c0[1], np.ones(4))
        self.assertEqual(batch.terminals[1, 0], 1.0)

    def test_window_longer_than_truncation_rejected(self):
        hidden = (np.zeros(2), np.zeros(2))
        records = [TransitionRecord(np.zeros(3), 0, 0.0, np.zeros(3), 0, False, hidden=hidden)] * 3
        with self.assertRaises(ConfigError):
            stack_windows([records], 2)


if __name__ == "__main__":
    unittest.main()
