import unittest

import numpy as np

from auxstate.core import ConfigError, RngStream, rng_fork
from auxstate.envs.rocksample import (
    CHECK_BASE,
    DOWN,
    LEFT,
    RIGHT,
    SAMPLE,
    UP,
    RockSampleEnv,
    RockSampleLayout,
    RockSampleMoralityModel,
    RockSampleState,
    rocksample_step,
    sensor_accuracy,
)

POSITIONS = ((2, 0), (0, 1), (3, 1), (6, 3), (2, 4), (3, 4), (5, 5), (1, 6))


def _layout() -> RockSampleLayout:
    return RockSampleLayout(rock_positions=POSITIONS).with_positions(RngStream(0))


def _state(x, y, moralities=(True,) * 8) -> RockSampleState:
    return RockSampleState(x, y, tuple(moralities), (False,) * 8, (0.5,) * 8)


class SensorTests(unittest.TestCase):
    def test_accuracy_formula(self):
        self.assertEqual(sensor_accuracy(0.0, 5.0), 1.0)
        self.assertAlmostEqual(sensor_accuracy(5.0, 5.0), 0.75)
        self.assertAlmostEqual(sensor_accuracy(10.0, 5.0), 0.625)
        self.assertAlmostEqual(sensor_accuracy(20.0, 20.0), 0.75)

    def test_binned_check_accuracy(self):
        layout = _layout()
        rng = RngStream(1, ("checks",))
        rock = 3
        state = _state(0, 3)
        distance = float(np.hypot(6 - 0, 3 - 3))
        n = 100_000
        truthful = 0
        for _ in range(n):
            nxt, _, _, _ = rocksample_step(state, CHECK_BASE + rock, rng, layout)
            truthful += nxt.readings[rock] == 1.0
        self.assertAlmostEqual(truthful / n, sensor_accuracy(distance, 5.0), delta=0.01)


class RockSampleStepTests(unittest.TestCase):
    def setUp(self):
        self.layout = _layout()
        self.rng = RngStream(2, ("test",))

    def test_exit_east_ends_episode(self):
        _, reward, _, terminal = rocksample_step(_state(6, 2), RIGHT, self.rng, self.layout)
        self.assertEqual(reward, 10.0)
        self.assertTrue(terminal)

    def test_moves_clip_at_other_borders(self):
        nxt, reward, _, terminal = rocksample_step(_state(0, 0), UP, self.rng, self.layout)
        self.assertEqual((nxt.x, nxt.y), (0, 0))
        nxt, _, _, _ = rocksample_step(_state(0, 0), LEFT, self.rng, self.layout)
        self.assertEqual((nxt.x, nxt.y), (0, 0))
        nxt, _, _, _ = rocksample_step(_state(0, 0), DOWN, self.rng, self.layout)
        self.assertEqual((nxt.x, nxt.y), (0, 1))
        self.assertFalse(terminal)

    def test_sample_good_then_bad(self):
        nxt, reward, _, _ = rocksample_step(_state(2, 0), SAMPLE, self.rng, self.layout)
        self.assertEqual(reward, 10.0)
        self.assertFalse(nxt.moralities[0])
        self.assertTrue(nxt.collected[0])
        _, again, _, _ = rocksample_step(nxt, SAMPLE, self.rng, self.layout)
        self.assertEqual(again, -10.0)

    def test_sample_off_rock_is_noop(self):
        state = _state(4, 0)
        nxt, reward, _, _ = rocksample_step(state, SAMPLE, self.rng, self.layout)
        self.assertEqual(reward, 0.0)
        self.assertEqual(nxt, state)

    def test_check_at_rock_is_perfect(self):
        bad = [True] * 8
        bad[0] = False
        for _ in range(100):
            nxt, _, obs, _ = rocksample_step(_state(2, 0, bad), CHECK_BASE, self.rng, self.layout)
            self.assertEqual(nxt.readings[0], 0.0)
            self.assertEqual(obs[14], 0.0)

    def test_observation_layout(self):
        env = RockSampleEnv(self.layout, RngStream(0))
        obs = env.reset(RngStream(3))
        self.assertEqual(obs.shape, (22,))
        self.assertEqual(obs[0], 1.0)
        self.assertEqual(obs[7 + 3], 1.0)
        np.testing.assert_array_equal(obs[14:], np.full(8, 0.5))
        self.assertEqual(env.n_actions, 13)


class RockSampleLayoutTests(unittest.TestCase):
    def test_drawn_positions_are_distinct_and_repeatable(self):
        a = RockSampleLayout().with_positions(rng_fork(RngStream(9), "layout"))
        b = RockSampleLayout().with_positions(rng_fork(RngStream(9), "layout"))
        self.assertEqual(a.rock_positions, b.rock_positions)
        self.assertEqual(len(set(a.rock_positions)), 8)

    def test_duplicate_positions_rejected(self):
        with self.assertRaises(ConfigError):
            RockSampleLayout(rock_positions=((0, 0),) * 8).with_positions(RngStream(0))

    def test_reset_draws_moralities(self):
        env = RockSampleEnv(_layout(), RngStream(0))
        rng = RngStream(4, ("env",))
        seen = set()
        for _ in range(50):
            env.reset(rng)
            seen.add(env.state.morality_index)
        self.assertGreater(len(seen), 10)


class RockSampleModelTests(unittest.TestCase):
    def test_subspace_size_and_marginals(self):
        model = RockSampleMoralityModel(_layout())
        self.assertEqual(model.n_states, 256)
        marginals = model.belief_features(model.start_distribution())
        np.testing.assert_allclose(marginals, np.full(8, 0.5))

    def test_sampling_clears_bit(self):
        layout = _layout()
        model = RockSampleMoralityModel(layout)
        env = RockSampleEnv(layout, RngStream(0))
        env.state = _state(2, 0)
        obs = env.step(SAMPLE, RngStream(0)).observation
        moved, factors = model.propagate(np.array([0b11111111]), SAMPLE, obs, RngStream(0))
        self.assertEqual(int(moved[0]), 0b11111110)
        np.testing.assert_array_equal(factors, [1.0])

    def test_check_emission(self):
        layout = _layout()
        model = RockSampleMoralityModel(layout)
        obs = np.zeros(22)
        obs[2] = 1.0
        obs[7] = 1.0
        obs[14] = 1.0
        weights = model.emission(obs, np.array([0b1, 0b0]), CHECK_BASE)
        np.testing.assert_allclose(weights, [1.0, 0.0])

    def test_state_features(self):
        env = RockSampleEnv(_layout(), RngStream(0))
        env.reset(RngStream(5))
        feats = env.state_features()
        self.assertEqual(feats.shape, (22,))
        np.testing.assert_array_equal(feats[14:], [float(m) for m in env.state.moralities])


if __name__ == "__main__":
    unittest.main()
