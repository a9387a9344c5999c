import unittest

import numpy as np

from auxstate.core import ConfigError, RngStream, rng_fork
from auxstate.envs.compass import CompassEnv
from auxstate.envs.lobster import COLLECT, LEFT, LobsterEnv, LobsterState, lobster_observation
from auxstate.envs.rocksample import CHECK_BASE, RockSampleLayout, RockSampleMoralityModel
from auxstate.oracle import exact_filter
from auxstate.particle_filter import EXHAUSTIVE, ParticleEnsemble, pf_belief, pf_init, pf_step

ROCKS = ((2, 0), (0, 1), (3, 1), (6, 3), (2, 4), (3, 4), (5, 5), (1, 6))


def _trajectory(env, steps, seed):
    rng = RngStream(seed, ("trajectory",))
    env.reset(rng)
    actions, observations = [], []
    for _ in range(steps):
        action = int(rng.integers(env.n_actions))
        result = env.step(action, rng)
        actions.append(action)
        observations.append(result.observation)
        if result.terminal:
            break
    return actions, observations


def _tv(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


class InitTests(unittest.TestCase):
    def test_lobster_particles_start_at_start_state(self):
        model = LobsterEnv().filter_model()
        pe = pf_init(model, 100, RngStream(0))
        self.assertEqual(pe.k, 100)
        self.assertTrue((pe.states == LobsterState().index).all())
        np.testing.assert_allclose(pe.weights, np.full(100, 0.01))

    def test_compass_one_particle_per_start_state(self):
        model = CompassEnv().filter_model()
        pe = pf_init(model, None, RngStream(0))
        self.assertEqual(pe.k, 195)
        self.assertEqual(len(set(pe.states.tolist())), 195)
        self.assertAlmostEqual(pe.weights.sum(), 1.0, places=12)

    def test_zero_particles_rejected(self):
        with self.assertRaises(ConfigError):
            pf_init(LobsterEnv().filter_model(), 0, RngStream(0))

    def test_unknown_propagation_rejected(self):
        with self.assertRaises(ConfigError):
            pf_init(LobsterEnv().filter_model(), 10, RngStream(0), propagation="systematic")


class StepTests(unittest.TestCase):
    def test_weights_stay_normalised(self):
        env = LobsterEnv()
        model = env.filter_model()
        rng = RngStream(1, ("pf",))
        pe = pf_init(model, 100, rng)
        for action, obs in zip(*_trajectory(env, 200, 1)):
            pe = pf_step(pe, action, obs, model, rng)
            self.assertAlmostEqual(pe.weights.sum(), 1.0, delta=1e-12)
            self.assertEqual(pe.k, 100)

    def test_depletion_resets_to_uniform(self):
        model = LobsterEnv().filter_model()
        rng = RngStream(2)
        pe = pf_init(model, 10, rng)
        impossible = lobster_observation(LobsterState(2, True, True))
        with self.assertLogs("auxstate.particle_filter", level="DEBUG"):
            pe = pf_step(pe, COLLECT, impossible, model, rng)
        self.assertEqual(pe.depletions, 1)
        np.testing.assert_array_equal(pe.weights, np.full(10, 0.1))

    def test_uninformative_emission_leaves_weights(self):
        layout = RockSampleLayout(rock_positions=ROCKS).with_positions(RngStream(0))
        model = RockSampleMoralityModel(layout)
        weights = np.array([0.1, 0.2, 0.3, 0.4])
        pe = ParticleEnsemble(np.array([0, 1, 2, 3]), weights)
        obs = np.zeros(layout.observation_dim)
        obs[0] = obs[7] = 1.0
        pe = pf_step(pe, 0, obs, model, RngStream(0))
        np.testing.assert_allclose(pe.weights, weights)

    def test_lobster_proposal_follows_observation(self):
        model = LobsterEnv().filter_model()
        start = np.full(4, LobsterState().index)
        moved, factors = model.propagate(start, LEFT, lobster_observation(LobsterState(1, True, True)), RngStream(0))
        self.assertTrue((moved == LobsterState(1, True, True).index).all())
        np.testing.assert_allclose(factors, np.full(4, 0.6))
        stayed, factors = model.propagate(start, LEFT, lobster_observation(LobsterState()), RngStream(0))
        self.assertTrue((stayed == LobsterState().index).all())
        np.testing.assert_allclose(factors, np.full(4, 0.4))

    def test_lobster_proposal_reveals_pot_state(self):
        model = LobsterEnv().filter_model()
        emptied = LobsterState(0, False, True).index
        obs = lobster_observation(LobsterState(1, True, True))
        moved, factors = model.propagate(np.array([emptied]), LEFT, obs, RngStream(0))
        self.assertEqual(int(moved[0]), LobsterState(1, True, True).index)
        self.assertAlmostEqual(float(factors[0]), 0.6 * model.params.regen_probability, places=12)

    def test_lobster_unreachable_observation_has_zero_factor(self):
        model = LobsterEnv().filter_model()
        obs = lobster_observation(LobsterState(1, False, True))
        moved, factors = model.propagate(np.array([LobsterState().index]), LEFT, obs, RngStream(0))
        self.assertEqual(float(factors[0]), 0.0)
        self.assertEqual(float(model.emission(obs, moved, LEFT)[0]), 1.0)

    def test_sampled_filter_tracks_exact_posterior(self):
        env = LobsterEnv()
        model = env.filter_model()
        distances = []
        for seed in range(30):
            actions, observations = _trajectory(env, 100, seed)
            exact = exact_filter(model, model.start_distribution(), actions, observations)
            rng = RngStream(seed, ("pf",))
            pe = pf_init(model, 1000, rng)
            for action, obs, belief in zip(actions, observations, exact):
                pe = pf_step(pe, action, obs, model, rng)
                distances.append(_tv(pf_belief(pe, model), belief))
        self.assertEqual(len(distances), 3000)
        self.assertLess(float(np.mean(distances)), 0.05)


class ExhaustiveTests(unittest.TestCase):
    def _check(self, env, seed):
        model = env.filter_model()
        actions, observations = _trajectory(env, 100, seed)
        exact = exact_filter(model, model.start_distribution(), actions, observations)
        pe = pf_init(model, None, RngStream(seed), propagation=EXHAUSTIVE)
        for action, obs, belief in zip(actions, observations, exact):
            pe = pf_step(pe, action, obs, model, RngStream(seed))
            self.assertLess(np.max(np.abs(pf_belief(pe, model) - belief)), 1e-10)

    def test_lobster_matches_exact_filter(self):
        self._check(LobsterEnv(), 4)

    def test_compass_matches_exact_filter(self):
        self._check(CompassEnv(), 5)


class BeliefTests(unittest.TestCase):
    def test_counting(self):
        model = LobsterEnv().filter_model()
        pe = ParticleEnsemble(np.array([0, 0, 1, 2]), np.full(4, 0.25))
        belief = pf_belief(pe, model)
        np.testing.assert_allclose(belief[:4], [0.5, 0.25, 0.25, 0.0])
        self.assertEqual(belief.shape, (12,))

    def test_single_particle_is_one_hot(self):
        model = LobsterEnv().filter_model()
        belief = pf_belief(ParticleEnsemble(np.array([7]), np.array([1.0])), model)
        self.assertEqual(belief[7], 1.0)
        self.assertEqual(belief.sum(), 1.0)

    def test_perfect_check_pins_marginal(self):
        layout = RockSampleLayout(rock_positions=ROCKS).with_positions(RngStream(0))
        model = RockSampleMoralityModel(layout)
        pe = pf_init(model, None, RngStream(0), propagation=EXHAUSTIVE)
        obs = np.zeros(layout.observation_dim)
        obs[6] = 1.0
        obs[7 + 3] = 1.0
        obs[14 + 3] = 1.0
        pe = pf_step(pe, CHECK_BASE + 3, obs, model, RngStream(0))
        marginals = pf_belief(pe, model, "rock-marginals")
        self.assertAlmostEqual(marginals[3], 1.0, places=12)
        self.assertAlmostEqual(marginals[0], 0.5, places=12)

    def test_unknown_form(self):
        model = LobsterEnv().filter_model()
        with self.assertRaises(ConfigError):
            pf_belief(pf_init(model, 1, RngStream(0)), model, "histogram")

    def test_compass_support_never_grows_after_collapse(self):
        env = CompassEnv()
        model = env.filter_model()
        for seed in range(5):
            rng = rng_fork(RngStream(seed), "pf")
            pe = pf_init(model, None, rng)
            collapsed = False
            for action, obs in zip(*_trajectory(env, 300, seed)):
                pe = pf_step(pe, action, obs, model, rng)
                support = int((pf_belief(pe, model) > 0).sum())
                if collapsed:
                    self.assertEqual(support, 1)
                collapsed = collapsed or support == 1


if __name__ == "__main__":
    unittest.main()
