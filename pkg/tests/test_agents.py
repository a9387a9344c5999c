import unittest

import numpy as np

from auxstate.core import RngStream, rng_fork
from auxstate.harness.assembly import build_agent, build_env
from auxstate.harness.config import parse_config
from auxstate.learn.agents import PlanningAgent, RecurrentAgent, SarsaAgent
from auxstate.learn.loop import EpisodeLog, run_episode


def _setup(text: str, seed: int = 0):
    config = parse_config(text)
    root = RngStream(seed, ("run",))
    env = build_env(config, root)
    return config, env, build_agent(config, env, root), rng_fork(root, "env")


def _snapshot(agent):
    return {k: v.copy() for k, v in agent.params.items()}


class EpisodeLogTests(unittest.TestCase):
    def test_returns(self):
        log = EpisodeLog([1.0, 0.0, 2.0])
        self.assertEqual(log.length, 3)
        self.assertEqual(log.total_return, 3.0)
        self.assertAlmostEqual(log.discounted_return(0.5), 1.0 + 0.25 * 2.0)


class LinearAgentTests(unittest.TestCase):
    def test_lobster_segment_is_truncated(self):
        _, env, agent, rng = _setup("env: lobster\nagent: trace\n")
        self.assertIsInstance(agent, SarsaAgent)
        log = run_episode(env, agent, 200, rng)
        self.assertEqual(log.length, 200)
        self.assertTrue(log.truncated)

    def test_learning_changes_weights(self):
        _, env, agent, rng = _setup("env: lobster\nagent: trace\n")
        before = _snapshot(agent)
        run_episode(env, agent, 200, rng)
        self.assertFalse(np.array_equal(before["theta"], agent.params["theta"]))
        self.assertEqual(agent.params["theta"].shape, (3, 11))

    def test_same_seed_same_parameters(self):
        results = []
        for _ in range(2):
            _, env, agent, rng = _setup("env: lobster\nagent: pf\n", seed=3)
            run_episode(env, agent, 200, rng)
            results.append(_snapshot(agent))
        for name in results[0]:
            np.testing.assert_array_equal(results[0][name], results[1][name])

    def test_evaluation_copy_does_not_learn(self):
        _, env, agent, rng = _setup("env: lobster\nagent: likelihood\n")
        run_episode(env, agent, 50, rng)
        before = _snapshot(agent)
        twin = agent.evaluation_copy(RngStream(9, ("eval",)))
        self.assertEqual(twin.epsilon, 0.0)
        run_episode(env, twin, 200, RngStream(9, ("eval-env",)))
        for name, value in agent.params.items():
            np.testing.assert_array_equal(value, before[name])

    def test_compass_episode_ends_at_goal_or_limit(self):
        _, env, agent, rng = _setup("env: compass9\nagent: obs-only\n")
        log = run_episode(env, agent, 1000, rng)
        self.assertLessEqual(log.length, 1000)
        if log.length < 1000:
            self.assertFalse(log.truncated)
            self.assertEqual(log.rewards[-1], 1.0)

    def test_terminal_step_returns_no_action(self):
        _, env, agent, rng = _setup("env: compass9\nagent: pf\n")
        agent.begin_episode(env.reset(rng), env)
        self.assertIsNone(agent.step(1.0, np.zeros(5), True, env))

    def test_replay_agent_on_rocksample(self):
        _, env, agent, rng = _setup("env: rocksample_7_8\nagent: pf\nlearn:\n  batch: 8\n")
        self.assertIsNotNone(agent.replay)
        before = _snapshot(agent)
        run_episode(env, agent, 40, rng)
        changed = [k for k in before if not np.array_equal(before[k], agent.params[k])]
        self.assertTrue(changed)


class RecurrentAgentTests(unittest.TestCase):
    def test_lstm_learns_after_one_batch(self):
        text = "env: lobster\nagent: lstm\nlearn:\n  batch: 4\n  hidden: 8\n  truncation: 3\n"
        _, env, agent, rng = _setup(text)
        self.assertIsInstance(agent, RecurrentAgent)
        before = _snapshot(agent)
        run_episode(env, agent, 3, rng)
        for name, value in agent.params.items():
            np.testing.assert_array_equal(value, before[name])
        run_episode(env, agent, 10, rng)
        changed = [k for k in before if not np.array_equal(before[k], agent.params[k])]
        self.assertIn("head.0.W", changed)

    def test_inputs_carry_previous_action(self):
        text = "env: lobster\nagent: lstm\nlearn:\n  hidden: 8\n"
        _, env, agent, rng = _setup(text)
        u = agent.input_for(np.zeros(9), 2)
        self.assertEqual(u.shape, (12,))
        np.testing.assert_array_equal(u[9:], [0.0, 0.0, 1.0])
        np.testing.assert_array_equal(agent.input_for(np.zeros(9), None)[9:], np.zeros(3))

    def test_action_concat_can_be_disabled(self):
        text = "env: lobster\nagent: lstm\nlearn:\n  hidden: 8\n  action_concat: false\n"
        _, env, agent, rng = _setup(text)
        self.assertEqual(agent.input_for(np.zeros(9), 2).shape, (9,))


class PlanningAgentTests(unittest.TestCase):
    def test_ground_truth_lobster_plans(self):
        _, env, agent, rng = _setup("env: lobster\nagent: ground-truth\n")
        self.assertIsInstance(agent, PlanningAgent)
        log = run_episode(env, agent, 200, rng)
        self.assertGreater(log.total_return, 0.0)
        self.assertIs(agent.evaluation_copy(rng), agent)


if __name__ == "__main__":
    unittest.main()
