import os
import tempfile
from unittest import TestCase

import numpy as np
import pandas as pd

import support  # noqa: F401
from berk_nash import solve_equilibrium
from dynamics import (
    TRAJECTORY_COLUMNS,
    BeliefGrid,
    bayes_update,
    default_support,
    draw_population,
    init_prior,
    monte_carlo,
    round_summary,
    simulate,
    write_trajectories,
)
from econometrics import paired_t_one_sided
from errors import DegenerateUpdateError, InvalidArgumentError
from model_core import AgentProfile, Technology


class TestBeliefGrid(TestCase):
    def test_default_support(self):
        support_points = default_support()
        self.assertEqual(len(support_points), 200)
        self.assertAlmostEqual(support_points[0], 0.005)
        self.assertEqual(support_points[-1], 1.0)

    def test_rejects_unnormalized_mass(self):
        points = default_support(4)
        with self.assertRaises(InvalidArgumentError):
            BeliefGrid(points, np.array([0.5, 0.5, 0.5, 0.0]))
        with self.assertRaises(InvalidArgumentError):
            BeliefGrid(points, np.array([1.5, -0.5, 0.0, 0.0]))

    def test_rejects_support_outside_unit_interval(self):
        with self.assertRaises(InvalidArgumentError):
            BeliefGrid(np.array([0.0, 0.5, 1.0]), np.full(3, 1 / 3))

    def test_moments_and_quantiles(self):
        grid = BeliefGrid(np.array([0.25, 0.5, 0.75, 1.0]), np.array([0.25, 0.25, 0.25, 0.25]))
        self.assertAlmostEqual(grid.mean(), 0.625)
        self.assertAlmostEqual(grid.variance(), 0.078125)
        self.assertEqual(grid.quantile(0.5), 0.5)
        self.assertEqual(grid.quantile(1.0), 1.0)

    def test_point_mass(self):
        grid = BeliefGrid.point_mass(0.4)
        self.assertAlmostEqual(grid.mean(), 0.4, places=12)
        self.assertAlmostEqual(grid.variance(), 0.0, places=15)


class TestInitPrior(TestCase):
    def test_uniform(self):
        prior = init_prior("uniform")
        np.testing.assert_allclose(prior.mass, 1.0 / 200)

    def test_wide_truncated_normal_is_flat(self):
        prior = init_prior("truncated_normal", 0.5, 1e6)
        self.assertLess(np.abs(prior.mass - 1.0 / 200).max(), 1e-4)

    def test_symmetric_truncated_normal(self):
        prior = init_prior("truncated_normal", 0.5, 0.1)
        self.assertAlmostEqual(prior.mean(), 0.5, delta=1e-3)
        self.assertAlmostEqual(prior.mass.sum(), 1.0, places=12)

    def test_invalid_parameters(self):
        with self.assertRaises(InvalidArgumentError):
            init_prior("truncated_normal", 0.5, 0.0)
        with self.assertRaises(InvalidArgumentError):
            init_prior("beta")


class TestBayesUpdate(TestCase):
    def test_noise_free_observation_inverts_exactly(self):
        tech = Technology(noise_sigma=0.0)
        # f(5, 1) = 5, so an observed 2.0 points at phi = 0.4
        posterior = bayes_update(init_prior("uniform"), tech, 5.0, 1.0, 2.0)
        self.assertAlmostEqual(posterior.mean(), 0.4, places=12)
        self.assertEqual(int((posterior.mass > 0).sum()), 1)

    def test_flat_likelihood_keeps_prior(self):
        prior = init_prior("truncated_normal", 0.3, 0.2)
        posterior = bayes_update(prior, Technology(noise_sigma=1e6), 5.0, 1.0, 2.0)
        self.assertLess(np.abs(posterior.mass - prior.mass).max(), 1e-6)

    def test_uniform_prior_gives_truncated_normal_posterior(self):
        posterior = bayes_update(init_prior("uniform"), Technology(noise_sigma=0.35), 5.0, 1.0, 2.0)
        self.assertAlmostEqual(posterior.mean(), 0.4, delta=1e-3)
        self.assertAlmostEqual(posterior.variance(), 0.07 ** 2, delta=2e-4)
        self.assertTrue(np.all(posterior.mass >= 0))
        self.assertAlmostEqual(posterior.mass.sum(), 1.0, places=9)

    def test_observation_without_prior_mass(self):
        prior = BeliefGrid.point_mass(0.9)
        with self.assertRaises(DegenerateUpdateError):
            bayes_update(prior, Technology(noise_sigma=0.0), 5.0, 1.0, 2.0)

    def test_zero_effort_is_uninformative(self):
        with self.assertRaises(InvalidArgumentError):
            bayes_update(init_prior("uniform"), Technology(), 5.0, 0.0, 2.0)


class TestSimulate(TestCase):
    def setUp(self):
        self.tech = Technology()

    def test_deterministic_overconfident_jumps_to_limit(self):
        agent = AgentProfile(4.0, 5.0)
        records = simulate(agent, self.tech, 0.5, init_prior("uniform"), rounds=6, mode="deterministic")
        self.assertEqual([r.round for r in records], list(range(1, 7)))
        limit = solve_equilibrium(self.tech, agent, 0.5).phi_limit
        for record in records[1:]:
            self.assertAlmostEqual(record.phi_point, limit, places=10)
        for earlier, later in zip(records, records[1:]):
            self.assertLessEqual(later.phi_point, earlier.phi_point + 1e-12)
            self.assertLessEqual(later.effort, earlier.effort + 1e-12)

    def test_deterministic_accurate_agent_learns_truth(self):
        agent = AgentProfile(5.0, 5.0)
        records = simulate(agent, self.tech, 0.5, init_prior("truncated_normal", 0.8, 0.2), rounds=4,
                           mode="deterministic")
        for record in records[1:]:
            self.assertAlmostEqual(record.phi_point, 0.5, places=10)

    def test_single_round(self):
        records = simulate(AgentProfile(4.0, 5.0), self.tech, 0.5, init_prior("uniform"), rounds=1)
        self.assertEqual(len(records), 1)
        self.assertAlmostEqual(records[0].phi_point, init_prior("uniform").mean())

    def test_stochastic_beliefs_settle_at_limit(self):
        agent = AgentProfile(4.0, 5.0)
        terminal = np.array([
            simulate(agent, self.tech, 0.5, init_prior("uniform"), rounds=500, seed=seed)[-1].phi_point
            for seed in range(200)
        ])
        self.assertLessEqual(float(np.abs(terminal - 0.4).max()), 0.02)

    def test_same_seed_same_path(self):
        agent = AgentProfile(4.0, 5.0)
        first = simulate(agent, self.tech, 0.5, init_prior("uniform"), rounds=10, seed=3)
        second = simulate(agent, self.tech, 0.5, init_prior("uniform"), rounds=10, seed=3)
        self.assertEqual(first, second)

    def test_invalid_mode_and_rounds(self):
        agent = AgentProfile(4.0, 5.0)
        with self.assertRaises(InvalidArgumentError):
            simulate(agent, self.tech, 0.5, init_prior("uniform"), rounds=3, mode="fast")
        with self.assertRaises(InvalidArgumentError):
            simulate(agent, self.tech, 0.5, init_prior("uniform"), rounds=0)


class TestMonteCarlo(TestCase):
    def setUp(self):
        self.tech = Technology()

    def test_single_agent_matches_simulate(self):
        agent = AgentProfile(4.0, 5.0, id="agent_0")
        prior = init_prior("uniform")
        frame = monte_carlo([(agent, prior)], self.tech, 0.5, rounds=5, seed=9)
        records = simulate(agent, self.tech, 0.5, prior, rounds=5, seed=9)
        self.assertEqual(list(frame.columns), TRAJECTORY_COLUMNS)
        np.testing.assert_array_equal(frame["phi_point"].to_numpy(), [r.phi_point for r in records])

    def test_same_seed_identical_panels(self):
        population = draw_population(8, seed=5)
        first = monte_carlo(population, self.tech, 0.5, rounds=5, seed=5)
        second = monte_carlo(population, self.tech, 0.5, rounds=5, seed=5)
        pd.testing.assert_frame_equal(first, second)

    def test_overconfident_beliefs_fall_on_average(self):
        population = draw_population(100, seed=1, gap_range=(0.5, 2.0), prior_mean_range=(0.4, 0.9))
        frame = monte_carlo(population, self.tech, 0.5, rounds=5, seed=1)
        summary = round_summary(frame)
        means = summary.loc[summary["classification"] == "Overconfident"].sort_values("round")["mean"]
        self.assertLess(means.iloc[-1], means.iloc[0])

    def test_underconfident_beliefs_converge(self):
        population = draw_population(100, seed=2, gap_range=(-1.0, -0.01))
        frame = monte_carlo(population, self.tech, 0.5, rounds=5, seed=2)
        summary = round_summary(frame).set_index("round")
        self.assertTrue((summary["classification"] == "Underconfident").all())
        self.assertLess(summary.loc[5, "var"], summary.loc[1, "var"])

    def test_group_predictions_over_replications(self):
        first, last = {"mean": [], "var": []}, {"mean": [], "var": []}
        for rep in range(50):
            population = draw_population(100, seed=100 + rep, gap_range=(-1.0, 2.0))
            summary = round_summary(monte_carlo(population, self.tech, 0.5, rounds=5, seed=100 + rep))
            over = summary.loc[summary["classification"] == "Overconfident"].set_index("round")
            under = summary.loc[summary["classification"] == "Underconfident"].set_index("round")
            first["mean"].append(over.loc[1, "mean"])
            last["mean"].append(over.loc[5, "mean"])
            first["var"].append(under.loc[1, "var"])
            last["var"].append(under.loc[5, "var"])
        self.assertLess(paired_t_one_sided(first["mean"], last["mean"], "less").p_value, 0.05)
        self.assertLess(paired_t_one_sided(first["var"], last["var"], "less").p_value, 0.05)


class TestPopulation(TestCase):
    def test_draw_population(self):
        population = draw_population(12, seed=4, true_ability=5.0, gap_range=(0.5, 2.0))
        self.assertEqual(len(population), 12)
        self.assertEqual(population[0][0].id, "agent_00")
        for agent, prior in population:
            self.assertEqual(agent.true_ability, 5.0)
            self.assertTrue(5.5 <= agent.believed_ability <= 7.0)
            self.assertAlmostEqual(prior.mass.sum(), 1.0, places=9)

    def test_write_trajectories(self):
        frame = monte_carlo(draw_population(2, seed=0), Technology(), 0.5, rounds=3)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_trajectories(frame, os.path.join(tmp, "nested", "trajectories.csv"))
            with open(path, "rb") as f:
                content = f.read()
        self.assertTrue(content.startswith(b"agent_id,round,"))
        self.assertNotIn(b"\r\n", content)
        self.assertEqual(content.count(b"\n"), 7)
