from unittest import TestCase

import numpy as np
import pandas as pd
import statsmodels.api as sm
from scipy import stats

import support  # noqa: F401
import seeding
from econometrics import (
    chisq_cdf,
    chisq_sf,
    diff_gmm,
    f_cdf,
    f_sf,
    hausman,
    kde,
    normal_cdf,
    normal_sf,
    ols,
    paired_t_one_sided,
    random_effects,
    round_pair_ttests,
    silverman_bandwidth,
    student_t_cdf,
    student_t_sf,
    variance_target,
    within_fe,
)
from econometrics.dynamic_panel import difference_frame
from errors import (
    DegenerateTestError,
    InvalidArgumentError,
    SingularDesignError,
    UnderidentifiedError,
)


def _panel(n_subjects, rounds, slope, seed, effect_corr=0.0, trend=0.3):
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_subjects):
        effect = rng.normal()
        for t in range(1, rounds + 1):
            x = effect_corr * effect + rng.normal()
            rows.append({"subject_id": f"s{i:03d}", "round": t, "x": x, "male": i % 2,
                         "y": 1.0 + slope * x + trend * t + effect + rng.normal()})
    return pd.DataFrame(rows)


class TestDistributions(TestCase):
    def test_against_scipy(self):
        for x in (-3.1, -0.7, 0.0, 0.4, 2.5, 8.0):
            for df in (1, 2.5, 7, 30, 200):
                self.assertAlmostEqual(student_t_cdf(x, df), stats.t.cdf(x, df), delta=1e-10)
                self.assertAlmostEqual(student_t_sf(x, df), stats.t.sf(x, df), delta=1e-10)
        for x in (0.1, 1.0, 3.7, 12.0):
            for dfn, dfd in ((1, 5), (2, 40), (6, 3)):
                self.assertAlmostEqual(f_cdf(x, dfn, dfd), stats.f.cdf(x, dfn, dfd), delta=1e-10)
                self.assertAlmostEqual(f_sf(x, dfn, dfd), stats.f.sf(x, dfn, dfd), delta=1e-10)
            for df in (1, 3, 10):
                self.assertAlmostEqual(chisq_cdf(x, df), stats.chi2.cdf(x, df), delta=1e-10)
                self.assertAlmostEqual(chisq_sf(x, df), stats.chi2.sf(x, df), delta=1e-10)
        for z in (-4.0, -1.0, 0.0, 2.2):
            self.assertAlmostEqual(normal_cdf(z), stats.norm.cdf(z), delta=1e-12)
            self.assertAlmostEqual(normal_sf(z), stats.norm.sf(z), delta=1e-12)

    def test_reference_values(self):
        self.assertEqual(student_t_cdf(0.0, 3), 0.5)
        self.assertAlmostEqual(normal_cdf(1.959964), 0.975, places=6)
        self.assertEqual(chisq_cdf(0.0, 4), 0.0)

    def test_invalid_df(self):
        with self.assertRaises(InvalidArgumentError):
            student_t_cdf(1.0, 0)
        with self.assertRaises(InvalidArgumentError):
            chisq_sf(1.0, float("nan"))


class TestOls(TestCase):
    def test_two_points(self):
        result = ols([1.0, 3.0], [[0.0], [1.0]])
        self.assertAlmostEqual(result.coef("const"), 1.0)
        self.assertAlmostEqual(result.coef("x1"), 2.0)
        self.assertEqual(result.df_resid, 0)
        self.assertTrue(np.isnan(result.se("x1")))

    def test_exact_fit(self):
        X = np.array([[1.0, 2.0], [2.0, 0.5], [3.0, 1.0], [4.0, 3.0], [5.0, 2.0]])
        y = 0.5 + X @ np.array([2.0, -1.0])
        result = ols(y, X)
        np.testing.assert_allclose(result.coefficients, [0.5, 2.0, -1.0], atol=1e-10)
        self.assertAlmostEqual(result.r_squared, 1.0)

    def test_matches_statsmodels(self):
        rng = np.random.default_rng(1)
        frame = pd.DataFrame({"overconfident": rng.integers(0, 2, 150), "age": rng.integers(18, 70, 150)})
        frame["phi_hat"] = 0.6 - 0.44 * frame["overconfident"] + 0.002 * frame["age"] + rng.normal(0, 0.2, 150)
        ours = ols(frame["phi_hat"], frame[["overconfident", "age"]])
        reference = sm.OLS(frame["phi_hat"], sm.add_constant(frame[["overconfident", "age"]])).fit()
        np.testing.assert_allclose(ours.coefficients, reference.params.to_numpy(), rtol=1e-10)
        np.testing.assert_allclose(ours.std_errors, reference.bse.to_numpy(), rtol=1e-8)
        np.testing.assert_allclose(ours.p_values, reference.pvalues.to_numpy(), rtol=1e-6, atol=1e-12)
        self.assertAlmostEqual(ours.r_squared, reference.rsquared, places=10)
        self.assertAlmostEqual(ours.adj_r_squared, reference.rsquared_adj, places=10)
        self.assertEqual(ours.names, ["const", "overconfident", "age"])
        self.assertEqual(ours.dependent, "phi_hat")

    def test_residuals_orthogonal_to_regressors(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(80, 3))
        result = ols(X @ [1.0, 2.0, 3.0] + rng.normal(size=80), X)
        design = np.column_stack([np.ones(80), X])
        self.assertLess(np.abs(design.T @ result.residuals).max(), 1e-8)

    def test_rank_deficient(self):
        X = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [4.0, 8.0]])
        with self.assertRaises(SingularDesignError):
            ols([1.0, 2.0, 3.0, 5.0], X)

    def test_non_finite_input(self):
        with self.assertRaises(InvalidArgumentError):
            ols([1.0, np.nan, 3.0], [[1.0], [2.0], [3.0]])


class TestPanelEstimators(TestCase):
    def test_constant_outcome_gives_zero_slope(self):
        frame = pd.DataFrame({"subject_id": np.repeat(["a", "b", "c"], 4), "round": np.tile([1, 2, 3, 4], 3)})
        frame["score"] = frame["subject_id"].map({"a": 3.0, "b": 5.0, "c": 6.0})
        self.assertAlmostEqual(within_fe(frame, "score", ["round"]).coef("round"), 0.0, places=12)

    def test_fe_matches_dummy_regression(self):
        frame = _panel(40, 5, 1.5, seed=3, effect_corr=0.8)
        ours = within_fe(frame, "y", ["x", "round"])
        dummies = pd.get_dummies(frame["subject_id"], dtype=float)
        design = pd.concat([frame[["x", "round"]], dummies], axis=1)
        reference = sm.OLS(frame["y"], design).fit()
        self.assertAlmostEqual(ours.coef("x"), reference.params["x"], places=10)
        self.assertAlmostEqual(ours.se("x"), reference.bse["x"], places=10)
        self.assertAlmostEqual(ours.coef("round"), reference.params["round"], places=10)

    def test_fe_absorbs_subject_constant_columns(self):
        frame = _panel(30, 4, 1.0, seed=4)
        plain = within_fe(frame, "y", ["x"])
        with_male = within_fe(frame, "y", ["x", "male"])
        self.assertAlmostEqual(plain.coef("x"), with_male.coef("x"), places=12)
        self.assertEqual(with_male.notes["dropped_columns"], ["male"])

    def test_fe_drops_singletons(self):
        frame = _panel(10, 3, 1.0, seed=5)
        single = pd.DataFrame([{"subject_id": "z", "round": 1, "x": 0.0, "male": 0, "y": 2.0}])
        result = within_fe(pd.concat([frame, single], ignore_index=True), "y", ["x"])
        self.assertEqual(result.notes["dropped_singletons"], 1)
        self.assertEqual(result.n_obs, 30)

    def test_random_effects_recovers_slope(self):
        frame = _panel(200, 5, -1.5, seed=6)
        result = random_effects(frame, "y", ["x", "round"])
        self.assertEqual(result.names, ["const", "x", "round"])
        self.assertAlmostEqual(result.coef("x"), -1.5, delta=0.1)
        self.assertAlmostEqual(result.coef("round"), 0.3, delta=0.1)
        self.assertGreater(result.notes["sigma2_u"], 0.3)
        self.assertFalse(result.notes["variance_floored"])

    def test_hausman_identical_estimates(self):
        fe = within_fe(_panel(30, 4, 1.0, seed=7), "y", ["x"])
        test = hausman(fe, fe)
        self.assertEqual(test.statistic, 0.0)
        self.assertEqual(test.p_value, 1.0)
        self.assertTrue(test.used_pseudo_inverse)

    def test_hausman_rejects_correlated_effects(self):
        frame = _panel(300, 5, 2.0, seed=8, effect_corr=1.5)
        test = hausman(within_fe(frame, "y", ["x"]), random_effects(frame, "y", ["x"]))
        self.assertEqual(test.coefficients, ("x",))
        self.assertLess(test.p_value, 0.01)

    def test_round_as_time_index_and_regressor(self):
        frame = _panel(200, 5, 0.0, seed=9)
        fe = within_fe(frame, "y", ["round"])
        re = random_effects(frame, "y", ["round"])
        self.assertEqual(fe.names, ["round"])
        self.assertEqual(re.names, ["const", "round"])
        self.assertEqual(fe.n_obs, 1000)
        self.assertAlmostEqual(fe.coef("round"), 0.3, delta=0.1)
        self.assertAlmostEqual(re.coef("round"), 0.3, delta=0.1)


class TestPanelMonteCarlo(TestCase):
    REPS = 300

    def _rejections(self, effect_corr, master_seed):
        rejected = []
        for rep in range(self.REPS):
            frame = _panel(200, 2, 2.0, seeding.stream(master_seed, rep), effect_corr=effect_corr, trend=0.0)
            test = hausman(within_fe(frame, "y", ["x"]), random_effects(frame, "y", ["x"]))
            rejected.append(test.p_value < 0.05)
        return float(np.mean(rejected))

    def test_fe_finds_no_drift_without_learning(self):
        insignificant = []
        for rep in range(200):
            frame = _panel(60, 5, 1.0, seeding.stream(31, rep), trend=0.0)
            insignificant.append(within_fe(frame, "y", ["x", "round"]).pvalue("round") >= 0.05)
        self.assertGreaterEqual(np.mean(insignificant), 0.90)

    def test_hausman_size_under_random_effects(self):
        self.assertLessEqual(abs(self._rejections(0.0, 32) - 0.05), 0.03)

    def test_hausman_power_under_correlated_effects(self):
        self.assertGreater(self._rejections(0.5, 33), 0.80)


class TestHypothesis(TestCase):
    def test_identical_vectors(self):
        result = paired_t_one_sided([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        self.assertEqual(result.t_stat, 0.0)
        self.assertEqual(result.p_value, 0.5)

    def test_known_differences(self):
        result = paired_t_one_sided([0.0, 0.0, 0.0], [1.0, 2.0, 3.0], alternative="greater")
        self.assertAlmostEqual(result.mean_difference, 2.0)
        self.assertAlmostEqual(result.t_stat, 3.4641016, places=6)
        self.assertEqual(result.df, 2)
        self.assertAlmostEqual(result.p_value, 0.0371, places=4)

    def test_swapping_pairs_and_direction(self):
        rng = np.random.default_rng(9)
        before, after = rng.normal(size=20), rng.normal(size=20)
        self.assertAlmostEqual(paired_t_one_sided(before, after, "less").p_value,
                               paired_t_one_sided(after, before, "greater").p_value, places=14)

    def test_constant_nonzero_differences(self):
        with self.assertRaises(DegenerateTestError):
            paired_t_one_sided([1.0, 2.0, 3.0], [2.0, 3.0, 4.0])

    def test_format(self):
        result = paired_t_one_sided([0.5, 0.6, 0.55, 0.7], [0.45, 0.58, 0.5, 0.66])
        self.assertRegex(result.format(), r"^\(-0\.\d{3}, p-value: 0\.\d{3}\)$")

    def test_variance_target(self):
        frame = pd.DataFrame({"round": [1, 1, 2, 2], "phi_hat": [0.2, 0.6, 0.5, 0.5]})
        np.testing.assert_allclose(variance_target(frame), [0.04, 0.04, 0.0, 0.0])
        np.testing.assert_allclose(variance_target(frame, mode="abs_dev"), [0.2, 0.2, 0.0, 0.0])
        truth = variance_target(pd.DataFrame({"round": [1], "phi_hat": [0.4]}), mode="sq_dev_from_truth", truth=0.5)
        self.assertAlmostEqual(truth.iloc[0], 0.01)
        with self.assertRaises(InvalidArgumentError):
            variance_target(frame, mode="sq_dev_from_truth")

    def test_round_pair_ttests_reports_degenerate_pairs(self):
        frame = pd.DataFrame({
            "subject_id": np.repeat(["a", "b", "c"], 3),
            "round": np.tile([1, 2, 3], 3),
            "phi_hat": [0.5, 0.25, 0.625, 0.75, 0.5, 0.5, 0.25, 0.0, 0.5],
        })
        tests = round_pair_ttests(frame, "phi_hat")
        self.assertEqual(list(tests["round"]), [2, 3])
        self.assertIn("constant", tests.loc[0, "error"])
        self.assertEqual(tests.loc[1, "error"], "")
        self.assertEqual(tests.loc[1, "n"], 3)


class TestDiffGmm(TestCase):
    @classmethod
    def setUpClass(cls):
        cls.panel = support.ar_panel(3000, 6, beta=-0.02, gamma=0.34, seed=10)

    def test_recovers_dynamics(self):
        result = diff_gmm(self.panel, dep="phi_hat", instruments=("lag2_dep",))
        self.assertAlmostEqual(result.gamma, 0.34, delta=0.1)
        self.assertAlmostEqual(result.beta, -0.02, delta=0.1)
        self.assertEqual(result.n_obs, 3000 * 4)
        self.assertEqual(result.n_subjects, 3000)
        self.assertGreater(result.first_stage_f, 10.0)

    def test_exactly_identified_reproduces_iv(self):
        result = diff_gmm(self.panel, instruments=("lag2_dep",))
        self.assertIsNone(result.sargan_j)
        self.assertIsNone(result.sargan_p)
        self.assertEqual(result.sargan_df, 0)
        frame, _ = difference_frame(self.panel, "phi_hat")
        usable = frame.dropna(subset=["dy", "dy_lag", "lag2_dep"])
        n = len(usable)
        Z = np.column_stack([np.ones(n), usable["lag2_dep"]])
        X = np.column_stack([np.ones(n), usable["dy_lag"]])
        iv = np.linalg.solve(Z.T @ X, Z.T @ usable["dy"].to_numpy())
        self.assertLess(abs(result.gamma - iv[1]), 1e-10)
        self.assertLess(abs(result.beta - iv[0]), 1e-10)

    def test_overidentified_reports_sargan(self):
        result = diff_gmm(self.panel, instruments=("lag_effort", "lag2_dep"))
        self.assertEqual(result.sargan_df, 1)
        self.assertGreaterEqual(result.sargan_j, 0.0)
        self.assertTrue(0.0 <= result.sargan_p <= 1.0)
        self.assertAlmostEqual(result.gamma, 0.34, delta=0.1)
        self.assertEqual(result.instruments, ("lag_effort", "lag2_dep"))

    def test_differenced_residuals_are_negatively_correlated(self):
        result = diff_gmm(self.panel, instruments=("lag2_dep",))
        self.assertLess(result.ar1_stat, 0.0)
        self.assertLess(result.ar1_p, 0.05)
        self.assertTrue(np.isfinite(result.ar2_stat))

    def test_short_subjects_dropped(self):
        short = support.ar_panel(5, 3, beta=0.0, gamma=0.3, seed=11)
        short["subject_id"] = "short_" + short["subject_id"]
        result = diff_gmm(pd.concat([self.panel.iloc[:600], short], ignore_index=True))
        self.assertEqual(result.dropped_subjects, 5)
        self.assertEqual(result.n_subjects, 100)

    def test_underidentified(self):
        short = support.ar_panel(20, 3, beta=0.0, gamma=0.3, seed=12)
        with self.assertRaises(UnderidentifiedError) as ctx:
            diff_gmm(short)
        self.assertEqual(ctx.exception.n_obs, 0)

    def test_unknown_instrument(self):
        with self.assertRaises(InvalidArgumentError):
            diff_gmm(self.panel, instruments=("lag3_dep",))


class TestDiffGmmReplications(TestCase):
    INSTRUMENTS = ("lag_effort", "lag2_dep")

    def _replicate(self, reps, beta, gamma, master_seed):
        results = []
        for rep in range(reps):
            panel = support.ar_panel(200, 5, beta=beta, gamma=gamma,
                                     seed=seeding.stream(master_seed, rep), effect_sd=0.5)
            results.append(diff_gmm(panel, instruments=self.INSTRUMENTS))
        return results

    def assertMeanNear(self, draws, truth):
        draws = np.asarray(draws)
        mc_se = draws.std(ddof=1) / np.sqrt(len(draws))
        self.assertLessEqual(abs(draws.mean() - truth), 3.0 * mc_se)

    def test_learning_dynamics_over_replications(self):
        results = self._replicate(400, -0.02, 0.34, master_seed=41)
        self.assertMeanNear([r.gamma for r in results], 0.34)
        self.assertMeanNear([r.beta for r in results], -0.02)
        self.assertTrue(all(r.n_obs == 600 for r in results))

        sargan_rate = np.mean([r.sargan_p < 0.05 for r in results])
        self.assertLessEqual(abs(sargan_rate - 0.05), 0.03)

        pattern = np.mean([r.ar1_p < 0.05 and r.ar2_p >= 0.05 for r in results])
        self.assertGreaterEqual(pattern, 0.90)

    def test_white_noise_beliefs(self):
        results = self._replicate(200, 0.0, 0.0, master_seed=42)
        self.assertMeanNear([r.gamma for r in results], 0.0)
        quiet = np.mean([r.ar2_p >= 0.05 for r in results])
        self.assertGreaterEqual(quiet, 0.90)


class TestKde(TestCase):
    def test_integrates_to_one(self):
        values = np.random.default_rng(13).normal(0.4, 0.1, 300)
        self.assertAlmostEqual(kde(values).integral(), 1.0, delta=1e-3)

    def test_fixed_bandwidth_bump(self):
        curve = kde([2.0, 2.0, 2.0], bandwidth=0.5, grid=np.array([2.0, 2.5]))
        self.assertAlmostEqual(curve.density[0], stats.norm.pdf(0.0) / 0.5, places=12)
        self.assertAlmostEqual(curve.density[1], stats.norm.pdf(1.0) / 0.5, places=12)

    def test_standard_normal_sample(self):
        values = np.random.default_rng(14).normal(size=40000)
        grid = np.linspace(-3.0, 3.0, 121)
        curve = kde(values, grid=grid)
        self.assertLess(np.abs(curve.density - stats.norm.pdf(grid)).max(), 0.02)

    def test_silverman_rule(self):
        values = np.array([0.1, 0.2, 0.4, 0.5, 0.9])
        sd = values.std(ddof=1)
        spread = stats.iqr(values) / 1.34
        self.assertAlmostEqual(silverman_bandwidth(values), 0.9 * min(sd, spread) * 5 ** -0.2)

    def test_degenerate_inputs(self):
        with self.assertRaises(InvalidArgumentError):
            kde([1.0])
        with self.assertRaises(InvalidArgumentError):
            kde([0.3, 0.3, 0.3])
        with self.assertRaises(InvalidArgumentError):
            kde([0.1, 0.2], bandwidth=-1.0)
