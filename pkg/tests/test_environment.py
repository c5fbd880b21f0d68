import json
import os
import tempfile
import unittest
from pathlib import Path

os.environ.setdefault("RCB_LOG_LEVEL", "WARNING")

import numpy as np

from rcbandit.bandit.model import InflationKind
from rcbandit.core.errors import DimensionMismatchError
from rcbandit.simulation.environment import (
    CovariateSampler,
    SyntheticEnv,
    analytic_phi0,
    draw_true_params,
    make_generator,
)
from rcbandit.simulation.presets import SettingName, SettingPreset, dump_preset, make_setting, parse_setting_name


class CovariateTests(unittest.TestCase):
    def test_box_draws_stay_in_the_unit_ball(self) -> None:
        for d in (1, 3, 10):
            env = SyntheticEnv(np.zeros((2, d)), 0.05, rng=make_generator(d))
            draws = np.array([env.sample_covariate() for _ in range(2000)])
            self.assertTrue(np.all(np.linalg.norm(draws, axis=1) <= 1.0 + 1e-12))
            self.assertTrue(np.all(np.abs(draws) <= 1 / np.sqrt(d)))

    def test_sphere_draws_have_unit_norm(self) -> None:
        env = SyntheticEnv(np.zeros((2, 4)), 0.05, CovariateSampler.SPHERE, make_generator(0))
        draws = np.array([env.sample_covariate() for _ in range(200)])
        np.testing.assert_allclose(np.linalg.norm(draws, axis=1), 1.0)

    def test_analytic_phi0(self) -> None:
        self.assertAlmostEqual(analytic_phi0(CovariateSampler.BOX, 1), 1 / 3)
        self.assertAlmostEqual(analytic_phi0(CovariateSampler.SPHERE, 4), 0.25)

    def test_empirical_second_moment_matches_phi0(self) -> None:
        env = SyntheticEnv(np.zeros((1, 3)), 0.0, rng=make_generator(42))
        draws = np.array([env.sample_covariate() for _ in range(100_000)])
        lam_min = np.linalg.eigvalsh(draws.T @ draws / draws.shape[0])[0]
        self.assertLess(abs(lam_min - 1 / 9) / (1 / 9), 0.05)


class RewardTests(unittest.TestCase):
    def test_noiseless_reward_is_exact(self) -> None:
        env = SyntheticEnv(np.array([[0.2, -0.4], [0.5, 0.5]]), 0.0)
        self.assertEqual(env.realize_reward([1.0, 0.5], 0), 0.0)
        self.assertAlmostEqual(env.realize_reward([1.0, 0.5], 1), 0.75)

    def test_zero_truth_zero_noise(self) -> None:
        env = SyntheticEnv(np.zeros((3, 2)), 0.0)
        self.assertEqual(env.realize_reward([0.3, 0.3], 2), 0.0)

    def test_noisy_mean_concentrates(self) -> None:
        sigma = 0.05
        env = SyntheticEnv(np.array([[0.3, 0.1]]), sigma, rng=make_generator(5))
        x = np.array([0.5, -0.5])
        rewards = np.array([env.realize_reward(x, 0) for _ in range(100_000)])
        self.assertLess(abs(rewards.mean() - 0.1), 3 * sigma / np.sqrt(rewards.size))

    def test_optimal_arm_is_in_model_argmax(self) -> None:
        env = SyntheticEnv(np.array([[0.2, 0.0], [0.0, 0.2], [-0.3, 0.0]]), 0.0)
        self.assertEqual(env.optimal_arm([1.0, 0.1]), 0)
        self.assertEqual(env.optimal_arm([0.1, 1.0]), 1)

    def test_dimension_mismatch(self) -> None:
        env = SyntheticEnv(np.zeros((2, 3)), 0.0)
        with self.assertRaises(DimensionMismatchError):
            env.oracle_means([1.0, 2.0])


class TrueParamTests(unittest.TestCase):
    def test_zero_covariance_returns_the_mean(self) -> None:
        betas = draw_true_params([[0.1, 0.2], [0.0, -0.3]], [np.zeros((2, 2))] * 2, 7)
        np.testing.assert_array_equal(betas, [[0.1, 0.2], [0.0, -0.3]])

    def test_fixed_seed_reproduces_vectors(self) -> None:
        means = [np.zeros(3)] * 4
        covs = [0.2 * np.eye(3)] * 4
        np.testing.assert_array_equal(draw_true_params(means, covs, 11), draw_true_params(means, covs, 11))

    def test_norms_are_bounded_and_direction_kept(self) -> None:
        means = [np.full(5, 1.0)] * 20
        covs = [np.eye(5)] * 20
        clipped = draw_true_params(means, covs, 3)
        raw = draw_true_params(means, covs, 3, clip=False)

        self.assertTrue(np.all(np.linalg.norm(clipped, axis=1) <= 1.0 + 1e-12))
        for c, r in zip(clipped, raw):
            np.testing.assert_allclose(c / np.linalg.norm(c), r / np.linalg.norm(r))

    def test_unclipped_variance(self) -> None:
        betas = draw_true_params([[0.0]] * 10_000, [[[0.2]]] * 10_000, 17, clip=False)
        self.assertLess(abs(betas.var() - 0.2) / 0.2, 0.1)


class PresetTests(unittest.TestCase):
    def test_setting_one(self) -> None:
        preset = make_setting("S1")
        self.assertEqual(preset.horizon, 100_000)
        self.assertEqual(preset.arms, [2, 5, 10])
        self.assertEqual(preset.dims, [3, 5, 10])
        self.assertEqual((preset.noise_sigma, preset.epsilons, preset.prior_variances), (0.05, [0.05], [0.2]))
        self.assertEqual((preset.tau_prior, preset.rho_prior), (0.01, 0.95))

    def test_setting_two_overrides(self) -> None:
        self.assertEqual(make_setting(2).n_overrides, [10, 100, 1000])

    def test_setting_three_grids(self) -> None:
        preset = make_setting("3")
        self.assertEqual(preset.horizon, 50_000)
        self.assertEqual(preset.epsilons, [0.01, 0.03, 0.05])
        self.assertEqual(preset.prior_variances, [1 / 3, 1 / 5, 1 / 10])

    def test_setting_four_first_arm_prior(self) -> None:
        preset = make_setting(SettingName.S4)
        params = preset.variant()
        means = params.prior_means()

        np.testing.assert_array_equal(means[0], [1.0, 1.0, 1.0, 1.0, 1.0])
        self.assertTrue(all(not np.any(m) for m in means[1:]))
        self.assertEqual(preset.inflations, [InflationKind.LINEAR, InflationKind.SQRT, InflationKind.LOG])
        self.assertEqual(preset.prior_variances, [0.02, 0.04, 0.1])

    def test_variant_picks_grid_values(self) -> None:
        params = make_setting(1).variant(K=10, d=3, horizon=500)
        self.assertEqual((params.K, params.d, params.horizon, params.prior_variance), (10, 3, 500, 0.2))
        self.assertIsNone(params.n_override)

    def test_unknown_setting_rejected(self) -> None:
        with self.assertRaises(ValueError):
            parse_setting_name("S9")

    def test_dump_preset_round_trips(self) -> None:
        preset = make_setting(4)
        with tempfile.TemporaryDirectory() as tmp:
            path = dump_preset(preset, Path(tmp) / "presets" / "s4.json")
            payload = json.loads(path.read_text(encoding="utf-8"))
            self.assertEqual(payload["name"], "S4")
            self.assertEqual(SettingPreset.model_validate(payload), preset)


if __name__ == "__main__":
    unittest.main()
