import math
import os
import unittest

os.environ.setdefault("RCB_LOG_LEVEL", "WARNING")

import numpy as np

from rcbandit.bandit.model import (
    ArmBelief,
    InflationKind,
    InflationSchedule,
    MspeConfig,
    SufficientStatistics,
    cv_mspe,
    empirical_phi0,
    fit_offline,
    inflate,
    mspe_bound,
    posterior_update,
    predict_mean,
)
from rcbandit.core.errors import CovarianceError, DimensionMismatchError


def _scalar_prior() -> ArmBelief:
    return ArmBelief.isotropic([0.0], 1.0, noise_sigma=1.0)


class PosteriorUpdateTests(unittest.TestCase):
    def test_single_observation_matches_closed_form(self) -> None:
        posterior = posterior_update(_scalar_prior(), [(np.array([1.0]), 1.0)])

        self.assertAlmostEqual(posterior.mean[0], 0.5, places=12)
        self.assertAlmostEqual(posterior.covariance[0, 0], 0.5, places=12)

    def test_two_observations_matches_closed_form(self) -> None:
        posterior = posterior_update(_scalar_prior(), [(np.array([1.0]), 1.0), (np.array([1.0]), 0.0)])

        self.assertAlmostEqual(posterior.mean[0], 1 / 3, places=12)
        self.assertAlmostEqual(posterior.covariance[0, 0], 1 / 3, places=12)

    def test_empty_observations_return_the_same_belief(self) -> None:
        prior = ArmBelief.isotropic([0.1, 0.2], 0.3, noise_sigma=0.5)
        self.assertIs(posterior_update(prior, []), prior)

    def test_dimension_mismatch_raises(self) -> None:
        prior = ArmBelief.isotropic([0.0, 0.0], 1.0, noise_sigma=1.0)
        with self.assertRaises(DimensionMismatchError):
            posterior_update(prior, [(np.array([1.0, 2.0, 3.0]), 1.0)])

    def test_non_positive_definite_covariance_raises(self) -> None:
        indefinite = ArmBelief(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]), 1.0)
        with self.assertRaises(CovarianceError):
            posterior_update(indefinite, [(np.array([1.0, 0.0]), 1.0)])

    def test_asymmetric_covariance_rejected(self) -> None:
        with self.assertRaises(CovarianceError):
            ArmBelief(np.zeros(2), np.array([[1.0, 0.1], [0.0, 1.0]]), 1.0)

    def test_scalar_closed_form_over_random_instances(self) -> None:
        rng = np.random.default_rng(11)
        for _ in range(100):
            prior_mean = rng.normal()
            prior_var = rng.uniform(0.1, 2.0)
            sigma = rng.uniform(0.1, 1.5)
            xs = rng.normal(size=rng.integers(1, 6))
            ys = rng.normal(size=xs.shape[0])
            belief = ArmBelief.isotropic([prior_mean], prior_var, noise_sigma=sigma)

            posterior = posterior_update(belief, [(np.array([x]), y) for x, y in zip(xs, ys)])

            precision = 1 / prior_var + np.sum(xs**2) / sigma**2
            expected_mean = (prior_mean / prior_var + np.sum(xs * ys) / sigma**2) / precision
            self.assertTrue(math.isclose(posterior.mean[0], expected_mean, rel_tol=1e-9, abs_tol=1e-12))
            self.assertTrue(math.isclose(posterior.covariance[0, 0], 1 / precision, rel_tol=1e-9))

    def test_batch_and_sequential_updates_agree(self) -> None:
        rng = np.random.default_rng(5)
        for _ in range(100):
            d = int(rng.integers(1, 4))
            prior = ArmBelief.isotropic(rng.normal(size=d), rng.uniform(0.2, 1.0), noise_sigma=rng.uniform(0.2, 1.0))
            rows = [(rng.normal(size=d), float(rng.normal())) for _ in range(int(rng.integers(1, 8)))]

            batch = posterior_update(prior, rows)
            sequential = prior
            for row in rows:
                sequential = posterior_update(sequential, [row])

            np.testing.assert_allclose(batch.mean, sequential.mean, rtol=1e-9, atol=1e-12)
            np.testing.assert_allclose(batch.covariance, sequential.covariance, rtol=1e-9, atol=1e-12)

    def test_posterior_variance_never_exceeds_prior(self) -> None:
        rng = np.random.default_rng(3)
        prior = ArmBelief.isotropic(np.zeros(3), 0.5, noise_sigma=0.2)
        posterior = posterior_update(prior, [(rng.normal(size=3), 0.1) for _ in range(4)])
        self.assertTrue(np.all(np.linalg.eigvalsh(prior.covariance - posterior.covariance) >= -1e-12))

    def test_sufficient_statistics_match_batch_update(self) -> None:
        rng = np.random.default_rng(8)
        prior = ArmBelief.isotropic(np.zeros(2), 0.4, noise_sigma=0.3)
        rows = [(rng.normal(size=2), float(rng.normal())) for _ in range(5)]
        stats = SufficientStatistics.empty(2)
        for x, y in rows:
            stats = stats.add(x, y)

        np.testing.assert_allclose(stats.posterior(prior).mean, posterior_update(prior, rows).mean, rtol=1e-9)
        self.assertIs(stats.posterior(prior), stats.posterior(prior))


class PredictMeanTests(unittest.TestCase):
    def test_dot_product(self) -> None:
        belief = ArmBelief.isotropic([0.5, -0.2], 1.0, noise_sigma=1.0)
        self.assertAlmostEqual(predict_mean(belief, [1.0, 1.0]), 0.3, places=12)

    def test_zero_mean(self) -> None:
        belief = ArmBelief.isotropic(np.zeros(3), 1.0, noise_sigma=1.0)
        self.assertEqual(predict_mean(belief, [0.3, -4.0, 2.0]), 0.0)

    def test_composes_with_posterior(self) -> None:
        posterior = posterior_update(_scalar_prior(), [(np.array([1.0]), 1.0)])
        self.assertAlmostEqual(predict_mean(posterior, [2.0]), 1.0, places=12)

    def test_dimension_mismatch(self) -> None:
        with self.assertRaises(DimensionMismatchError):
            predict_mean(_scalar_prior(), [1.0, 2.0])


class InflationTests(unittest.TestCase):
    def test_linear_schedule_doubles_covariance(self) -> None:
        belief = ArmBelief.isotropic(np.zeros(2), 0.2, noise_sigma=1.0)
        schedule = InflationSchedule(InflationKind.LINEAR, 0.01, base_lambda=0.2)

        inflated = inflate(schedule, belief, 100)

        np.testing.assert_allclose(np.linalg.eigvalsh(inflated.covariance), [0.4, 0.4])
        self.assertAlmostEqual(schedule.lambda_at(100), 0.4)
        np.testing.assert_array_equal(inflated.mean, belief.mean)

    def test_time_zero_leaves_belief_unchanged(self) -> None:
        belief = ArmBelief.isotropic(np.zeros(2), 0.2, noise_sigma=1.0)
        for kind in InflationKind:
            self.assertIs(inflate(InflationSchedule(kind, 0.5), belief, 0), belief)

    def test_log_schedule(self) -> None:
        schedule = InflationSchedule(InflationKind.LOG, 1.0)
        self.assertAlmostEqual(schedule.scale(math.e - 1), 2.0, places=12)

    def test_schedules_are_nondecreasing(self) -> None:
        for kind in (InflationKind.LINEAR, InflationKind.SQRT, InflationKind.LOG):
            schedule = InflationSchedule(kind, 0.3)
            scales = [schedule.scale(t) for t in range(0, 200)]
            self.assertTrue(all(b >= a for a, b in zip(scales, scales[1:])))

    def test_negative_time_rejected(self) -> None:
        with self.assertRaises(ValueError):
            inflate(InflationSchedule(), _scalar_prior(), -1)


class MspeTests(unittest.TestCase):
    def test_bound_value(self) -> None:
        cfg = MspeConfig(c3=1.0, phi0=0.5, d=5, noise_sigma=0.1)
        self.assertAlmostEqual(mspe_bound(cfg, 100), 0.001, places=15)

    def test_bound_strictly_decreasing(self) -> None:
        cfg = MspeConfig(c3=1.0, phi0=0.5, d=5, noise_sigma=0.1)
        values = [mspe_bound(cfg, n) for n in range(1, 50)]
        self.assertTrue(all(b < a for a, b in zip(values, values[1:])))

    def test_zero_noise_gives_zero(self) -> None:
        cfg = MspeConfig(phi0=0.5, d=3, noise_sigma=0.0)
        self.assertEqual(mspe_bound(cfg, 7), 0.0)

    def test_zero_samples_rejected(self) -> None:
        with self.assertRaises(ValueError):
            mspe_bound(MspeConfig(), 0)

    def test_cross_validation_needs_two_rows(self) -> None:
        priors = [_scalar_prior()]
        self.assertIsNone(cv_mspe(priors, [(np.array([1.0]), 0, 1.0)]))

    def test_cross_validation_is_positive(self) -> None:
        rng = np.random.default_rng(2)
        priors = [_scalar_prior(), _scalar_prior()]
        data = [(np.array([rng.normal()]), int(rng.integers(0, 2)), float(rng.normal())) for _ in range(20)]
        estimate = cv_mspe(priors, data, folds=4, rng=np.random.default_rng(0))
        self.assertGreater(estimate, 0.0)


class FitOfflineTests(unittest.TestCase):
    def test_arm_without_data_keeps_its_belief(self) -> None:
        priors = [_scalar_prior(), ArmBelief.isotropic([0.2], 0.5, noise_sigma=1.0)]
        fitted = fit_offline(priors, [(np.array([1.0]), 0, 1.0)])
        self.assertIs(fitted[1], priors[1])

    def test_single_arm_reduces_to_posterior_update(self) -> None:
        fitted = fit_offline([_scalar_prior()], [(np.array([1.0]), 0, 1.0), (np.array([1.0]), 0, 0.0)])
        self.assertAlmostEqual(fitted[0].mean[0], 1 / 3, places=12)

    def test_empty_data_keeps_all_beliefs(self) -> None:
        priors = [_scalar_prior(), _scalar_prior()]
        fitted = fit_offline(priors, [])
        self.assertIs(fitted[0], priors[0])
        self.assertIs(fitted[1], priors[1])

    def test_unknown_arm_rejected(self) -> None:
        with self.assertRaises(IndexError):
            fit_offline([_scalar_prior()], [(np.array([1.0]), 3, 1.0)])


class EmpiricalPhi0Tests(unittest.TestCase):
    def test_identity_design(self) -> None:
        self.assertAlmostEqual(empirical_phi0(np.eye(3)), 1 / 3)

    def test_rank_deficient_design_is_floored(self) -> None:
        features = np.column_stack([np.ones(5), np.zeros(5)])
        self.assertEqual(empirical_phi0(features), 1e-6)


if __name__ == "__main__":
    unittest.main()
