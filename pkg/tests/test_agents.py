import math
import os
import unittest

os.environ.setdefault("RCB_LOG_LEVEL", "WARNING")

import numpy as np

from rcbandit.bandit.agents import UserBelief, UserPolicy, incentive_gain, recommendation_gain, user_step
from rcbandit.bandit.model import ArmBelief, InflationKind, InflationSchedule, fit_offline

X1 = np.array([1.0])


def _user(means, variance: float = 1.0, **kwargs) -> UserBelief:
    priors = [ArmBelief.isotropic([m], variance, noise_sigma=1.0) for m in means]
    return UserBelief.from_priors(priors, **kwargs)


class IncentiveGainTests(unittest.TestCase):
    def test_myopic_arm_gain_is_its_margin(self) -> None:
        self.assertAlmostEqual(incentive_gain(_user([0.3, 0.2, 0.1]), X1, 0), 0.1, places=12)

    def test_negative_gain(self) -> None:
        self.assertAlmostEqual(incentive_gain(_user([0.20, 0.25]), X1, 0), -0.05, places=12)

    def test_single_arm_is_infinite(self) -> None:
        self.assertEqual(incentive_gain(_user([0.4]), X1, 0), math.inf)

    def test_scaling_means_scales_gain(self) -> None:
        base = _user([0.1, 0.4, -0.2])
        scaled = _user([0.3, 1.2, -0.6])
        self.assertAlmostEqual(incentive_gain(scaled, X1, 0), 3 * incentive_gain(base, X1, 0), places=12)
        self.assertEqual(base.myopic_arm(X1), scaled.myopic_arm(X1))


class UserStepTests(unittest.TestCase):
    def test_positive_gain_is_followed(self) -> None:
        decision, _ = user_step(_user([0.3, 0.2]), X1, 0, 0.05, lambda arm: 1.0)
        self.assertTrue(decision.followed)
        self.assertEqual(decision.chosen, 0)

    def test_gain_below_budget_deviates_to_myopic_arm(self) -> None:
        decision, user = user_step(_user([0.19, 0.25]), X1, 0, 0.05, lambda arm: 1.0)
        self.assertFalse(decision.followed)
        self.assertEqual(decision.chosen, 1)
        self.assertEqual([s.count for s in user.stats], [0, 0])

    def test_boundary_is_inclusive(self) -> None:
        decision, _ = user_step(_user([0.20, 0.25]), X1, 0, 0.05, lambda arm: 1.0)
        self.assertTrue(decision.followed)

    def test_reward_comes_from_the_chosen_arm(self) -> None:
        calls = []

        def source(arm: int) -> float:
            calls.append(arm)
            return 0.7

        decision, user = user_step(_user([0.0, 0.5]), X1, 0, 0.05, source)
        self.assertEqual(calls, [1])
        self.assertEqual(decision.reward, 0.7)

    def test_only_followed_rounds_update_the_belief(self) -> None:
        _, user = user_step(_user([0.3, 0.2]), X1, 0, 0.05, lambda arm: 1.0)
        self.assertEqual([s.count for s in user.stats], [1, 0])

    def test_recommending_the_myopic_arm_is_always_followed(self) -> None:
        rng = np.random.default_rng(9)
        user = _user([0.1, 0.3, -0.1], variance=0.5)
        for _ in range(50):
            x = rng.uniform(-1, 1, size=1)
            decision, user = user_step(user, x, user.myopic_arm(x), 0.0, lambda arm: float(rng.normal()))
            self.assertGreaterEqual(decision.gain, 0.0)
            self.assertTrue(decision.followed)

    def test_followed_history_matches_platform_fit(self) -> None:
        rng = np.random.default_rng(13)
        priors = [ArmBelief.isotropic(np.zeros(2), 0.4, noise_sigma=0.3) for _ in range(3)]
        user = UserBelief.from_priors(priors)
        rows = []
        for _ in range(30):
            x = rng.uniform(-0.7, 0.7, size=2)
            arm = int(rng.integers(0, 3))
            y = float(rng.normal())
            user = user.observe(arm, x, y)
            rows.append((x, arm, y))

        fitted = fit_offline(priors, rows)
        for arm in range(3):
            np.testing.assert_allclose(user.belief(arm).mean, fitted[arm].mean, atol=1e-9)


class RecommendationPolicyTests(unittest.TestCase):
    def test_gain_is_weighted_by_the_recommendation_probability(self) -> None:
        gain = recommendation_gain(_user([0.0, 0.3]), X1, 0, 1 / 17)
        self.assertAlmostEqual(gain, -0.3 / 17, places=12)

    def test_certain_recommendation_matches_the_posterior_gain(self) -> None:
        user = _user([0.1, 0.4, -0.2])
        self.assertAlmostEqual(recommendation_gain(user, X1, 2, 1.0), incentive_gain(user, X1, 2), places=12)

    def test_single_arm_stays_infinite(self) -> None:
        self.assertEqual(recommendation_gain(_user([0.4]), X1, 0, 0.25), math.inf)

    def test_probability_outside_unit_interval_rejected(self) -> None:
        for probability in (0.0, -0.1, 1.5):
            with self.assertRaises(ValueError):
                recommendation_gain(_user([0.0, 0.3]), X1, 0, probability)

    def test_rare_recommendation_is_followed_where_posterior_users_deviate(self) -> None:
        user = _user([0.0, 0.3])

        posterior, _ = user_step(user, X1, 0, 0.05, lambda arm: 1.0)
        weighted, after = user_step(
            user, X1, 0, 0.05, lambda arm: 1.0, policy=UserPolicy.RECOMMENDATION, probability=0.1
        )

        self.assertFalse(posterior.followed)
        self.assertTrue(weighted.followed)
        self.assertEqual(weighted.chosen, 0)
        self.assertAlmostEqual(weighted.gain, -0.03, places=12)
        self.assertEqual([s.count for s in after.stats], [1, 0])

    def test_likely_recommendation_keeps_the_budget(self) -> None:
        decision, _ = user_step(
            _user([0.0, 0.3]), X1, 0, 0.05, lambda arm: 1.0, policy=UserPolicy.RECOMMENDATION, probability=0.9
        )
        self.assertFalse(decision.followed)
        self.assertEqual(decision.chosen, 1)

    def test_posterior_policy_ignores_the_probability(self) -> None:
        decision, _ = user_step(_user([0.0, 0.3]), X1, 0, 0.05, lambda arm: 1.0, probability=0.01)
        self.assertFalse(decision.followed)
        self.assertAlmostEqual(decision.gain, -0.3, places=12)

    def test_invalid_probability_rejected_under_recommendation_policy(self) -> None:
        with self.assertRaises(ValueError):
            user_step(_user([0.0, 0.3]), X1, 0, 0.05, lambda arm: 1.0, policy=UserPolicy.RECOMMENDATION, probability=0.0)


class RevealTests(unittest.TestCase):
    def test_unrevealed_arms_use_the_prior(self) -> None:
        user = _user([0.0, 0.0]).observe(1, X1, 5.0).reveal(frozenset({0}))
        np.testing.assert_allclose(user.means(X1), [0.0, 0.0])

        revealed = user.reveal(None)
        self.assertGreater(revealed.means(X1)[1], 0.0)

    def test_inflation_weakens_the_prior(self) -> None:
        schedule = InflationSchedule(InflationKind.LINEAR, 1.0)
        user = _user([0.0], variance=1.0, inflation=schedule).observe(0, X1, 1.0)
        self.assertAlmostEqual(user.belief(0, 0).mean[0], 0.5, places=12)
        # prior variance 2 at t=1 gives weight 2/3 to the observation
        self.assertAlmostEqual(user.belief(0, 1).mean[0], 2 / 3, places=12)


if __name__ == "__main__":
    unittest.main()
