"""Myopic Bayesian user simulator.

A user sees the recommendation, compares it with the best alternative under the
public information set (shared prior plus outcomes of followed recommendations),
and follows it when the expected loss is at most the incentive budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, FrozenSet, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from rcbandit.bandit.model import ArmBelief, InflationSchedule, SufficientStatistics, inflate


class UserPolicy(str, Enum):
    """How a user turns the public information set into a follow decision.

    ``posterior`` compares the shown arm with the best alternative under the
    user's current means. ``recommendation`` also conditions on the
    recommendation event: the gap is weighted by the probability that the
    platform's policy shows that arm for the covariate at hand.
    """

    POSTERIOR = "posterior"
    RECOMMENDATION = "recommendation"


@dataclass(frozen=True)
class UserDecision:
    """What the user did with one recommendation.

    Attributes:
        followed: Whether the recommended arm was taken
        chosen: Arm actually taken
        gain: Expected advantage of the recommendation over the best alternative
        reward: Realized reward of the chosen arm
    """

    followed: bool
    chosen: int
    gain: float
    reward: float


@dataclass(frozen=True)
class UserBelief:
    """Public information set shared by all users.

    Attributes:
        priors: Shared prior per arm
        inflation: Prior covariance inflation schedule
        stats: Sufficient statistics of followed rounds per arm
        revealed: Arms whose followed data users condition on; None means all arms
    """

    priors: Tuple[ArmBelief, ...]
    inflation: InflationSchedule
    stats: Tuple[SufficientStatistics, ...]
    revealed: Optional[FrozenSet[int]] = None

    @classmethod
    def from_priors(
        cls,
        priors: Sequence[ArmBelief],
        inflation: Optional[InflationSchedule] = None,
        revealed: Optional[FrozenSet[int]] = None,
    ) -> "UserBelief":
        d = priors[0].dim
        return cls(
            priors=tuple(priors),
            inflation=inflation or InflationSchedule(),
            stats=tuple(SufficientStatistics.empty(d) for _ in priors),
            revealed=revealed,
        )

    @property
    def n_arms(self) -> int:
        return len(self.priors)

    def reveal(self, arms: Optional[FrozenSet[int]]) -> "UserBelief":
        """Condition on the given arms' data (None reveals every arm)."""
        return replace(self, revealed=None if arms is None else frozenset(arms))

    def observe(self, arm: int, x: NDArray[np.float64], reward: float) -> "UserBelief":
        stats = list(self.stats)
        stats[arm] = stats[arm].add(np.asarray(x, dtype=np.float64), float(reward))
        return replace(self, stats=tuple(stats))

    def belief(self, arm: int, t: float = 0.0) -> ArmBelief:
        """The user's belief about ``arm`` at inflation time ``t``."""
        if self.revealed is not None and arm not in self.revealed:
            return inflate(self.inflation, self.priors[arm], t)
        return self.stats[arm].posterior(self.priors[arm], self.inflation.scale(t))

    def means(self, x: NDArray[np.float64], t: float = 0.0) -> NDArray[np.float64]:
        """Expected reward of every arm at ``x``."""
        x = np.asarray(x, dtype=np.float64)
        values = np.empty(self.n_arms)
        for arm in range(self.n_arms):
            if self.stats[arm].count == 0 or (self.revealed is not None and arm not in self.revealed):
                # the prior mean does not depend on the inflation scale
                values[arm] = float(x @ self.priors[arm].mean)
            else:
                values[arm] = float(x @ self.belief(arm, t).mean)
        return values

    def myopic_arm(self, x: NDArray[np.float64], t: float = 0.0) -> int:
        return int(np.argmax(self.means(x, t)))


def _gain_from_means(means: NDArray[np.float64], recommended: int) -> float:
    if means.shape[0] == 1:
        return math.inf
    others = np.delete(means, recommended)
    return float(means[recommended] - others.max())


def _check_probability(probability: float) -> float:
    if not 0.0 < probability <= 1.0:
        raise ValueError(f"recommendation probability must lie in (0,1], got {probability}")
    return probability


def incentive_gain(user: UserBelief, x: NDArray[np.float64], recommended: int, t: float = 0.0) -> float:
    """Expected advantage of ``recommended`` over the best other arm; +inf with one arm."""
    return _gain_from_means(user.means(x, t), recommended)


def recommendation_gain(
    user: UserBelief,
    x: NDArray[np.float64],
    recommended: int,
    probability: float,
    t: float = 0.0,
) -> float:
    """Expected advantage of ``recommended`` on the event that the platform shows it.

    ``E[(mu_i - mu_j) 1{I_t = i} | x, Gamma]`` for the worst alternative ``j``,
    where ``probability`` is the chance that the platform's policy recommends
    ``i`` at ``x``. +inf with one arm.
    """
    gain = incentive_gain(user, x, recommended, t)
    probability = _check_probability(probability)
    return gain if math.isinf(gain) else probability * gain


def user_step(
    user: UserBelief,
    x: NDArray[np.float64],
    recommended: int,
    epsilon: float,
    reward_source: Callable[[int], float],
    t: float = 0.0,
    *,
    policy: UserPolicy = UserPolicy.POSTERIOR,
    probability: float = 1.0,
) -> Tuple[UserDecision, UserBelief]:
    """Follow the recommendation if its gain is at least ``-epsilon``, else take the myopic arm.

    Under ``UserPolicy.RECOMMENDATION`` the gain is weighted by ``probability``,
    the chance that the platform recommends this arm at ``x``. Only followed
    rounds enter the public information set.
    """
    means = user.means(x, t)
    gain = _gain_from_means(means, recommended)
    if policy is UserPolicy.RECOMMENDATION and not math.isinf(gain):
        gain *= _check_probability(probability)
    followed = gain >= -epsilon
    chosen = recommended if followed else int(np.argmax(means))
    reward = float(reward_source(chosen))
    decision = UserDecision(followed=followed, chosen=chosen, gain=gain, reward=reward)
    if followed:
        user = user.observe(chosen, x, reward)
    return decision, user
