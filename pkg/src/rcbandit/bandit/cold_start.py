"""Cold start stage: most-popular-arm collection (MPASC) then rest-arm collection (RASC).

The stage gathers a fixed number of samples per arm while keeping every
recommendation attractive to a myopic user. The sizing formulas for the sample
count and for the exploration mixture live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Callable, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator

from rcbandit.bandit.model import ArmBelief, Observation, posterior_update, predict_mean
from rcbandit.core.errors import PhaseError
from rcbandit.core.logger_setup import get_logger

logger = get_logger(__name__)

RewardSource = Callable[[int], Optional[float]]
"""Delivers a recommendation; returns the observed reward, or None if the user deviated."""


class ColdStartConfig(BaseModel):
    """Constants that size the cold start stage."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    K: int = Field(ge=1)
    d: int = Field(ge=1)
    epsilon: float
    tau_prior: float = Field(gt=0)
    rho_prior: float = Field(gt=0, le=1)
    tau_post: float = Field(gt=0)
    rho_post: float = Field(default=0.95, gt=0, le=1)
    phi0: float = Field(gt=0)
    noise_sigma: float = Field(ge=0)
    n_override: Optional[int] = Field(default=None, ge=1)
    sample_size_cap: Optional[int] = Field(default=None, ge=1)

    @field_validator("epsilon")
    @classmethod
    def _check_epsilon(cls, value: float) -> float:
        if not 0 <= value < 1:
            raise ValueError("epsilon must lie in [0,1)")
        return value


def _exact(value: float) -> Fraction:
    # decimal literal semantics: 0.05 is 1/20, not its binary neighbour
    return Fraction(repr(value))


def theorem_sample_size(cfg: ColdStartConfig) -> int:
    """Smallest integer N with N >= (sigma^2 d + 1) K^3 / (phi0 (tau_post + eps)^2)."""
    numerator = (_exact(cfg.noise_sigma) ** 2 * cfg.d + 1) * cfg.K**3
    denominator = _exact(cfg.phi0) * (_exact(cfg.tau_post) + _exact(cfg.epsilon)) ** 2
    return max(1, math.ceil(numerator / denominator))


def required_sample_size(cfg: ColdStartConfig) -> int:
    """Per-arm sample count for the cold start (``n_override`` wins when set)."""
    if cfg.n_override is not None:
        return cfg.n_override
    return theorem_sample_size(cfg)


def required_exploration_rate(cfg: ColdStartConfig) -> float:
    """Exploration rate ``L = 1 + (1 - eps) / (tau_prior rho_prior + eps)``."""
    return 1.0 + (1.0 - cfg.epsilon) / (cfg.tau_prior * cfg.rho_prior + cfg.epsilon)


def m0_epoch(n: int) -> int:
    """First exploitation epoch ``ceil(2 + log2 n)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return math.ceil(2 + math.log2(n))


@dataclass(frozen=True)
class SampleSize:
    """Resolved per-arm sample count and how it was obtained."""

    n: int
    theorem_n: int
    capped: bool
    overridden: bool


def resolve_sample_size(cfg: ColdStartConfig, horizon: int) -> SampleSize:
    """Apply the override, then the optional cap when the theorem value exceeds horizon / K."""
    theorem_n = theorem_sample_size(cfg)
    if cfg.n_override is not None:
        logger.info(f"Using ad-hoc sample size N={cfg.n_override} (theorem value {theorem_n})")
        return SampleSize(cfg.n_override, theorem_n, capped=False, overridden=True)
    if cfg.sample_size_cap is not None and theorem_n * cfg.K > horizon:
        n = min(theorem_n, cfg.sample_size_cap)
        logger.info(
            f"Theorem sample size N={theorem_n} exceeds horizon/K={horizon / cfg.K:.1f}; capped at N={n}"
        )
        return SampleSize(n, theorem_n, capped=True, overridden=False)
    return SampleSize(theorem_n, theorem_n, capped=False, overridden=False)


class Phase(str, Enum):
    MPASC = "MPASC"
    RASC = "RASC"
    DONE = "DONE"


@dataclass(frozen=True)
class ColdStartState:
    """Pull counts, completed arms and per-arm sample stores.

    Attributes:
        n_required: Per-arm sample count N
        pulls: N_i(t) per arm
        completed: Arms with at least N samples
        samples: Per-arm tuples of ``(x, y)``
        phase: Current phase
    """

    n_required: int
    pulls: Tuple[int, ...]
    completed: FrozenSet[int]
    samples: Tuple[Tuple[Observation, ...], ...]
    phase: Phase = Phase.MPASC

    @classmethod
    def initial(cls, K: int, n_required: int) -> "ColdStartState":
        if n_required < 1:
            raise ValueError("n_required must be at least 1")
        return cls(
            n_required=n_required,
            pulls=(0,) * K,
            completed=frozenset(),
            samples=((),) * K,
        )

    @property
    def n_arms(self) -> int:
        return len(self.pulls)

    @property
    def remaining(self) -> List[int]:
        return [arm for arm in range(self.n_arms) if arm not in self.completed]

    def record(self, arm: int, x: NDArray[np.float64], reward: float) -> "ColdStartState":
        """Append one sample for ``arm`` and advance the phase when it completes."""
        pulls = list(self.pulls)
        pulls[arm] += 1
        samples = list(self.samples)
        samples[arm] = samples[arm] + ((np.asarray(x, dtype=np.float64), float(reward)),)
        completed = self.completed
        phase = self.phase
        if pulls[arm] >= self.n_required and arm not in completed:
            completed = completed | {arm}
            if len(completed) == self.n_arms:
                phase = Phase.DONE
            elif phase is Phase.MPASC:
                phase = Phase.RASC
        return replace(self, pulls=tuple(pulls), completed=completed, samples=tuple(samples), phase=phase)

    def all_samples(self) -> List[Tuple[NDArray[np.float64], int, float]]:
        """Flatten the sample stores into ``(x, arm, y)`` rows."""
        return [(x, arm, y) for arm, rows in enumerate(self.samples) for x, y in rows]


def _argmax(values: Sequence[float]) -> int:
    # np.argmax breaks ties toward the lowest index
    return int(np.argmax(np.asarray(values, dtype=np.float64)))


def _require_phase(state: ColdStartState, phase: Phase) -> None:
    if state.phase is not phase:
        raise PhaseError(phase.value, state.phase.value)


def mpasc_step(
    state: ColdStartState,
    x: NDArray[np.float64],
    prior_means: Sequence[float],
    reward_source: RewardSource,
) -> Tuple[int, ColdStartState]:
    """Recommend the arm with the highest prior mean reward and store its sample."""
    _require_phase(state, Phase.MPASC)
    arm = _argmax(prior_means)
    reward = reward_source(arm)
    if reward is None:
        return arm, state
    new_state = state.record(arm, x, reward)
    if new_state.phase is not Phase.MPASC:
        logger.info(f"MPASC stopped: arm {arm} reached N={state.n_required} samples")
    return arm, new_state


def promoted_arm(state: ColdStartState, x: NDArray[np.float64], beliefs: Sequence[ArmBelief]) -> int:
    """Highest prior-mean arm among arms not yet completed."""
    remaining = state.remaining
    if not remaining:
        raise PhaseError(Phase.RASC.value, Phase.DONE.value)
    means = [predict_mean(beliefs[arm], x) for arm in remaining]
    return remaining[_argmax(means)]


def organic_arm(x: NDArray[np.float64], beliefs: Sequence[ArmBelief]) -> int:
    """Highest expected-reward arm under the completed-arm posteriors and remaining priors."""
    return _argmax([predict_mean(belief, x) for belief in beliefs])


def rasc_step(
    state: ColdStartState,
    x: NDArray[np.float64],
    q: bool,
    beliefs: Sequence[ArmBelief],
    reward_source: RewardSource,
) -> Tuple[int, ColdStartState]:
    """One RASC round.

    With ``q`` the promoted arm is explored and its sample stored; otherwise the
    organic arm is recommended and counts and samples are left untouched.
    ``beliefs`` holds posteriors for completed arms and priors for the rest.
    """
    _require_phase(state, Phase.RASC)
    if not q:
        arm = organic_arm(x, beliefs)
        reward_source(arm)
        return arm, state

    arm = promoted_arm(state, x, beliefs)
    reward = reward_source(arm)
    if reward is None:
        return arm, state
    new_state = state.record(arm, x, reward)
    if arm in new_state.completed and arm not in state.completed:
        logger.info(f"Arm {arm} completed with N={state.n_required} samples")
    if new_state.phase is Phase.DONE:
        logger.info("RASC finished: every arm reached N samples")
    return arm, new_state


def recommendation_law(
    state: ColdStartState,
    x: NDArray[np.float64],
    beliefs: Sequence[ArmBelief],
    exploration_rate: float,
) -> NDArray[np.float64]:
    """Probability of each arm being recommended in a RASC round at ``x``.

    The promoted arm carries ``1 / L`` and the organic arm ``1 - 1 / L``; the
    two add up when they coincide.
    """
    _require_phase(state, Phase.RASC)
    law = np.zeros(state.n_arms)
    explore = 1.0 / exploration_rate
    law[promoted_arm(state, x, beliefs)] += explore
    law[organic_arm(x, beliefs)] += 1.0 - explore
    return law


def draw_promotion(rng: np.random.Generator, exploration_rate: float) -> bool:
    """Bernoulli(1 / L) draw deciding whether a RASC round explores."""
    return bool(rng.random() < 1.0 / exploration_rate)


def refresh_beliefs(
    priors: Sequence[ArmBelief],
    beliefs: Sequence[ArmBelief],
    previous: ColdStartState,
    current: ColdStartState,
) -> List[ArmBelief]:
    """Swap in the posterior for every arm that completed between two states."""
    updated = list(beliefs)
    for arm in current.completed - previous.completed:
        updated[arm] = posterior_update(priors[arm], current.samples[arm])
    return updated
