"""Two-stage recommender: incentive-compatible cold start, then epoch-based exploitation.

``RcbRunner`` drives one run against an ``Environment`` and a simulated user
population, logging one ``StepRecord`` per round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Protocol, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rcbandit.bandit.agents import UserBelief, UserDecision, UserPolicy, user_step
from rcbandit.bandit.cold_start import (
    ColdStartConfig,
    ColdStartState,
    Phase,
    RewardSource,
    SampleSize,
    draw_promotion,
    m0_epoch,
    mpasc_step,
    organic_arm,
    rasc_step,
    recommendation_law,
    refresh_beliefs,
    required_exploration_rate,
    resolve_sample_size,
)
from rcbandit.bandit.exploitation import (
    EpochSchedule,
    ExploitationConfig,
    epoch_bounds,
    epoch_of,
    run_epoch,
)
from rcbandit.bandit.model import ArmBelief, InflationSchedule, SufficientStatistics, predict_mean
from rcbandit.core.logger_setup import get_logger
from rcbandit.simulation.metrics import (
    DEFAULT_GAIN_WINDOW,
    MetricsSummary,
    RunLog,
    Stage,
    StepRecord,
    per_step_regret,
    summarize,
)

logger = get_logger(__name__)


class Environment(Protocol):
    """Source of arriving covariates and rewards."""

    @property
    def n_arms(self) -> int: ...

    @property
    def dim(self) -> int: ...

    def sample_covariate(self) -> NDArray[np.float64]: ...

    def realize_reward(self, x: ArrayLike, arm: int) -> float: ...

    def oracle_means(self, x: ArrayLike) -> NDArray[np.float64]: ...

    def optimal_arm(self, x: ArrayLike) -> int: ...


class OracleMode(str, Enum):
    TRUE = "true"
    POSTERIOR = "posterior"


class InflationClock(str, Enum):
    RUN = "run"
    EXPLOITATION = "exploitation"


@dataclass(frozen=True)
class RcbParams:
    """Everything one run needs besides the environment and the random stream.

    Attributes:
        horizon: Number of rounds T
        priors: Shared prior belief per arm
        cold_start: Sizing constants for the cold start
        exploitation: Exploitation-stage knobs
        inflation: Prior inflation schedule of the user population
        inflate_from: Whether the inflation clock starts at round 1 or at exploitation
        oracle: Regret reference
        user_policy: How simulated users weigh a recommendation
    """

    horizon: int
    priors: Tuple[ArmBelief, ...]
    cold_start: ColdStartConfig
    exploitation: ExploitationConfig
    inflation: InflationSchedule = field(default_factory=InflationSchedule)
    inflate_from: InflationClock = InflationClock.EXPLOITATION
    oracle: OracleMode = OracleMode.TRUE
    user_policy: UserPolicy = UserPolicy.POSTERIOR

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if len(self.priors) != self.cold_start.K:
            raise ValueError(f"got {len(self.priors)} priors for K={self.cold_start.K}")
        object.__setattr__(self, "priors", tuple(self.priors))

    @property
    def K(self) -> int:
        return self.cold_start.K

    @property
    def d(self) -> int:
        return self.cold_start.d

    @property
    def epsilon(self) -> float:
        return self.cold_start.epsilon


@dataclass(frozen=True)
class RunResult:
    """Run log plus the quantities the run resolved along the way."""

    log: RunLog
    sample_size: SampleSize
    exploration_rate: float
    cold_start_rounds: int
    exploit_start: Optional[int]
    gammas: Dict[int, float]

    def summarize(
        self, epsilon: float, K: int, *, strict: bool = False, window: int = DEFAULT_GAIN_WINDOW
    ) -> MetricsSummary:
        """Metrics of the log, with the resolved cold start quantities attached."""
        summary = summarize(self.log, epsilon, K, strict=strict, window=window)
        return summary.model_copy(
            update={
                "cold_start_rounds": float(self.cold_start_rounds),
                "sample_size": self.sample_size.n,
                "exploration_rate": self.exploration_rate,
            }
        )


class RcbRunner:
    """Plays the recommender against one environment and user population."""

    def __init__(self, params: RcbParams) -> None:
        self.params = params

    def run(self, env: Environment, rng: np.random.Generator) -> RunResult:
        """Execute cold start, padding rounds and exploitation epochs up to the horizon.

        Args:
            env: Covariate and reward source
            rng: Algorithm stream (promotion draws and arm sampling)

        Returns:
            RunResult with one StepRecord per round
        """
        return _Run(self.params, env, rng).execute()


class _Run:
    """Mutable state of a single run."""

    def __init__(self, params: RcbParams, env: Environment, rng: np.random.Generator) -> None:
        if env.n_arms != params.K or env.dim != params.d:
            raise ValueError(
                f"environment has K={env.n_arms}, d={env.dim}; parameters expect K={params.K}, d={params.d}"
            )
        self.params = params
        self.env = env
        self.rng = rng
        self.log = RunLog()
        self.user = UserBelief.from_priors(params.priors, params.inflation, revealed=frozenset())
        self.exploit_start: Optional[int] = None
        self.oracle_stats: List[SufficientStatistics] = [
            SufficientStatistics.empty(params.d) for _ in range(params.K)
        ]

    def _inflation_time(self, t: int) -> int:
        if self.params.inflate_from is InflationClock.RUN:
            return t
        if self.exploit_start is None:
            return 0
        return t - self.exploit_start

    def _reference_means(self, x: NDArray[np.float64], true_means: NDArray[np.float64]) -> NDArray[np.float64]:
        if self.params.oracle is OracleMode.TRUE:
            return true_means
        return np.asarray(
            [
                predict_mean(stats.posterior(prior), x)
                for stats, prior in zip(self.oracle_stats, self.params.priors)
            ]
        )

    def respond(
        self, t: int, x: NDArray[np.float64], recommended: int, stage: Stage, probability: float = 1.0
    ) -> UserDecision:
        """Show ``recommended`` (issued with ``probability``) to the round-``t`` user and log what happened."""
        decision, self.user = user_step(
            self.user,
            x,
            recommended,
            self.params.epsilon,
            lambda arm: self.env.realize_reward(x, arm),
            self._inflation_time(t),
            policy=self.params.user_policy,
            probability=probability,
        )
        true_means = np.asarray(self.env.oracle_means(x), dtype=np.float64)
        regret = per_step_regret(self._reference_means(x, true_means), decision.chosen)
        if self.params.oracle is OracleMode.POSTERIOR:
            chosen = decision.chosen
            self.oracle_stats[chosen] = self.oracle_stats[chosen].add(x, decision.reward)
        self.log.append(
            StepRecord(
                t=t,
                stage=stage,
                recommended=recommended,
                chosen=decision.chosen,
                reward=decision.reward,
                instant_regret=regret,
                dbic_gain=0.0 if math.isinf(decision.gain) else decision.gain,
                followed=decision.followed,
                optimal_arm=int(self.env.optimal_arm(x)),
            )
        )
        return decision

    def _reward_source(self, t: int, x: NDArray[np.float64], stage: Stage, law: NDArray[np.float64]) -> RewardSource:
        def deliver(arm: int) -> Optional[float]:
            decision = self.respond(t, x, arm, stage, float(law[arm]))
            return decision.reward if decision.followed else None

        return deliver

    def execute(self) -> RunResult:
        params = self.params
        horizon = params.horizon
        sample_size = resolve_sample_size(params.cold_start, horizon)
        exploration_rate = required_exploration_rate(params.cold_start)
        logger.info(
            f"Starting run: K={params.K}, d={params.d}, T={horizon}, eps={params.epsilon}, "
            f"N={sample_size.n}, L={exploration_rate:.3f}"
        )

        state = ColdStartState.initial(params.K, sample_size.n)
        beliefs = list(params.priors)
        t = 1
        while t <= horizon and state.phase is not Phase.DONE:
            x = self.env.sample_covariate()
            previous = state
            if state.phase is Phase.MPASC:
                prior_means = [predict_mean(prior, x) for prior in params.priors]
                law = np.zeros(params.K)
                law[int(np.argmax(prior_means))] = 1.0
                _, state = mpasc_step(state, x, prior_means, self._reward_source(t, x, Stage.MPASC, law))
            else:
                law = recommendation_law(state, x, beliefs, exploration_rate)
                q = draw_promotion(self.rng, exploration_rate)
                _, state = rasc_step(state, x, q, beliefs, self._reward_source(t, x, Stage.RASC, law))
            if state.completed != previous.completed:
                beliefs = refresh_beliefs(params.priors, beliefs, previous, state)
                self.user = self.user.reveal(state.completed)
            t += 1
        cold_start_rounds = t - 1

        def result(gammas: Optional[Dict[int, float]] = None) -> RunResult:
            return RunResult(
                log=self.log,
                sample_size=sample_size,
                exploration_rate=exploration_rate,
                cold_start_rounds=cold_start_rounds,
                exploit_start=self.exploit_start,
                gammas=dict(gammas or {}),
            )

        if state.phase is not Phase.DONE:
            logger.warning(
                f"Cold start did not finish within T={horizon}: pulls={list(state.pulls)}, N={sample_size.n}"
            )
            return result()
        logger.info(f"Cold start finished after {cold_start_rounds} rounds")

        m0 = m0_epoch(sample_size.n)
        padding_end = min(EpochSchedule.tau(m0 - 1), horizon)
        if t <= padding_end:
            logger.info(f"Padding rounds {t}..{padding_end} with the organic arm until epoch {m0}")
        while t <= padding_end:
            x = self.env.sample_covariate()
            self.respond(t, x, organic_arm(x, beliefs), Stage.RASC)
            t += 1
        if t > horizon:
            return result()

        self.exploit_start = t
        self.user = self.user.reveal(None)
        training = state.all_samples()
        n_cold = len(training)
        schedule = EpochSchedule(m0)
        beliefs = list(params.priors)
        epoch = epoch_of(t)
        logger.info(f"Exploitation starts at round {t} in epoch {epoch} (m0={m0})")
        while t <= horizon:
            n_train = max(n_cold, 2 ** (epoch - 2))
            last = min(epoch_bounds(epoch)[1], horizon)
            outcome = run_epoch(
                schedule,
                epoch,
                beliefs,
                training,
                n_train,
                range(t, last + 1),
                self.env.sample_covariate,
                lambda step, x, arm, probability: self.respond(step, x, arm, Stage.EXPLOIT, probability),
                self.rng,
                params.exploitation,
            )
            logger.info(f"Epoch {epoch} fitted: n_train={n_train}, gamma={outcome.gamma:.3f}")
            schedule = outcome.schedule
            beliefs = outcome.beliefs
            training = outcome.buffer
            t = last + 1
            epoch += 1
        return result(schedule.gammas)
