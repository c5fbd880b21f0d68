"""Exploitation stage: doubling epochs and inverse-gap-weighted arm sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from rcbandit.bandit.agents import UserDecision
from rcbandit.bandit.model import (
    MSPE_FLOOR,
    ArmBelief,
    ArmObservation,
    MspeConfig,
    cv_mspe,
    fit_offline,
    mspe_bound,
    predict_mean,
)
from rcbandit.core.logger_setup import get_logger

logger = get_logger(__name__)

SPREAD_CONSTANT = 4.0

Responder = Callable[[int, NDArray[np.float64], int, float], UserDecision]
"""Delivers arm ``a`` at round ``t`` for covariate ``x`` (drawn with the given probability) and reports what the user did."""


def epoch_of(t: int) -> int:
    """Epoch m with ``2**(m-1) <= t < 2**m``."""
    if t < 1:
        raise ValueError("t must be at least 1")
    return t.bit_length()


def epoch_bounds(m: int) -> Tuple[int, int]:
    """First and last round of epoch m."""
    return 2 ** (m - 1), 2**m - 1


@dataclass(frozen=True)
class EpochSchedule:
    """Epoch bookkeeping for the exploitation stage.

    Attributes:
        m0: First exploitation epoch
        gammas: Spread parameter used in each epoch that has started
    """

    m0: int
    gammas: Dict[int, float] = field(default_factory=dict)

    @staticmethod
    def tau(m: int) -> int:
        return 2**m

    def with_gamma(self, m: int, gamma: float) -> "EpochSchedule":
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        return EpochSchedule(self.m0, {**self.gammas, m: gamma})


def spread_parameter(K: int, mspe: float) -> float:
    """Spread ``gamma = 4 sqrt(K / mspe)``."""
    if mspe <= 0:
        raise ValueError("mspe must be positive")
    return SPREAD_CONSTANT * math.sqrt(K / mspe)


@dataclass(frozen=True, eq=False)
class ActionDistribution:
    """Sampling law over arms around the best predictive arm."""

    probs: NDArray[np.float64]
    best_arm: int


def action_distribution(mu_hats: Sequence[float], gamma: float) -> ActionDistribution:
    """Inverse-gap weighting.

    Every arm ``i`` other than the best ``b`` gets ``1 / (K + gamma (mu_b - mu_i))``;
    ``b`` takes the remaining mass.
    """
    mu = np.asarray(mu_hats, dtype=np.float64)
    K = mu.shape[0]
    best = int(np.argmax(mu))
    probs = 1.0 / (K + gamma * (mu[best] - mu))
    probs[best] = 0.0
    probs[best] = 1.0 - probs.sum()
    probs.setflags(write=False)
    return ActionDistribution(probs, best)


def sample_action(dist: ActionDistribution, u: float) -> int:
    """Inverse-CDF draw over ascending arm indices."""
    cdf = np.cumsum(dist.probs)
    index = int(np.searchsorted(cdf, u, side="right"))
    return min(index, dist.probs.shape[0] - 1)


class MspeEstimator(str, Enum):
    ANALYTIC = "analytic"
    CV = "cv"


@dataclass(frozen=True)
class ExploitationConfig:
    """Knobs of the exploitation stage."""

    mspe: MspeConfig
    estimator: MspeEstimator = MspeEstimator.ANALYTIC
    cv_folds: int = 5
    ingest_deviations: bool = False


def estimate_mspe(
    cfg: ExploitationConfig,
    n_train: int,
    priors: Sequence[ArmBelief],
    training: Sequence[ArmObservation],
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Prediction error used for the epoch's spread parameter."""
    if cfg.estimator is MspeEstimator.CV:
        estimate = cv_mspe(priors, training, folds=cfg.cv_folds, rng=rng)
        if estimate is not None:
            return estimate
        logger.debug("Too few rows for cross-validation; using the analytic bound")
    return max(mspe_bound(cfg.mspe, n_train), MSPE_FLOOR)


@dataclass(frozen=True)
class EpochResult:
    """Outcome of one epoch: the frozen model, its gamma, and the data it collected."""

    schedule: EpochSchedule
    beliefs: List[ArmBelief]
    buffer: List[ArmObservation]
    gamma: float
    mspe: float


def run_epoch(
    schedule: EpochSchedule,
    epoch: int,
    beliefs: Sequence[ArmBelief],
    training: Sequence[ArmObservation],
    n_train: int,
    steps: range,
    next_covariate: Callable[[], NDArray[np.float64]],
    respond: Responder,
    rng: np.random.Generator,
    cfg: ExploitationConfig,
) -> EpochResult:
    """Fit on the previous epoch's data, then play every round in ``steps``.

    The fitted means and gamma stay frozen for the whole epoch. Followed rounds
    (and deviations, with ``ingest_deviations``) go to the epoch's buffer.

    Args:
        schedule: Epoch bookkeeping so far
        epoch: Epoch index m
        beliefs: Beliefs the offline fit starts from
        training: ``(x, arm, y)`` rows of the previous epoch (cold start data for the first)
        n_train: Training sample size entering the prediction-error estimate
        steps: Rounds of this epoch to play
        next_covariate: Source of arriving covariates
        respond: Delivers the sampled arm and its sampling probability to the user
        rng: Stream for the inverse-CDF uniforms
        cfg: Stage configuration

    Returns:
        EpochResult with the updated schedule, fitted beliefs and collected rows
    """
    fitted = fit_offline(beliefs, training)
    K = len(fitted)
    mspe = estimate_mspe(cfg, n_train, beliefs, training, rng)
    gamma = spread_parameter(K, mspe)
    schedule = schedule.with_gamma(epoch, gamma)
    logger.debug(f"Epoch {epoch}: fitted on {len(training)} rows, n_train={n_train}, mspe={mspe:.3g}, gamma={gamma:.3f}")

    buffer: List[ArmObservation] = []
    for t in steps:
        x = next_covariate()
        mu_hats = [predict_mean(belief, x) for belief in fitted]
        dist = action_distribution(mu_hats, gamma)
        arm = sample_action(dist, float(rng.random()))
        decision = respond(t, x, arm, float(dist.probs[arm]))
        if decision.followed or cfg.ingest_deviations:
            buffer.append((x, decision.chosen, decision.reward))
    return EpochResult(schedule, fitted, buffer, gamma, mspe)
