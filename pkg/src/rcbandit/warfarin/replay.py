"""Replay of the warfarin dosing data as an online recommendation problem.

Patients arrive in a random order. The three dose buckets are the arms; the
recommender learns from a 0/1 reward (1 when it picks the patient's bucket),
while regret is measured against a linear ground truth fitted on the whole
dataset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import List, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import solve

from rcbandit.bandit.cold_start import ColdStartConfig, required_exploration_rate, theorem_sample_size
from rcbandit.bandit.exploitation import ExploitationConfig
from rcbandit.bandit.model import ArmBelief, InflationSchedule, MspeConfig, empirical_phi0
from rcbandit.bandit.rcb import RcbParams, RcbRunner, RunResult
from rcbandit.core.logger_setup import get_logger
from rcbandit.core.parallel import map_ordered
from rcbandit.schema import RunConfig, WarfarinParams
from rcbandit.simulation.environment import make_generator
from rcbandit.simulation.metrics import (
    MetricsSummary,
    average_summaries,
    class_proportions,
    confusion_table,
    weighted_risk_score,
)
from rcbandit.warfarin.ingest import DoseBounds, DoseBucket, PatientRecord, stack

logger = get_logger(__name__)

RIDGE = 1e-8
COLD_START_BUDGET_SHARE = 20


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Per-bucket linear models of the scaled dose.

    Attributes:
        betas: 3 x d coefficients, row i fitted on bucket-i patients
        bounds: Dose range used for scaling
        noise_sigma: Standard deviation of the scaled doses
    """

    betas: NDArray[np.float64]
    bounds: DoseBounds
    noise_sigma: float


def _least_squares(design: NDArray[np.float64], target: NDArray[np.float64]) -> NDArray[np.float64]:
    d = design.shape[1]
    if design.shape[0] >= d and np.linalg.matrix_rank(design) == d:
        return np.linalg.lstsq(design, target, rcond=None)[0]
    # rank-deficient: tiny ridge keeps the solve well posed
    return solve(design.T @ design + RIDGE * np.eye(d), design.T @ target, assume_a="pos")


def fit_ground_truth(records: Sequence[PatientRecord]) -> GroundTruth:
    """Least squares of scaled dose on features, one fit per bucket's patients."""
    features, buckets, scaled = stack(records)
    doses = np.asarray([record.optimal_dose_mg_per_day for record in records])
    betas = []
    for bucket in DoseBucket:
        rows = buckets == int(bucket)
        if rows.sum() <= features.shape[1]:
            logger.warning(f"Bucket {bucket.name} has {int(rows.sum())} patients for {features.shape[1]} features")
        betas.append(_least_squares(features[rows], scaled[rows]))
    truth = GroundTruth(
        betas=np.vstack(betas),
        bounds=DoseBounds(float(doses.min()), float(doses.max())),
        noise_sigma=float(np.std(scaled)),
    )
    logger.info(f"Fitted ground truth on {len(records)} patients, sigma_hat={truth.noise_sigma:.4f}")
    return truth


@dataclass
class WarfarinReplayEnv:
    """Serves patients in a fixed order; one patient per call to ``sample_covariate``."""

    records: Sequence[PatientRecord]
    truth: GroundTruth
    order: NDArray[np.int64]
    _cursor: int = field(default=-1, init=False)

    @property
    def n_arms(self) -> int:
        return len(DoseBucket)

    @property
    def dim(self) -> int:
        return int(self.truth.betas.shape[1])

    @property
    def current(self) -> PatientRecord:
        if self._cursor < 0:
            raise IndexError("no patient has arrived yet")
        return self.records[int(self.order[self._cursor])]

    def sample_covariate(self) -> NDArray[np.float64]:
        if self._cursor + 1 >= len(self.order):
            raise IndexError(f"all {len(self.order)} patients have been served")
        self._cursor += 1
        return self.current.features

    def realize_reward(self, x: ArrayLike, arm: int) -> float:
        return 1.0 if arm == int(self.current.dose_bucket) else 0.0

    def oracle_means(self, x: ArrayLike) -> NDArray[np.float64]:
        """Fitted scaled dose for the patient's own bucket, 0 for the others."""
        bucket = int(self.current.dose_bucket)
        means = np.zeros(self.n_arms)
        # scaled doses are nonnegative
        means[bucket] = max(float(np.asarray(x, dtype=np.float64) @ self.truth.betas[bucket]), 0.0)
        return means

    def optimal_arm(self, x: ArrayLike) -> int:
        return int(self.current.dose_bucket)


def default_sample_size(horizon: int, exploration_rate: float) -> int:
    """Per-arm sample count that lets each rest-arm phase finish within T/20 rounds."""
    budget = math.ceil(horizon / COLD_START_BUDGET_SHARE)
    return max(1, math.floor(budget / exploration_rate))


def build_warfarin_params(records: Sequence[PatientRecord], truth: GroundTruth, config: RunConfig) -> RcbParams:
    """Resolve replay constants into runner parameters."""
    params: WarfarinParams = config.warfarin
    features, _, _ = stack(records)
    K, d = len(DoseBucket), features.shape[1]
    horizon = len(records)
    sigma = params.noise_sigma or truth.noise_sigma
    phi0 = empirical_phi0(features)

    base = ColdStartConfig(
        K=K,
        d=d,
        epsilon=params.epsilon,
        tau_prior=params.tau_prior,
        rho_prior=params.rho_prior,
        tau_post=params.tau_post,
        rho_post=params.rho_post,
        phi0=phi0,
        noise_sigma=sigma,
    )
    n_override = params.n_override or default_sample_size(horizon, required_exploration_rate(base))
    logger.info(f"Warfarin cold start uses N={n_override} (theorem value {theorem_sample_size(base)})")

    priors = tuple(
        ArmBelief.isotropic(
            np.full(d, params.medium_prior_mean if bucket is DoseBucket.MEDIUM else 0.0),
            params.prior_variance,
            sigma,
        )
        for bucket in DoseBucket
    )
    return RcbParams(
        horizon=horizon,
        priors=priors,
        cold_start=base.model_copy(update={"n_override": n_override}),
        exploitation=ExploitationConfig(
            mspe=MspeConfig(c3=config.c3, phi0=phi0, d=d, noise_sigma=sigma, delta=config.delta),
            estimator=config.mspe_estimator,
            cv_folds=config.cv_folds,
            ingest_deviations=config.ingest_deviations,
        ),
        inflation=InflationSchedule(params.inflation, params.inflation_rate, base_lambda=params.prior_variance),
        inflate_from=params.inflate_from,
        oracle=config.oracle,
        user_policy=config.user_policy,
    )


def replay_permutation(
    records: Sequence[PatientRecord],
    truth: GroundTruth,
    params: RcbParams,
    seed: np.random.SeedSequence,
) -> RunResult:
    """One pass over the patients in a seeded random order."""
    # truth and environment children are unused here; spawning keeps the child order fixed
    _, _, algorithm_seed, permutation_seed = seed.spawn(4)
    order = make_generator(permutation_seed).permutation(len(records))
    env = WarfarinReplayEnv(records, truth, order)
    return RcbRunner(params).run(env, make_generator(algorithm_seed))


@dataclass(frozen=True)
class ReplayResult:
    """Per-permutation runs and their averaged summary."""

    runs: List[RunResult]
    summaries: List[MetricsSummary]
    summary: MetricsSummary
    baseline: MetricsSummary


def physician_baseline(records: Sequence[PatientRecord], truth: Optional[GroundTruth] = None) -> MetricsSummary:
    """Summary of always prescribing the Medium dose.

    Regret is only filled in when a ground truth is given.
    """
    features, buckets, _ = stack(records)
    K = len(DoseBucket)
    chosen = np.full(buckets.shape[0], int(DoseBucket.MEDIUM))
    confusion = confusion_table(buckets, chosen, K)
    proportions = class_proportions(buckets, K)
    regret = np.zeros(buckets.shape[0])
    if truth is not None:
        wrong = buckets != int(DoseBucket.MEDIUM)
        fitted = np.einsum("ij,ij->i", features, truth.betas[buckets])
        regret = np.where(wrong, np.maximum(fitted, 0.0), 0.0)
    cumulative = np.cumsum(regret)
    return MetricsSummary(
        n_steps=int(buckets.shape[0]),
        cum_regret_final=float(cumulative[-1]),
        violation_fraction=0.0,
        fraction_incorrect=float(np.mean(buckets != int(DoseBucket.MEDIUM))),
        weighted_risk_score=weighted_risk_score(confusion, proportions),
        confusion_table=confusion.tolist(),
        class_proportions=proportions.tolist(),
        cumulative_regret=cumulative.tolist(),
    )


def replay(
    records: Sequence[PatientRecord],
    config: RunConfig,
    permutations: Optional[int] = None,
    seed: Optional[int] = None,
    workers: int = 1,
) -> ReplayResult:
    """Run the recommender over several random arrival orders and average the results.

    Args:
        records: Ingested patients
        config: Run configuration in warfarin mode
        permutations: Number of arrival orders, defaults to the configured count
        seed: Master seed, defaults to ``config.seed``
        workers: Worker processes for the permutations

    Returns:
        ReplayResult with the averaged summary and the always-Medium baseline
    """
    count = permutations or config.warfarin.permutations
    master = np.random.SeedSequence(config.seed if seed is None else seed)
    truth = fit_ground_truth(records)
    params = build_warfarin_params(records, truth, config)
    runs = map_ordered(
        partial(replay_permutation, records, truth, params),
        master.spawn(count),
        workers=workers,
        desc="Permutations",
    )
    summaries = [
        run.summarize(params.epsilon, params.K, strict=config.strict, window=config.gain_window) for run in runs
    ]
    summary = average_summaries(summaries)
    baseline = physician_baseline(records, truth)
    logger.info(
        f"Replay over {count} permutations: fraction incorrect {summary.fraction_incorrect:.3f}, "
        f"risk score {summary.weighted_risk_score:.3f} (always-Medium {baseline.weighted_risk_score:.3f})"
    )
    return ReplayResult(runs=runs, summaries=summaries, summary=summary, baseline=baseline)
