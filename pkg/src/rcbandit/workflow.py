"""Experiment orchestration: run replications, then write every artifact."""

import json
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from rcbandit.bandit.cold_start import ColdStartConfig
from rcbandit.bandit.exploitation import ExploitationConfig
from rcbandit.bandit.model import ArmBelief, InflationSchedule, MspeConfig
from rcbandit.bandit.rcb import RcbParams, RcbRunner, RunResult
from rcbandit.core.config import OutputLayout, settings
from rcbandit.core.logger_setup import get_logger
from rcbandit.core.parallel import map_ordered
from rcbandit.schema import Mode, RunConfig, TruthMode
from rcbandit.simulation.environment import SyntheticEnv, analytic_phi0, draw_true_params, make_generator
from rcbandit.simulation.metrics import STEP_COLUMNS, MetricsSummary, average_summaries, curves_frame
from rcbandit.warfarin.ingest import DoseBucket, ingest
from rcbandit.warfarin.replay import replay

logger = get_logger(__name__)

# model noise for the posterior when the environment is noiseless
BELIEF_SIGMA_FLOOR = 1e-3


def build_sim_params(config: RunConfig) -> RcbParams:
    """Runner parameters for a synthetic experiment."""
    sim = config.sim
    phi0 = analytic_phi0(sim.sampler, sim.d)
    belief_sigma = max(sim.noise_sigma, BELIEF_SIGMA_FLOOR)
    priors = tuple(ArmBelief.isotropic(mean, sim.prior_variance, belief_sigma) for mean in sim.prior_means())
    cold_start = ColdStartConfig(
        K=sim.K,
        d=sim.d,
        epsilon=sim.epsilon,
        tau_prior=sim.tau_prior,
        rho_prior=sim.rho_prior,
        tau_post=sim.tau_post,
        rho_post=sim.rho_post,
        phi0=phi0,
        noise_sigma=sim.noise_sigma,
        n_override=sim.n_override,
        sample_size_cap=sim.sample_size_cap,
    )
    return RcbParams(
        horizon=sim.horizon,
        priors=priors,
        cold_start=cold_start,
        exploitation=ExploitationConfig(
            mspe=MspeConfig(c3=config.c3, phi0=phi0, d=sim.d, noise_sigma=sim.noise_sigma, delta=config.delta),
            estimator=config.mspe_estimator,
            cv_folds=config.cv_folds,
            ingest_deviations=config.ingest_deviations,
        ),
        inflation=InflationSchedule(sim.inflation, sim.inflation_rate, base_lambda=sim.prior_variance),
        inflate_from=sim.inflate_from,
        oracle=config.oracle,
        user_policy=config.user_policy,
    )


def simulate_replication(config: RunConfig, params: RcbParams, seed: np.random.SeedSequence) -> RunResult:
    """One synthetic replication on its own truth, environment and algorithm streams."""
    sim = config.sim
    truth_seed, environment_seed, algorithm_seed, _ = seed.spawn(4)
    if sim.truth is TruthMode.FIXED:
        truth_seed = np.random.SeedSequence(sim.truth_seed)
    covariances = [prior.covariance for prior in params.priors]
    betas = draw_true_params(sim.prior_means(), covariances, truth_seed)
    env = SyntheticEnv(betas, sim.noise_sigma, sim.sampler, make_generator(environment_seed))
    return RcbRunner(params).run(env, make_generator(algorithm_seed))


@dataclass(frozen=True)
class ExperimentResult:
    """Everything ``execute`` wrote, for callers that want the numbers too."""

    layout: OutputLayout
    runs: List[RunResult]
    summary: MetricsSummary
    baseline: Optional[MetricsSummary] = None


def _write_csv(frame: pd.DataFrame, path: Path, index: bool = False) -> None:
    frame.to_csv(path, index=index, float_format=settings.float_format, encoding="utf-8")


def _write_runs(layout: OutputLayout, runs: List[RunResult]) -> None:
    frames = []
    for index, run in enumerate(runs):
        frame = run.log.to_frame()
        _write_csv(frame, layout.replications_dir / f"rep_{index:03d}.csv")
        frame.insert(0, "replication", index)
        frames.append(frame)
    merged = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["replication", *STEP_COLUMNS])
    _write_csv(merged, layout.steps_csv)


def write_artifacts(
    config: RunConfig,
    layout: OutputLayout,
    runs: List[RunResult],
    summary: MetricsSummary,
    baseline: Optional[MetricsSummary] = None,
) -> None:
    """Per-replication CSVs, then the merged steps, summary, curves and echo."""
    _write_runs(layout, runs)

    payload = {"mode": config.mode.value, "replications": len(runs), **summary.model_dump(mode="json")}
    payload["gammas"] = [{str(epoch): gamma for epoch, gamma in run.gammas.items()} for run in runs]
    if baseline is not None:
        payload["physician_baseline"] = baseline.model_dump(mode="json")
    layout.summary_json.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")

    _write_csv(curves_frame(summary, config.epsilon), layout.curves_csv)
    if config.mode is Mode.WARFARIN:
        names = [bucket.name.capitalize() for bucket in DoseBucket]
        confusion = pd.DataFrame(summary.confusion_table, index=pd.Index(names, name="true"), columns=names)
        _write_csv(confusion, layout.confusion_csv, index=True)
    logger.info(f"Artifacts written to {layout.root}")


def write_config_echo(config: RunConfig, layout: OutputLayout) -> None:
    layout.config_echo.write_text(config.model_dump_json(indent=2) + "\n", encoding="utf-8")


def execute(config: RunConfig) -> ExperimentResult:
    """Run the configured experiment and write its artifacts.

    Replication ``i`` draws from the i-th child of ``SeedSequence(config.seed)``,
    so a (config, seed) pair determines every output byte.

    Args:
        config: Validated run configuration

    Returns:
        ExperimentResult with the output layout and the averaged summary
    """
    layout = settings.setup_directories(config.out)
    write_config_echo(config, layout)
    workers = config.workers or settings.workers
    logger.info(f"Running {config.mode.value} experiment with {config.runs} run(s); outputs in {layout.root}")

    if config.mode is Mode.WARFARIN:
        data = config.warfarin.data or settings.warfarin_data
        if data is None:
            raise FileNotFoundError("no warfarin export given; pass --data or set RCB_WARFARIN_DATA")
        records = ingest(data, scale_continuous=config.warfarin.scale_continuous)
        outcome = replay(records, config, workers=workers)
        write_artifacts(config, layout, outcome.runs, outcome.summary, outcome.baseline)
        return ExperimentResult(layout, outcome.runs, outcome.summary, outcome.baseline)

    params = build_sim_params(config)
    seeds = np.random.SeedSequence(config.seed).spawn(config.replications)
    runs = map_ordered(partial(simulate_replication, config, params), seeds, workers=workers)
    summary = average_summaries(
        [run.summarize(params.epsilon, params.K, strict=config.strict, window=config.gain_window) for run in runs]
    )
    write_artifacts(config, layout, runs, summary)
    return ExperimentResult(layout, runs, summary)
