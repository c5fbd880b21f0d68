"""Command-line front end: ``run-sim``, ``run-warfarin`` and ``show-config``."""

import argparse
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from rcbandit.bandit.agents import UserPolicy
from rcbandit.bandit.exploitation import MspeEstimator
from rcbandit.bandit.model import InflationKind
from rcbandit.bandit.rcb import OracleMode
from rcbandit.core.errors import RcbError
from rcbandit.core.logger_setup import configure_logging, get_logger
from rcbandit.schema import Mode, RunConfig
from rcbandit.simulation.environment import CovariateSampler
from rcbandit.simulation.presets import make_setting

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INVALID = 2

# flag destination -> SimulationParams field
_SIM_FLAGS = {
    "T": "horizon",
    "K": "K",
    "d": "d",
    "epsilon": "epsilon",
    "sigma": "noise_sigma",
    "prior_var": "prior_variance",
    "n_override": "n_override",
    "sample_size_cap": "sample_size_cap",
    "inflation": "inflation",
    "inflation_rate": "inflation_rate",
    "sampler": "sampler",
    "truth": "truth",
    "truth_seed": "truth_seed",
}
_WARFARIN_FLAGS = {
    "data": "data",
    "epsilon": "epsilon",
    "prior_var": "prior_variance",
    "perms": "permutations",
    "n_override": "n_override",
    "inflation": "inflation",
    "inflation_rate": "inflation_rate",
}
_RUN_FLAGS = {
    "replications": "replications",
    "seed": "seed",
    "out": "out",
    "oracle": "oracle",
    "user_policy": "user_policy",
    "strict": "strict",
    "mspe": "mspe_estimator",
    "workers": "workers",
    "window": "gain_window",
}


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON RunConfig to start from (e.g. a config.echo)")
    parser.add_argument("--seed", type=int, help="Master seed")
    parser.add_argument("--out", type=Path, help="Output directory (default: $RCB_OUTPUT_ROOT)")
    parser.add_argument("--strict", action="store_true", default=None, help="Count gains below -eps/K as violations")
    parser.add_argument("--mspe", choices=[e.value for e in MspeEstimator], help="Prediction-error source")
    parser.add_argument("--workers", type=int, help="Worker processes for replications")
    parser.add_argument("--window", type=int, help="Rolling window of the gain curve")
    parser.add_argument(
        "--user-policy",
        dest="user_policy",
        choices=[e.value for e in UserPolicy],
        help="How simulated users weigh a recommendation",
    )
    parser.add_argument("--epsilon", type=float, help="Incentive budget")
    parser.add_argument("--prior-var", dest="prior_var", type=float, help="Isotropic prior variance")
    parser.add_argument("--n-override", dest="n_override", type=int, help="Ad-hoc per-arm sample size")
    parser.add_argument("--inflation", choices=[e.value for e in InflationKind], help="Prior inflation schedule")
    parser.add_argument("--inflation-rate", dest="inflation_rate", type=float, help="Prior inflation rate")
    parser.add_argument("--log-level", dest="log_level", help="Console log level")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rcbandit", description="Incentive-compatible contextual bandit experiments")
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("run-sim", help="Run a synthetic experiment")
    _add_run_flags(sim)
    sim.add_argument("--setting", help="Preset 1-4 (default 1)")
    sim.add_argument("--K", type=int, help="Number of arms")
    sim.add_argument("--d", type=int, help="Covariate dimension")
    sim.add_argument("--T", type=int, help="Horizon")
    sim.add_argument("--sigma", type=float, help="Reward noise standard deviation")
    sim.add_argument("--sample-size-cap", dest="sample_size_cap", type=int, help="Cap on the theorem sample size")
    sim.add_argument("--sampler", choices=[e.value for e in CovariateSampler], help="Covariate distribution")
    sim.add_argument("--truth", choices=["prior", "fixed"], help="Draw the truth per replication or once")
    sim.add_argument("--truth-seed", dest="truth_seed", type=int, help="Seed of the fixed truth")
    sim.add_argument("--replications", type=int, help="Independent replications")
    sim.add_argument("--oracle", choices=[e.value for e in OracleMode], help="Regret reference")

    warfarin = commands.add_parser("run-warfarin", help="Replay the warfarin dosing data")
    _add_run_flags(warfarin)
    warfarin.add_argument("--data", type=Path, help="PharmGKB export CSV (default: $RCB_WARFARIN_DATA)")
    warfarin.add_argument("--perms", type=int, help="Random arrival orders to average over")

    show = commands.add_parser("show-config", help="Print the resolved configuration")
    source = show.add_mutually_exclusive_group()
    source.add_argument("--setting", help="Preset 1-4")
    source.add_argument("--config", type=Path, help="JSON RunConfig")
    return parser


def _overrides(args: argparse.Namespace, mapping: Dict[str, str]) -> Dict[str, Any]:
    return {field: getattr(args, flag) for flag, field in mapping.items() if getattr(args, flag, None) is not None}


def _load_base(path: Optional[Path]) -> Dict[str, Any]:
    if path is None:
        return {}
    return RunConfig.model_validate_json(path.read_text(encoding="utf-8")).model_dump(mode="json")


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge preset or config-file values with explicit flags; flags win."""
    base = _load_base(args.config)
    if args.command == "run-warfarin":
        base["mode"] = Mode.WARFARIN.value
        base["warfarin"] = {**(base.get("warfarin") or {}), **_overrides(args, _WARFARIN_FLAGS)}
    elif args.command == "run-sim" or args.setting is not None or not base:
        base["mode"] = Mode.SIM.value
        sim_flags = _overrides(args, _SIM_FLAGS)
        if args.setting is not None or base.get("sim") is None:
            preset = make_setting(args.setting or base.get("setting") or "1")
            base["setting"] = preset.name.value
            base["sim"] = preset.variant(**sim_flags).model_dump(mode="json")
        else:
            base["sim"] = {**base["sim"], **sim_flags}
    base.update(_overrides(args, _RUN_FLAGS))
    return RunConfig.model_validate(base)


def parse_config(argv: Optional[List[str]] = None) -> RunConfig:
    """Resolve command-line flags (and an optional ``--config`` file) into a RunConfig.

    A bare ``run-sim`` uses setting 1.

    Raises:
        ValidationError: If a value violates a field constraint
        ValueError: If the setting name is unknown
    """
    return resolve_config(build_parser().parse_args(argv))


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns 0 on success, 2 on invalid input, 1 on runtime failure."""
    args = build_parser().parse_args(argv)
    if getattr(args, "log_level", None):
        configure_logging(level=args.log_level.upper())
    try:
        config = resolve_config(args)
    except ValidationError as exc:
        logger.error(f"Invalid configuration:\n{exc}")
        return EXIT_INVALID
    except (ValueError, OSError) as exc:
        logger.error(f"Invalid configuration: {exc}")
        return EXIT_INVALID

    if args.command == "show-config":
        print(config.model_dump_json(indent=2))
        return EXIT_OK

    # deferred so show-config does not load the experiment stack
    from rcbandit.workflow import execute

    try:
        result = execute(config)
    except (RcbError, OSError, ValueError, IndexError) as exc:
        logger.error(f"Run failed: {exc}")
        return EXIT_RUNTIME
    logger.success(
        f"Done: cumulative regret {result.summary.cum_regret_final:.4f}, "
        f"violation fraction {result.summary.violation_fraction:.4f}"
    )
    return EXIT_OK
