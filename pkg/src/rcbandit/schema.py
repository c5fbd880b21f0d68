"""Validated run configuration."""

from enum import Enum
from pathlib import Path
from typing import List, Optional

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from rcbandit.bandit.agents import UserPolicy
from rcbandit.bandit.exploitation import MspeEstimator
from rcbandit.bandit.model import InflationKind
from rcbandit.bandit.rcb import InflationClock, OracleMode
from rcbandit.simulation.environment import CovariateSampler


def _check_epsilon(value: float) -> float:
    if not 0 <= value < 1:
        raise ValueError("epsilon must lie in [0,1)")
    return value


class Mode(str, Enum):
    SIM = "sim"
    WARFARIN = "warfarin"


class TruthMode(str, Enum):
    PRIOR = "prior"
    FIXED = "fixed"


class SimulationParams(BaseModel):
    """Concrete parameter bundle of one synthetic experiment."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    horizon: int = Field(ge=1)
    K: int = Field(ge=1)
    d: int = Field(ge=1)
    noise_sigma: float = Field(default=0.05, ge=0)
    epsilon: float = 0.05
    tau_prior: float = Field(default=0.01, gt=0)
    rho_prior: float = Field(default=0.95, gt=0, le=1)
    tau_post: float = Field(default=0.01, gt=0)
    rho_post: float = Field(default=0.95, gt=0, le=1)
    prior_variance: float = Field(default=0.2, gt=0)
    # one scalar per arm filling that arm's prior mean vector; empty means all zeros
    prior_mean_fill: List[float] = Field(default_factory=list)
    n_override: Optional[int] = Field(default=None, ge=1)
    sample_size_cap: Optional[int] = Field(default=None, ge=1)
    inflation: InflationKind = InflationKind.NONE
    inflation_rate: float = Field(default=0.0, ge=0)
    inflate_from: InflationClock = InflationClock.EXPLOITATION
    sampler: CovariateSampler = CovariateSampler.BOX
    truth: TruthMode = TruthMode.PRIOR
    truth_seed: int = Field(default=0, ge=0)

    @field_validator("epsilon")
    @classmethod
    def _validate_epsilon(cls, value: float) -> float:
        return _check_epsilon(value)

    @model_validator(mode="after")
    def _check_fill(self) -> "SimulationParams":
        if self.prior_mean_fill and len(self.prior_mean_fill) != self.K:
            raise ValueError(f"prior_mean_fill needs {self.K} entries, got {len(self.prior_mean_fill)}")
        return self

    def prior_means(self) -> List[NDArray[np.float64]]:
        fill = self.prior_mean_fill or [0.0] * self.K
        return [np.full(self.d, value, dtype=np.float64) for value in fill]


class WarfarinParams(BaseModel):
    """Replay constants for the warfarin dosing experiment."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    data: Optional[Path] = None
    epsilon: float = 0.025
    prior_variance: float = Field(default=0.4, gt=0)
    tau_prior: float = Field(default=0.005, gt=0)
    rho_prior: float = Field(default=0.95, gt=0, le=1)
    tau_post: float = Field(default=0.005, gt=0)
    rho_post: float = Field(default=0.95, gt=0, le=1)
    medium_prior_mean: float = 0.05
    permutations: int = Field(default=10, ge=1)
    n_override: Optional[int] = Field(default=None, ge=1)
    noise_sigma: Optional[float] = Field(default=None, gt=0)
    inflation: InflationKind = InflationKind.LINEAR
    inflation_rate: float = Field(default=0.001, ge=0)
    inflate_from: InflationClock = InflationClock.EXPLOITATION
    scale_continuous: bool = True

    @field_validator("epsilon")
    @classmethod
    def _validate_epsilon(cls, value: float) -> float:
        return _check_epsilon(value)


class RunConfig(BaseModel):
    """Fully resolved experiment configuration, echoed next to the outputs."""

    model_config = ConfigDict(extra="forbid")

    mode: Mode = Mode.SIM
    setting: Optional[str] = None
    sim: Optional[SimulationParams] = None
    warfarin: Optional[WarfarinParams] = None
    replications: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0)
    out: Optional[Path] = None
    oracle: OracleMode = OracleMode.TRUE
    user_policy: UserPolicy = UserPolicy.POSTERIOR
    strict: bool = False
    mspe_estimator: MspeEstimator = MspeEstimator.ANALYTIC
    cv_folds: int = Field(default=5, ge=2)
    c3: float = Field(default=1.0, gt=0)
    delta: float = Field(default=0.05, gt=0, lt=1)
    ingest_deviations: bool = False
    gain_window: int = Field(default=500, ge=1)
    workers: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_mode(self) -> "RunConfig":
        if self.mode is Mode.SIM and self.sim is None:
            raise ValueError("sim mode needs a simulation parameter bundle")
        if self.mode is Mode.WARFARIN and self.warfarin is None:
            raise ValueError("warfarin mode needs warfarin parameters")
        return self

    @property
    def epsilon(self) -> float:
        if self.mode is Mode.SIM:
            return self.sim.epsilon
        return self.warfarin.epsilon

    @property
    def runs(self) -> int:
        """Replications in sim mode, patient permutations in warfarin mode."""
        if self.mode is Mode.WARFARIN:
            return self.warfarin.permutations
        return self.replications
