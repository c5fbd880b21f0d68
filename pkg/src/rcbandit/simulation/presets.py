"""The four synthetic experiment settings and their parameter grids."""

from enum import Enum
from pathlib import Path
from typing import List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from rcbandit.bandit.model import InflationKind
from rcbandit.core.logger_setup import get_logger
from rcbandit.schema import SimulationParams

logger = get_logger(__name__)


class SettingName(str, Enum):
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    S4 = "S4"


class SettingPreset(BaseModel):
    """A named experiment setting; list-valued fields are the grid it sweeps.

    Attributes:
        name: Setting identifier
        horizon: Rounds T
        arms: Grid over K
        dims: Grid over d
        noise_sigma: Reward noise standard deviation
        epsilons: Grid over the incentive budget
        prior_variances: Grid over the isotropic prior variance
        first_arm_prior_mean: Fill value of arm 0's prior mean (others are 0)
        n_overrides: Grid over the ad-hoc sample size (None uses the theorem value)
        inflations: Grid over prior inflation schedules
        inflation_rate: Rate shared by every inflation schedule
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: SettingName
    horizon: int
    arms: List[int]
    dims: List[int]
    noise_sigma: float
    epsilons: List[float]
    tau_prior: float
    rho_prior: float
    tau_post: float
    rho_post: float
    prior_variances: List[float]
    first_arm_prior_mean: float = 0.0
    n_overrides: List[Optional[int]] = Field(default_factory=lambda: [None])
    inflations: List[InflationKind] = Field(default_factory=lambda: [InflationKind.NONE])
    inflation_rate: float = 0.0

    def variant(
        self,
        *,
        K: Optional[int] = None,
        d: Optional[int] = None,
        epsilon: Optional[float] = None,
        prior_variance: Optional[float] = None,
        n_override: Optional[int] = None,
        inflation: Optional[InflationKind] = None,
        horizon: Optional[int] = None,
        noise_sigma: Optional[float] = None,
        inflation_rate: Optional[float] = None,
        **extra,
    ) -> SimulationParams:
        """Resolve the grid into one parameter bundle.

        Unset choices take the first grid value. ``extra`` passes through to
        SimulationParams (sampler, truth mode, sample size cap, ...).
        """
        arms = K if K is not None else self.arms[0]
        fill = [self.first_arm_prior_mean] + [0.0] * (arms - 1) if self.first_arm_prior_mean else []
        return SimulationParams(
            horizon=horizon if horizon is not None else self.horizon,
            K=arms,
            d=d if d is not None else self.dims[0],
            noise_sigma=noise_sigma if noise_sigma is not None else self.noise_sigma,
            epsilon=epsilon if epsilon is not None else self.epsilons[0],
            tau_prior=self.tau_prior,
            rho_prior=self.rho_prior,
            tau_post=self.tau_post,
            rho_post=self.rho_post,
            prior_variance=prior_variance if prior_variance is not None else self.prior_variances[0],
            prior_mean_fill=fill,
            n_override=n_override if n_override is not None else self.n_overrides[0],
            inflation=inflation if inflation is not None else self.inflations[0],
            inflation_rate=inflation_rate if inflation_rate is not None else self.inflation_rate,
            **extra,
        )


_PRESETS = {
    SettingName.S1: dict(
        horizon=100_000,
        arms=[2, 5, 10],
        dims=[3, 5, 10],
        noise_sigma=0.05,
        epsilons=[0.05],
        tau_prior=0.01,
        rho_prior=0.95,
        tau_post=0.01,
        rho_post=0.95,
        prior_variances=[0.2],
    ),
    SettingName.S2: dict(
        horizon=100_000,
        arms=[2, 5, 10],
        dims=[3, 5, 10],
        noise_sigma=0.05,
        epsilons=[0.05],
        tau_prior=0.01,
        rho_prior=0.95,
        tau_post=0.01,
        rho_post=0.95,
        prior_variances=[0.2],
        n_overrides=[10, 100, 1000],
    ),
    SettingName.S3: dict(
        horizon=50_000,
        arms=[5],
        dims=[5],
        noise_sigma=0.05,
        epsilons=[0.01, 0.03, 0.05],
        tau_prior=0.01,
        rho_prior=0.95,
        tau_post=0.01,
        rho_post=0.95,
        prior_variances=[1 / 3, 1 / 5, 1 / 10],
    ),
    SettingName.S4: dict(
        horizon=50_000,
        arms=[5],
        dims=[5],
        noise_sigma=0.05,
        epsilons=[0.05],
        tau_prior=0.01,
        rho_prior=0.95,
        tau_post=0.01,
        rho_post=0.95,
        prior_variances=[0.02, 0.04, 0.1],
        first_arm_prior_mean=1.0,
        inflations=[InflationKind.LINEAR, InflationKind.SQRT, InflationKind.LOG],
        inflation_rate=0.01,
    ),
}


def parse_setting_name(name: Union[str, int, SettingName]) -> SettingName:
    """Accept ``S3``, ``s3``, ``3`` or ``SettingName.S3``."""
    if isinstance(name, SettingName):
        return name
    text = str(name).strip().upper()
    if not text.startswith("S"):
        text = f"S{text}"
    try:
        return SettingName(text)
    except ValueError:
        raise ValueError(f"unknown setting {name!r}; expected one of 1, 2, 3, 4") from None


def make_setting(name: Union[str, int, SettingName]) -> SettingPreset:
    setting = parse_setting_name(name)
    return SettingPreset(name=setting, **_PRESETS[setting])


def dump_preset(preset: SettingPreset, path: Path) -> Path:
    """Write the preset as indented JSON and return the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(preset.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info(f"Preset {preset.name.value} written to {path}")
    return path
