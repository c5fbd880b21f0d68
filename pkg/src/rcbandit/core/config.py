"""Configuration settings for the rcbandit experiment runner."""

from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

LogLevel = Literal["TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"]


@dataclass(frozen=True)
class OutputLayout:
    """Resolved artifact paths for one experiment run."""

    root: Path
    steps_csv: Path
    summary_json: Path
    curves_csv: Path
    config_echo: Path
    confusion_csv: Path
    replications_dir: Path


class Settings(BaseSettings):
    """Process-wide settings loaded from environment variables (prefix ``RCB_``)."""

    output_root: Path = Path("runs")
    log_level: LogLevel = "INFO"
    log_file: Optional[Path] = None
    workers: int = 1
    float_format: str = "%.17g"
    warfarin_data: Optional[Path] = None

    model_config = SettingsConfigDict(env_prefix="RCB_", env_file=".env", extra="ignore")

    @field_validator("workers")
    @classmethod
    def _check_workers(cls, value: int) -> int:
        if value < 1:
            raise ValueError("workers must be at least 1")
        return value

    def resolve_output_dir(self, out: Optional[Path] = None) -> Path:
        """Return ``out`` if given, otherwise the configured output root."""
        return Path(out) if out is not None else self.output_root

    def get_output_layout(self, out: Optional[Path] = None) -> OutputLayout:
        """Resolve every artifact path under the run directory."""
        root = self.resolve_output_dir(out)
        return OutputLayout(
            root=root,
            steps_csv=root / "steps.csv",
            summary_json=root / "summary.json",
            curves_csv=root / "curves.csv",
            config_echo=root / "config.echo",
            confusion_csv=root / "confusion.csv",
            replications_dir=root / "replications",
        )

    def setup_directories(self, out: Optional[Path] = None) -> OutputLayout:
        """Create the run directory tree if it doesn't exist."""
        layout = self.get_output_layout(out)
        layout.root.mkdir(parents=True, exist_ok=True)
        layout.replications_dir.mkdir(parents=True, exist_ok=True)
        return layout


settings = Settings()
