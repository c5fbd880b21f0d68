"""Load the PharmGKB warfarin export into patient records.

The feature layout comes from ``manifest.json``: one entry per feature naming the
source column and how the column becomes a number. Missing values become 0.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from rcbandit.core.errors import SchemaError
from rcbandit.core.logger_setup import get_logger

logger = get_logger(__name__)

DAYS_PER_WEEK = 7.0
LOW_DOSE_LIMIT = 3.0
HIGH_DOSE_LIMIT = 7.0

_CODE_SEPARATORS = re.compile(r"[;,]")


class DoseBucket(IntEnum):
    LOW = 0
    MEDIUM = 1
    HIGH = 2


def bucket_dose(dose_mg_per_day: float) -> DoseBucket:
    """Low below 3 mg/day, Medium on [3, 7], High above 7."""
    if not dose_mg_per_day > 0:
        raise ValueError(f"dose must be positive, got {dose_mg_per_day}")
    if dose_mg_per_day < LOW_DOSE_LIMIT:
        return DoseBucket.LOW
    if dose_mg_per_day <= HIGH_DOSE_LIMIT:
        return DoseBucket.MEDIUM
    return DoseBucket.HIGH


@dataclass(frozen=True)
class DoseBounds:
    low: float
    high: float


def scale_dose(dose: float, bounds: DoseBounds) -> float:
    """Map a dose onto [0, 1] with the dataset minimum at 0."""
    span = bounds.high - bounds.low
    if span <= 0:
        raise ValueError("dose bounds must satisfy max > min")
    return (dose - bounds.low) / span


FeatureKind = Literal["constant", "category", "code", "binary", "numeric", "continuous"]


class FeatureSpec(BaseModel):
    """One manifest entry.

    ``kind`` is one of ``constant``, ``category`` (1 when the column equals
    ``value``), ``code`` (1 when ``value`` is among the ``;``-separated codes),
    ``binary`` (1 when the column is 1), ``numeric`` or ``continuous`` (min-max
    scaled when requested).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    kind: FeatureKind
    column: Optional[str] = None
    value: Optional[str] = None

    @model_validator(mode="after")
    def _check_sources(self) -> "FeatureSpec":
        if self.kind != "constant" and self.column is None:
            raise ValueError(f"feature {self.name} of kind {self.kind} needs a column")
        if self.kind in ("category", "code") and self.value is None:
            raise ValueError(f"feature {self.name} of kind {self.kind} needs a value")
        return self


class Manifest(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    version: str
    dose_column: str
    dose_unit: str
    features: Tuple[FeatureSpec, ...] = Field(min_length=1)

    @property
    def names(self) -> List[str]:
        return [spec.name for spec in self.features]

    @property
    def required_columns(self) -> List[str]:
        columns = [self.dose_column]
        for spec in self.features:
            if spec.column is not None and spec.column not in columns:
                columns.append(spec.column)
        return columns


def _parse_manifest(text: str, source: str) -> Manifest:
    try:
        return Manifest.model_validate_json(text)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or "manifest"
        raise SchemaError(f"invalid manifest {source}: {where}: {first['msg']}") from exc


@lru_cache(maxsize=1)
def _default_manifest() -> Manifest:
    text = resources.files("rcbandit.warfarin").joinpath("manifest.json").read_text(encoding="utf-8")
    return _parse_manifest(text, "manifest.json")


def load_manifest(path: Optional[Path] = None) -> Manifest:
    """Read a manifest file; without ``path`` the shipped manifest is used.

    Raises:
        SchemaError: If the file is not a valid manifest
        OSError: If the file cannot be opened
    """
    if path is None:
        return _default_manifest()
    return _parse_manifest(Path(path).read_text(encoding="utf-8"), str(path))


@dataclass(frozen=True, eq=False)
class PatientRecord:
    """One patient with a known stable dose.

    Attributes:
        features: Feature vector in manifest order
        optimal_dose_mg_per_day: Stable therapeutic dose
        dose_bucket: Bucket of the stable dose
        scaled_dose: Dose min-max scaled over the whole dataset
    """

    features: NDArray[np.float64]
    optimal_dose_mg_per_day: float
    dose_bucket: DoseBucket
    scaled_dose: float


def _normalized(series: pd.Series) -> pd.Series:
    return series.fillna("").astype(str).str.strip().str.lower()


def _feature_column(frame: pd.DataFrame, spec: FeatureSpec, scale_continuous: bool) -> NDArray[np.float64]:
    if spec.kind == "constant":
        return np.ones(len(frame))
    column = frame[spec.column]
    if spec.kind == "category":
        return (_normalized(column) == spec.value.lower()).to_numpy(dtype=np.float64)
    if spec.kind == "code":
        codes = _normalized(column).map(lambda text: {code.strip() for code in _CODE_SEPARATORS.split(text)})
        return codes.map(lambda found: spec.value in found).to_numpy(dtype=np.float64)
    values = pd.to_numeric(column, errors="coerce")
    if spec.kind == "binary":
        return (values == 1).to_numpy(dtype=np.float64)
    if spec.kind == "continuous" and scale_continuous:
        low, high = values.min(), values.max()
        if pd.notna(low) and high > low:
            values = (values - low) / (high - low)
        else:
            values = values * 0.0
    return values.fillna(0.0).to_numpy(dtype=np.float64)


def build_features(frame: pd.DataFrame, manifest: Manifest, scale_continuous: bool = True) -> NDArray[np.float64]:
    """n x len(manifest.features) design matrix with missing values set to 0."""
    columns = [_feature_column(frame, spec, scale_continuous) for spec in manifest.features]
    return np.column_stack(columns)


def read_export(path: Path) -> pd.DataFrame:
    """Read the export as strings; numeric parsing happens per feature."""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise SchemaError(f"cannot parse {path}: {exc}") from exc
    frame.columns = [str(column).strip() for column in frame.columns]
    return frame


def validate_columns(frame: pd.DataFrame, manifest: Manifest) -> None:
    missing = [column for column in manifest.required_columns if column not in frame.columns]
    if missing:
        raise SchemaError(f"export is missing {len(missing)} required column(s)", column=missing[0])


def records_from_frame(
    frame: pd.DataFrame,
    manifest: Optional[Manifest] = None,
    scale_continuous: bool = True,
) -> List[PatientRecord]:
    """Build patient records from an export already in memory."""
    manifest = manifest or load_manifest()
    validate_columns(frame, manifest)

    weekly = pd.to_numeric(frame[manifest.dose_column], errors="coerce")
    keep = weekly.notna() & (weekly > 0)
    dropped = int((~keep).sum())
    if dropped:
        logger.info(f"Dropping {dropped} rows without a positive therapeutic dose")
    frame = frame.loc[keep].reset_index(drop=True)
    daily = (weekly[keep] / DAYS_PER_WEEK).to_numpy(dtype=np.float64)
    if daily.size == 0:
        raise SchemaError("no rows with a therapeutic dose", column=manifest.dose_column)

    features = build_features(frame, manifest, scale_continuous)
    bounds = DoseBounds(float(daily.min()), float(daily.max()))
    # a single distinct dose maps to 0
    scaled = [scale_dose(dose, bounds) if bounds.high > bounds.low else 0.0 for dose in daily]
    return [
        PatientRecord(
            features=features[row],
            optimal_dose_mg_per_day=float(daily[row]),
            dose_bucket=bucket_dose(float(daily[row])),
            scaled_dose=float(scaled[row]),
        )
        for row in range(len(daily))
    ]


def ingest(
    path: Path,
    manifest: Optional[Manifest] = None,
    scale_continuous: bool = True,
) -> List[PatientRecord]:
    """Load the export at ``path`` into patient records.

    Args:
        path: PharmGKB export in CSV form
        manifest: Feature manifest, the shipped one by default
        scale_continuous: Min-max scale height and weight before zero-filling

    Returns:
        One record per patient with a positive therapeutic dose

    Raises:
        SchemaError: If the file cannot be parsed or lacks a required column
        OSError: If the file cannot be opened
    """
    frame = read_export(Path(path))
    records = records_from_frame(frame, manifest, scale_continuous)
    logger.info(f"Loaded {len(records)} patients with {records[0].features.shape[0]} features from {path}")
    return records


def stack(records: Sequence[PatientRecord]) -> Tuple[NDArray[np.float64], NDArray[np.int64], NDArray[np.float64]]:
    """Features, buckets and scaled doses as arrays."""
    features = np.vstack([record.features for record in records])
    buckets = np.asarray([int(record.dose_bucket) for record in records], dtype=np.int64)
    scaled = np.asarray([record.scaled_dose for record in records], dtype=np.float64)
    return features, buckets, scaled
