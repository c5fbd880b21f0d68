"""Regret, incentive-gain series and decision-quality metrics over a run log."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from enum import Enum
from typing import Iterator, List, Optional, Sequence

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, Field

from rcbandit.core.errors import EmptyLogError

DEFAULT_GAIN_WINDOW = 500

_STAGE_ORDER = {"MPASC": 0, "RASC": 1, "EXPLOIT": 2}


class Stage(str, Enum):
    MPASC = "MPASC"
    RASC = "RASC"
    EXPLOIT = "EXPLOIT"


@dataclass(frozen=True, slots=True)
class StepRecord:
    """One round of a run.

    Attributes:
        t: Round index, starting at 1
        stage: Stage that issued the recommendation
        recommended: Arm recommended (I_t)
        chosen: Arm the user took (a_t)
        reward: Realized reward of the chosen arm
        instant_regret: Oracle regret of the chosen arm
        dbic_gain: Incentive gain of the recommendation (0 with a single arm)
        followed: Whether the user followed
        optimal_arm: Best arm under the true means
    """

    t: int
    stage: Stage
    recommended: int
    chosen: int
    reward: float
    instant_regret: float
    dbic_gain: float
    followed: bool
    optimal_arm: int


STEP_COLUMNS = [f.name for f in fields(StepRecord)]


class RunLog:
    """Ordered step records of one run."""

    def __init__(self, rows: Optional[Sequence[StepRecord]] = None) -> None:
        self._rows: List[StepRecord] = []
        for row in rows or ():
            self.append(row)

    def append(self, row: StepRecord) -> None:
        """Append a row, enforcing consecutive rounds and forward-only stages."""
        if self._rows:
            last = self._rows[-1]
            if row.t != last.t + 1:
                raise ValueError(f"round {row.t} does not follow round {last.t}")
            if _STAGE_ORDER[Stage(row.stage).value] < _STAGE_ORDER[Stage(last.stage).value]:
                raise ValueError(f"stage {row.stage} cannot follow stage {last.stage}")
        self._rows.append(row)

    def __len__(self) -> int:
        return len(self._rows)

    def __iter__(self) -> Iterator[StepRecord]:
        return iter(self._rows)

    def __getitem__(self, index: int) -> StepRecord:
        return self._rows[index]

    def column(self, name: str) -> NDArray:
        """One field across rows; enum members are stored by value."""
        values = [getattr(row, name) for row in self._rows]
        return np.asarray([value.value if isinstance(value, Enum) else value for value in values])

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([asdict(row) for row in self._rows], columns=STEP_COLUMNS)
        frame["stage"] = frame["stage"].map(lambda stage: Stage(stage).value)
        return frame


def per_step_regret(oracle_means: ArrayLike, chosen: int) -> float:
    """Gap between the best oracle mean and the chosen arm's oracle mean."""
    means = np.asarray(oracle_means, dtype=np.float64)
    return float(means.max() - means[chosen])


def fraction_incorrect(log: RunLog) -> float:
    """Share of rounds whose chosen arm is not the optimal arm."""
    if len(log) == 0:
        raise EmptyLogError("fraction_incorrect needs at least one logged round")
    return float(np.mean(log.column("chosen") != log.column("optimal_arm")))


def confusion_table(true_arms: ArrayLike, chosen_arms: ArrayLike, K: int) -> NDArray[np.float64]:
    """Row-normalized table: rows are true arms, columns assigned arms."""
    counts = np.zeros((K, K))
    np.add.at(counts, (np.asarray(true_arms, dtype=int), np.asarray(chosen_arms, dtype=int)), 1.0)
    totals = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)


def class_proportions(true_arms: ArrayLike, K: int) -> NDArray[np.float64]:
    counts = np.bincount(np.asarray(true_arms, dtype=int), minlength=K).astype(np.float64)
    return counts / counts.sum()


def weighted_risk_score(confusion: ArrayLike, class_weights: ArrayLike) -> float:
    """+1 per correct and -1 per incorrect decision, weighted by true-class proportion."""
    accuracy = np.diag(np.asarray(confusion, dtype=np.float64))
    weights = np.asarray(class_weights, dtype=np.float64)
    return float(np.sum(weights * (2.0 * accuracy - 1.0)))


@dataclass(frozen=True)
class GainSeries:
    """Raw and rolling-mean incentive gains with the ``-epsilon`` reference level."""

    t: NDArray[np.int64]
    raw: NDArray[np.float64]
    rolling: NDArray[np.float64]
    floor: float


def gain_series(log: RunLog, window: int = DEFAULT_GAIN_WINDOW, epsilon: float = 0.0) -> GainSeries:
    """Trailing rolling mean of the gain; the first ``window - 1`` points average the prefix."""
    if window < 1:
        raise ValueError("window must be at least 1")
    raw = log.column("dbic_gain").astype(np.float64)
    rolling = pd.Series(raw).rolling(window, min_periods=1).mean().to_numpy()
    return GainSeries(t=log.column("t").astype(np.int64), raw=raw, rolling=rolling, floor=-epsilon)


def violation_threshold(epsilon: float, K: int, strict: bool = False) -> float:
    return -epsilon / K if strict else -epsilon


def violation_fraction(log: RunLog, epsilon: float, K: int, strict: bool = False) -> float:
    """Share of post-MPASC rounds whose gain falls below the threshold."""
    stages = log.column("stage")
    mask = np.asarray([Stage(stage) is not Stage.MPASC for stage in stages], dtype=bool)
    if not mask.any():
        return 0.0
    gains = log.column("dbic_gain").astype(np.float64)[mask]
    return float(np.mean(gains < violation_threshold(epsilon, K, strict)))


class MetricsSummary(BaseModel):
    """Per-run (or averaged) evaluation results."""

    n_steps: int
    cum_regret_final: float
    violation_fraction: float
    fraction_incorrect: float
    weighted_risk_score: float
    confusion_table: List[List[float]]
    class_proportions: List[float]
    cold_start_rounds: Optional[float] = None
    sample_size: Optional[int] = None
    exploration_rate: Optional[float] = None
    cumulative_regret: List[float] = Field(default_factory=list, exclude=True)
    rolling_gain: List[float] = Field(default_factory=list, exclude=True)


def summarize(
    log: RunLog,
    epsilon: float,
    K: int,
    *,
    strict: bool = False,
    window: int = DEFAULT_GAIN_WINDOW,
) -> MetricsSummary:
    """Fold a run log into a MetricsSummary."""
    if len(log) == 0:
        raise EmptyLogError("cannot summarize an empty log")
    cumulative = np.cumsum(log.column("instant_regret").astype(np.float64))
    true_arms = log.column("optimal_arm")
    confusion = confusion_table(true_arms, log.column("chosen"), K)
    proportions = class_proportions(true_arms, K)
    return MetricsSummary(
        n_steps=len(log),
        cum_regret_final=float(cumulative[-1]),
        violation_fraction=violation_fraction(log, epsilon, K, strict),
        fraction_incorrect=fraction_incorrect(log),
        weighted_risk_score=weighted_risk_score(confusion, proportions),
        confusion_table=confusion.tolist(),
        class_proportions=proportions.tolist(),
        cumulative_regret=cumulative.tolist(),
        rolling_gain=gain_series(log, window, epsilon).rolling.tolist(),
    )


def _mean_curve(curves: Sequence[List[float]]) -> List[float]:
    # runs may stop at different lengths only if horizons differ; align on the shortest
    length = min(len(curve) for curve in curves)
    return np.mean([curve[:length] for curve in curves], axis=0).tolist()


def average_summaries(summaries: Sequence[MetricsSummary]) -> MetricsSummary:
    """Average scalar fields, confusion tables and curves over replications."""
    if not summaries:
        raise EmptyLogError("no summaries to average")

    def mean_of(name: str) -> Optional[float]:
        values = [getattr(s, name) for s in summaries if getattr(s, name) is not None]
        return float(np.mean(values)) if values else None

    sample_sizes = [s.sample_size for s in summaries if s.sample_size is not None]
    return MetricsSummary(
        n_steps=summaries[0].n_steps,
        cum_regret_final=mean_of("cum_regret_final"),
        violation_fraction=mean_of("violation_fraction"),
        fraction_incorrect=mean_of("fraction_incorrect"),
        weighted_risk_score=mean_of("weighted_risk_score"),
        confusion_table=np.mean([s.confusion_table for s in summaries], axis=0).tolist(),
        class_proportions=np.mean([s.class_proportions for s in summaries], axis=0).tolist(),
        cold_start_rounds=mean_of("cold_start_rounds"),
        sample_size=sample_sizes[0] if sample_sizes else None,
        exploration_rate=mean_of("exploration_rate"),
        cumulative_regret=_mean_curve([s.cumulative_regret for s in summaries]),
        rolling_gain=_mean_curve([s.rolling_gain for s in summaries]),
    )


def curves_frame(summary: MetricsSummary, epsilon: float) -> pd.DataFrame:
    """Long-format ``series, t, value`` table for plotting."""
    t = np.arange(1, len(summary.cumulative_regret) + 1)
    parts = [
        pd.DataFrame({"series": "cumulative_regret", "t": t, "value": summary.cumulative_regret}),
        pd.DataFrame({"series": "gain_rolling_mean", "t": t[: len(summary.rolling_gain)], "value": summary.rolling_gain}),
        pd.DataFrame({"series": "gain_floor", "t": t, "value": -epsilon}),
    ]
    return pd.concat(parts, ignore_index=True)
