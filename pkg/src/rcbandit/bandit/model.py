"""Conjugate Gaussian linear arm models.

Each arm carries a Gaussian belief over its reward coefficients. Rewards are
``y = x @ beta + noise`` with known noise standard deviation, so the posterior
after observing ``(X, y)`` is again Gaussian:

    precision_post = inv(cov_0) + X.T @ X / sigma**2
    mean_post = cov_post @ (inv(cov_0) @ mean_0 + X.T @ y / sigma**2)

This is ridge regression with the data-dependent regularizer ``sigma**2 * inv(cov_0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigvalsh

from rcbandit.core.errors import CovarianceError, DimensionMismatchError
from rcbandit.core.logger_setup import get_logger

logger = get_logger(__name__)

Observation = Tuple[NDArray[np.float64], float]
ArmObservation = Tuple[NDArray[np.float64], int, float]

MSPE_FLOOR = 1e-12
PHI0_FLOOR = 1e-6


def _as_vector(x: ArrayLike, d: int, what: str = "covariate") -> NDArray[np.float64]:
    vector = np.asarray(x, dtype=np.float64).reshape(-1)
    if vector.shape[0] != d:
        raise DimensionMismatchError(d, vector.shape[0], what)
    return vector


def _symmetrize(matrix: NDArray[np.float64]) -> NDArray[np.float64]:
    return (matrix + matrix.T) / 2.0


def _cholesky(matrix: NDArray[np.float64]):
    try:
        return cho_factor(matrix, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise CovarianceError("covariance matrix is not positive definite") from exc


@dataclass(frozen=True, eq=False)
class ArmBelief:
    """Gaussian belief over one arm's coefficient vector.

    Attributes:
        mean: Coefficient mean, length d
        covariance: d x d symmetric positive-definite covariance
        noise_sigma: Reward noise standard deviation
    """

    mean: NDArray[np.float64]
    covariance: NDArray[np.float64]
    noise_sigma: float

    def __post_init__(self) -> None:
        mean = np.array(self.mean, dtype=np.float64).reshape(-1)
        covariance = np.atleast_2d(np.array(self.covariance, dtype=np.float64))
        d = mean.shape[0]
        if covariance.shape != (d, d):
            raise DimensionMismatchError(d, covariance.shape[0], "covariance")
        if not np.array_equal(covariance, covariance.T):
            raise CovarianceError("covariance matrix is not symmetric")
        if self.noise_sigma <= 0:
            raise ValueError("noise_sigma must be positive")
        mean.setflags(write=False)
        covariance.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", covariance)

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    @classmethod
    def isotropic(cls, mean: ArrayLike, variance: float, noise_sigma: float) -> "ArmBelief":
        """Build a belief with covariance ``variance * I``."""
        mean_vector = np.asarray(mean, dtype=np.float64).reshape(-1)
        return cls(mean_vector, variance * np.eye(mean_vector.shape[0]), noise_sigma)


def posterior_from_statistics(
    belief: ArmBelief,
    xtx: NDArray[np.float64],
    xty: NDArray[np.float64],
    *,
    prior_scale: float = 1.0,
) -> ArmBelief:
    """Posterior given sufficient statistics ``X.T @ X`` and ``X.T @ y``.

    Args:
        belief: Prior belief
        xtx: Gram matrix of the observed covariates
        xty: Covariate-weighted reward sum
        prior_scale: Multiplier applied to the prior covariance first

    Returns:
        Posterior belief

    Raises:
        CovarianceError: If the prior covariance is not positive definite
    """
    prior_factor = _cholesky(belief.covariance * prior_scale)
    sigma2 = belief.noise_sigma**2
    d = belief.dim
    prior_precision = cho_solve(prior_factor, np.eye(d))
    precision = _symmetrize(prior_precision + xtx / sigma2)
    covariance = _symmetrize(cho_solve(_cholesky(precision), np.eye(d)))
    mean = covariance @ (cho_solve(prior_factor, belief.mean) + xty / sigma2)
    return ArmBelief(mean, covariance, belief.noise_sigma)


def posterior_update(belief: ArmBelief, observations: Sequence[Observation]) -> ArmBelief:
    """Conjugate update of one arm belief with a batch of ``(x, y)`` pairs.

    Returns the input belief itself when ``observations`` is empty.

    Raises:
        DimensionMismatchError: If a covariate does not have length d
        CovarianceError: If the prior covariance is not positive definite
    """
    if len(observations) == 0:
        return belief
    _cholesky(belief.covariance)
    d = belief.dim
    design = np.vstack([_as_vector(x, d) for x, _ in observations])
    rewards = np.asarray([float(y) for _, y in observations], dtype=np.float64)
    return posterior_from_statistics(belief, design.T @ design, design.T @ rewards)


def predict_mean(belief: ArmBelief, x: ArrayLike) -> float:
    """Point prediction ``x @ mean``."""
    return float(_as_vector(x, belief.dim) @ belief.mean)


class InflationKind(str, Enum):
    LINEAR = "linear"
    SQRT = "sqrt"
    LOG = "log"
    NONE = "none"


@dataclass(frozen=True)
class InflationSchedule:
    """Prior-variance inflation over time.

    ``scale(t)`` is ``1 + c t`` (linear), ``1 + c sqrt(t)`` (sqrt),
    ``1 + c log(1 + t)`` (log) or ``1`` (none).
    """

    kind: InflationKind = InflationKind.NONE
    rate: float = 0.0
    base_lambda: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", InflationKind(self.kind))
        if self.rate < 0:
            raise ValueError("inflation rate must be nonnegative")
        if self.base_lambda <= 0:
            raise ValueError("base_lambda must be positive")

    def scale(self, t: float) -> float:
        if t <= 0 or self.kind is InflationKind.NONE:
            return 1.0
        if self.kind is InflationKind.LINEAR:
            return 1.0 + self.rate * t
        if self.kind is InflationKind.SQRT:
            return 1.0 + self.rate * math.sqrt(t)
        return 1.0 + self.rate * math.log1p(t)

    def lambda_at(self, t: float) -> float:
        """Minimum prior eigenvalue implied at time t."""
        return self.base_lambda * self.scale(t)


def inflate(schedule: InflationSchedule, belief: ArmBelief, t: float) -> ArmBelief:
    """Scale the belief covariance by ``schedule.scale(t)``; the mean is kept."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    factor = schedule.scale(t)
    if factor == 1.0:
        return belief
    return ArmBelief(belief.mean, belief.covariance * factor, belief.noise_sigma)


@dataclass(frozen=True)
class MspeConfig:
    """Constants of the analytic prediction-error bound ``c3 sigma^2 d / (phi0 n)``."""

    c3: float = 1.0
    phi0: float = 1.0
    d: int = 1
    noise_sigma: float = 1.0
    delta: float = 0.05

    def __post_init__(self) -> None:
        if self.c3 <= 0 or self.phi0 <= 0 or self.d <= 0:
            raise ValueError("c3, phi0 and d must be positive")
        # sigma = 0 is allowed and gives a zero bound
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0,1)")


def mspe_bound(cfg: MspeConfig, n: int) -> float:
    """Analytic mean squared prediction error after ``n`` training samples."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return cfg.c3 * cfg.noise_sigma**2 * cfg.d / (cfg.phi0 * n)


def fit_offline(
    priors: Sequence[ArmBelief],
    epoch_data: Iterable[ArmObservation],
) -> List[ArmBelief]:
    """Per-arm posterior update on ``(x, arm, y)`` rows.

    Arms without rows keep their input belief.
    """
    per_arm: List[List[Observation]] = [[] for _ in priors]
    for x, arm, y in epoch_data:
        if not 0 <= arm < len(priors):
            raise IndexError(f"arm index {arm} outside [0, {len(priors)})")
        per_arm[arm].append((x, y))
    return [posterior_update(prior, rows) for prior, rows in zip(priors, per_arm)]


def cv_mspe(
    priors: Sequence[ArmBelief],
    data: Sequence[ArmObservation],
    *,
    folds: int = 5,
    rng: Optional[np.random.Generator] = None,
) -> Optional[float]:
    """K-fold cross-validated squared prediction error of the posterior mean.

    Returns None when there are fewer than two rows to split.
    """
    n = len(data)
    if n < 2:
        return None
    folds = max(2, min(folds, n))
    generator = rng if rng is not None else np.random.default_rng(0)
    order = generator.permutation(n)
    errors: List[float] = []
    for held_out in np.array_split(order, folds):
        held = set(int(i) for i in held_out)
        train = [row for i, row in enumerate(data) if i not in held]
        fitted = fit_offline(priors, train)
        for i in held_out:
            x, arm, y = data[int(i)]
            errors.append((predict_mean(fitted[arm], x) - y) ** 2)
    return max(float(np.mean(errors)), MSPE_FLOOR)


def empirical_phi0(features: ArrayLike) -> float:
    """Smallest eigenvalue of the empirical second-moment matrix, floored at 1e-6."""
    design = np.atleast_2d(np.asarray(features, dtype=np.float64))
    second_moment = design.T @ design / design.shape[0]
    return max(float(eigvalsh(second_moment)[0]), PHI0_FLOOR)


@dataclass(frozen=True, eq=False)
class SufficientStatistics:
    """Running ``X.T @ X``, ``X.T @ y`` and row count for one arm."""

    xtx: NDArray[np.float64]
    xty: NDArray[np.float64]
    count: int = 0
    _memo: dict = field(default_factory=dict, repr=False)

    @classmethod
    def empty(cls, d: int) -> "SufficientStatistics":
        return cls(np.zeros((d, d)), np.zeros(d))

    def add(self, x: NDArray[np.float64], y: float) -> "SufficientStatistics":
        """Return new statistics with one more row."""
        return SufficientStatistics(self.xtx + np.outer(x, x), self.xty + y * x, self.count + 1)

    def posterior(self, prior: ArmBelief, prior_scale: float = 1.0) -> ArmBelief:
        """Posterior for ``prior`` with its covariance scaled by ``prior_scale``."""
        if self.count == 0:
            if prior_scale == 1.0:
                return prior
            return ArmBelief(prior.mean, prior.covariance * prior_scale, prior.noise_sigma)
        # single-slot memo: repeated queries at one scale reuse the solve
        cached = self._memo.get("last")
        if cached is None or cached[0] is not prior or cached[1] != prior_scale:
            posterior = posterior_from_statistics(prior, self.xtx, self.xty, prior_scale=prior_scale)
            cached = (prior, prior_scale, posterior)
            self._memo["last"] = cached
        return cached[2]
