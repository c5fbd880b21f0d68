"""Synthetic linear-reward environment."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rcbandit.core.errors import DimensionMismatchError
from rcbandit.core.logger_setup import get_logger

logger = get_logger(__name__)

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]


def make_generator(seed: SeedLike) -> np.random.Generator:
    """Counter-based Philox generator for an int, SeedSequence or existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


class CovariateSampler(str, Enum):
    BOX = "box"
    SPHERE = "sphere"


def analytic_phi0(sampler: CovariateSampler, d: int) -> float:
    """Smallest eigenvalue of E[x x^T] for the sampler, in closed form."""
    if CovariateSampler(sampler) is CovariateSampler.BOX:
        return 1.0 / (3.0 * d)
    return 1.0 / d


def draw_true_params(
    means: Sequence[ArrayLike],
    covariances: Sequence[ArrayLike],
    seed: SeedLike,
    *,
    bound: float = 1.0,
    clip: bool = True,
) -> NDArray[np.float64]:
    """Sample one coefficient vector per arm from its Gaussian prior.

    Vectors longer than ``bound`` are rescaled onto the sphere of that radius.

    Args:
        means: Prior mean per arm
        covariances: Prior covariance per arm; an all-zero matrix returns the mean
        seed: Seed or generator for the truth stream
        bound: Norm bound b
        clip: Whether to rescale long vectors

    Returns:
        K x d array of true coefficients
    """
    rng = make_generator(seed)
    rows = []
    for mean, cov in zip(means, covariances):
        mean = np.asarray(mean, dtype=np.float64).reshape(-1)
        cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
        if not np.any(cov):
            beta = mean.copy()
        else:
            beta = rng.multivariate_normal(mean, cov, method="eigh")
        norm = float(np.linalg.norm(beta))
        if clip and norm > bound:
            beta = beta * (bound / norm)
        rows.append(beta)
    return np.vstack(rows)


@dataclass
class SyntheticEnv:
    """Linear rewards ``x @ beta_arm + N(0, sigma^2)`` over bounded covariates.

    Attributes:
        true_betas: K x d true coefficients
        noise_sigma: Reward noise standard deviation
        sampler: Covariate distribution
        rng: Stream for covariates and noise
    """

    true_betas: NDArray[np.float64]
    noise_sigma: float
    sampler: CovariateSampler = CovariateSampler.BOX
    rng: np.random.Generator = field(default_factory=lambda: make_generator(0))

    def __post_init__(self) -> None:
        self.true_betas = np.atleast_2d(np.asarray(self.true_betas, dtype=np.float64))
        self.sampler = CovariateSampler(self.sampler)
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")

    @property
    def n_arms(self) -> int:
        return int(self.true_betas.shape[0])

    @property
    def dim(self) -> int:
        return int(self.true_betas.shape[1])

    @property
    def phi0(self) -> float:
        return analytic_phi0(self.sampler, self.dim)

    def sample_covariate(self) -> NDArray[np.float64]:
        d = self.dim
        if self.sampler is CovariateSampler.BOX:
            half_width = 1.0 / math.sqrt(d)
            return self.rng.uniform(-half_width, half_width, size=d)
        draw = self.rng.standard_normal(d)
        return draw / np.linalg.norm(draw)

    def oracle_means(self, x: ArrayLike) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.dim:
            raise DimensionMismatchError(self.dim, x.shape[0])
        return self.true_betas @ x

    def realize_reward(self, x: ArrayLike, arm: int) -> float:
        """Noisy reward of ``arm``; one normal draw is consumed even when sigma is 0."""
        mean = float(self.oracle_means(x)[arm])
        noise = self.rng.standard_normal()
        if self.noise_sigma == 0:
            return mean
        return mean + self.noise_sigma * float(noise)

    def optimal_arm(self, x: ArrayLike) -> int:
        return int(np.argmax(self.oracle_means(x)))
