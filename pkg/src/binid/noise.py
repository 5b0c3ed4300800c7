"""Conditional noise laws for the binary-observation model.

Each law is indexed by the time step ``k`` so that schedules such as a
log-decaying variance can be expressed. Only deterministic, time-indexed
dependence is supported; laws that depend on the realised past are not.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NonpositiveDensity

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

CUSTOM_GRID_POINTS = 10_000


def gaussian_cdf(x: float, sigma: float = 1.0) -> float:
    # erfc keeps full relative precision in the lower tail
    return 0.5 * math.erfc(-x / (sigma * _SQRT2))


def gaussian_pdf(x: float, sigma: float = 1.0) -> float:
    z = x / sigma
    return _INV_SQRT_2PI * math.exp(-0.5 * z * z) / sigma


@dataclass(frozen=True)
class LogDecaySigma:
    """sigma_k = scale * max(log k, 1)^(-1/4); flat for k <= e."""

    scale: float = 1.0

    def __call__(self, k: int) -> float:
        if k <= 1:
            return self.scale
        return self.scale * max(math.log(k), 1.0) ** -0.25


log_decay_sigma = LogDecaySigma()


class NoiseModel:
    """Interface shared by all noise families.

    Subclasses provide ``cdf``, ``pdf``, ``conditional_mean``, ``variance``
    and ``sample``; ``inf_density`` has a grid-based default.
    """

    family: str = "custom"

    def cdf(self, k: int, x: float) -> float:
        raise NotImplementedError

    def pdf(self, k: int, x: float) -> float:
        raise NotImplementedError

    def conditional_mean(self, k: int) -> float:
        raise NotImplementedError

    def variance(self, k: int) -> float:
        raise NotImplementedError

    def sample(self, k: int, rng: np.random.Generator) -> float:
        raise NotImplementedError

    def inf_density(self, k: int, radius: float) -> float:
        """Infimum of the density over ``[-radius, radius]``.

        Evaluated on a uniform grid of ``CUSTOM_GRID_POINTS`` points plus both
        endpoints. Raises ``NonpositiveDensity`` when the result is not > 0.
        """
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        grid = np.linspace(-radius, radius, CUSTOM_GRID_POINTS + 1)
        value = min(self.pdf(k, float(x)) for x in grid)
        return _check_positive(value, k, radius)


def _check_positive(value: float, k: int, radius: float) -> float:
    if not value > 0.0:
        raise NonpositiveDensity(
            f"density infimum over |x| <= {radius:g} at k={k} is {value:g}; "
            "it must be strictly positive"
        )
    return value


@dataclass(frozen=True)
class GaussianConstant(NoiseModel):
    sigma: float = 1.0
    family = "gaussian-constant"

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")

    def cdf(self, k, x):
        return gaussian_cdf(x, self.sigma)

    def pdf(self, k, x):
        return gaussian_pdf(x, self.sigma)

    def inf_density(self, k, radius):
        # symmetric unimodal: the infimum sits at the endpoint
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        return _check_positive(gaussian_pdf(radius, self.sigma), k, radius)

    def conditional_mean(self, k):
        return 0.0

    def variance(self, k):
        return self.sigma * self.sigma

    def sample(self, k, rng):
        return self.sigma * rng.standard_normal()


@dataclass(frozen=True)
class GaussianSchedule(NoiseModel):
    """Zero-mean Gaussian with a time-varying standard deviation.

    ``sigma_fn`` must be picklable (a module-level function or a callable
    dataclass such as ``LogDecaySigma``) if the model is shipped to worker
    processes.
    """

    sigma_fn: Callable[[int], float] = log_decay_sigma
    family = "gaussian-schedule"

    @classmethod
    def log_decay(cls, scale: float = 1.0) -> "GaussianSchedule":
        return cls(LogDecaySigma(scale))

    def sigma(self, k: int) -> float:
        s = float(self.sigma_fn(k))
        if not (s > 0 and math.isfinite(s)):
            raise ValueError(f"sigma_fn({k}) returned {s}")
        return s

    def cdf(self, k, x):
        return gaussian_cdf(x, self.sigma(k))

    def pdf(self, k, x):
        return gaussian_pdf(x, self.sigma(k))

    def inf_density(self, k, radius):
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        return _check_positive(gaussian_pdf(radius, self.sigma(k)), k, radius)

    def conditional_mean(self, k):
        return 0.0

    def variance(self, k):
        s = self.sigma(k)
        return s * s

    def sample(self, k, rng):
        return self.sigma(k) * rng.standard_normal()


@dataclass(frozen=True)
class Custom(NoiseModel):
    """User-supplied law. Each callable takes the time index first.

    ``infimum`` is optional; without it ``inf_density`` falls back to the
    grid search, which costs ``CUSTOM_GRID_POINTS`` density calls.
    """

    cdf_fn: Callable[[int, float], float]
    pdf_fn: Callable[[int, float], float]
    mean_fn: Callable[[int], float]
    variance_fn: Callable[[int], float]
    sampler: Callable[[int, np.random.Generator], float]
    infimum: Optional[Callable[[int, float], float]] = None

    def cdf(self, k, x):
        return float(self.cdf_fn(k, x))

    def pdf(self, k, x):
        return float(self.pdf_fn(k, x))

    def inf_density(self, k, radius):
        if self.infimum is None:
            return super().inf_density(k, radius)
        return _check_positive(float(self.infimum(k, radius)), k, radius)

    def conditional_mean(self, k):
        return float(self.mean_fn(k))

    def variance(self, k):
        return float(self.variance_fn(k))

    def sample(self, k, rng):
        return float(self.sampler(k, rng))
