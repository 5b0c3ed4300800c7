"""Projected quasi-Newton identification from binary observations.

The estimator sees, at each step, a regressor ``phi``, the threshold ``c``
that was in force and the bit ``s = 1{y >= c}``. It keeps the gain matrix
``P`` and its inverse side by side: ``P`` is downdated by the rank-one
formula and ``P_inv`` is accumulated additively, so the two act as a
running consistency check on each other.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, InvalidConfig, NonFiniteInput, SingularMetric
from .geometry import ConvexBox, WeightedMetric, project
from .noise import NoiseModel

log = logging.getLogger(__name__)

INVERSE_CHECK_EVERY = 1000
INVERSE_TOL = 1e-7


@dataclass(frozen=True)
class EstimatorConfig:
    domain: ConvexBox
    regressor_bound: float  # M
    threshold_bound: float  # C
    noise: NoiseModel
    beta0: float
    P0: np.ndarray
    theta0: np.ndarray

    def __post_init__(self):
        p = self.domain.dim
        P0 = np.array(self.P0, dtype=float)
        theta0 = np.array(self.theta0, dtype=float).reshape(-1)
        if theta0.shape != (p,):
            raise InvalidConfig(f"theta0 has {theta0.size} entries, domain has dimension {p}")
        if P0.shape != (p, p):
            raise InvalidConfig(f"P0 has shape {P0.shape}, expected {(p, p)}")
        if not self.domain.contains(theta0):
            raise InvalidConfig(f"theta0={theta0.tolist()} lies outside the parameter box")
        try:
            WeightedMetric(P0)
        except (SingularMetric, ValueError) as exc:
            raise InvalidConfig(f"P0 must be symmetric positive definite: {exc}") from None
        if not (self.regressor_bound >= 0 and math.isfinite(self.regressor_bound)):
            raise InvalidConfig("regressor bound M must be finite and nonnegative")
        if not (self.threshold_bound >= 0 and math.isfinite(self.threshold_bound)):
            raise InvalidConfig("threshold bound C must be finite and nonnegative")
        upper = self.beta0_upper
        if not (0.0 < self.beta0 < upper):
            raise InvalidConfig(
                f"beta0={self.beta0:g} must lie in the open interval "
                f"(0, min{{1, inf_{{|x|<=LM+C}} f_1(x)}}) = (0, {upper:.6g})"
            )
        object.__setattr__(self, "P0", P0)
        object.__setattr__(self, "theta0", theta0)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @cached_property
    def L(self) -> float:
        return self.domain.radius

    @cached_property
    def density_radius(self) -> float:
        """L*M + C, the half-width over which the density infimum is taken."""
        return self.L * self.regressor_bound + self.threshold_bound

    @property
    def beta0_upper(self) -> float:
        return min(1.0, self.noise.inf_density(1, self.density_radius))

    def beta_schedule(self, steps: int) -> list[float]:
        """beta_0, ..., beta_{steps-1} as the estimator will produce them."""
        out = []
        beta = self.beta0
        r = self.density_radius
        for k in range(steps):
            out.append(beta)
            beta = min(beta, self.noise.inf_density(k + 2, r))
        return out


@dataclass(frozen=True)
class EstimatorState:
    k: int
    theta_hat: np.ndarray
    P: np.ndarray
    P_inv: np.ndarray
    beta: float
    # audit counters: regressors above M, thresholds above C
    bound_violations: int = 0
    threshold_violations: int = 0

    @property
    def gamma(self) -> float:
        return 1.0 / self.beta


@dataclass(frozen=True)
class StepOutcome:
    e: float
    a: float
    theta_pre: np.ndarray
    theta_hat: np.ndarray
    predicted_prob: float
    beta: float = field(default=math.nan)  # beta_k used for this step


def new(config: EstimatorConfig) -> EstimatorState:
    P0 = config.P0.copy()
    return EstimatorState(
        k=0,
        theta_hat=config.theta0.copy(),
        P=P0,
        P_inv=np.linalg.inv(P0),
        beta=float(config.beta0),
    )


def step(config: EstimatorConfig, state: EstimatorState, phi, c: float, s: int):
    """Advance one step; returns ``(new_state, StepOutcome)``."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (config.dim,):
        raise DimensionMismatch(f"regressor of shape {phi.shape}, expected ({config.dim},)")
    phi_sq = float(phi @ phi)
    if not (math.isfinite(phi_sq) and math.isfinite(c)):
        raise NonFiniteInput("regressor and threshold must be finite")
    if s not in (0, 1):
        raise ValueError(f"observation must be 0 or 1, got {s!r}")

    bound_violations = state.bound_violations
    if phi_sq > config.regressor_bound ** 2:
        if bound_violations == 0:
            log.warning(
                "regressor norm %.4g exceeds M=%g at k=%d; further violations are counted only",
                math.sqrt(phi_sq), config.regressor_bound, state.k,
            )
        bound_violations += 1
    threshold_violations = state.threshold_violations + (abs(c) > config.threshold_bound)

    k = state.k
    beta = state.beta
    b2 = beta * beta
    theta = state.theta_hat
    P = state.P

    Pphi = P @ phi
    a = 1.0 / (1.0 + b2 * float(phi @ Pphi))
    F = config.noise.cdf(k + 1, c - float(phi @ theta))
    e = s - 1.0 + F

    P_next = P - (b2 * a) * (Pphi[:, None] * Pphi)
    P_next = 0.5 * (P_next + P_next.T)
    P_inv_next = state.P_inv + b2 * (phi[:, None] * phi)

    theta_pre = theta + (a * beta * e) * Pphi
    theta_next = project(P_inv_next, config.domain, theta_pre, check=False)
    beta_next = min(beta, config.noise.inf_density(k + 2, config.density_radius))

    if (k + 1) % INVERSE_CHECK_EVERY == 0:
        err = inverse_residual(P_next, P_inv_next)
        if err > INVERSE_TOL:
            log.warning("P and P_inv drifted apart at k=%d: residual %.3g", k + 1, err)

    new_state = EstimatorState(
        k=k + 1,
        theta_hat=theta_next,
        P=P_next,
        P_inv=P_inv_next,
        beta=beta_next,
        bound_violations=bound_violations,
        threshold_violations=int(threshold_violations),
    )
    outcome = StepOutcome(
        e=e, a=a, theta_pre=theta_pre, theta_hat=theta_next,
        predicted_prob=1.0 - F, beta=beta,
    )
    return new_state, outcome


def inverse_residual(P, P_inv) -> float:
    """max-abs entry of ``P @ P_inv - I``."""
    return float(np.max(np.abs(P @ P_inv - np.eye(P.shape[0]))))


def estimate(state: EstimatorState) -> np.ndarray:
    return state.theta_hat.copy()


def covariance_inverse(state: EstimatorState) -> np.ndarray:
    return state.P_inv.copy()


class QuasiNewtonEstimator:
    """Stateful convenience wrapper around :func:`new` / :func:`step`."""

    def __init__(self, config: EstimatorConfig):
        self.config = config
        self.state = new(config)

    def step(self, phi, c: float, s: int) -> StepOutcome:
        self.state, outcome = step(self.config, self.state, phi, c, s)
        return outcome

    @property
    def estimate(self) -> np.ndarray:
        return estimate(self.state)

    @property
    def covariance_inverse(self) -> np.ndarray:
        return covariance_inverse(self.state)

    def reset(self) -> None:
        self.state = new(self.config)


__all__ = [
    "EstimatorConfig", "EstimatorState", "StepOutcome", "QuasiNewtonEstimator",
    "new", "step", "estimate", "covariance_inverse", "inverse_residual",
]
