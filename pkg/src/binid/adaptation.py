"""Adaptive prediction, regret, and certainty-equivalence tracking control."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch

DEFAULT_GAIN_FLOOR = 0.3


def _vec(x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch(f"{name} must be a vector, got shape {x.shape}")
    return x


def _same_dim(*pairs):
    dims = {name: v.size for name, v in pairs}
    if len(set(dims.values())) != 1:
        raise DimensionMismatch(f"dimension mismatch: {dims}")


def predict(theta_hat, phi, mean_next: float = 0.0) -> float:
    """One-step prediction ``theta_hat . phi + E[v_{k+1} | past]``."""
    theta_hat, phi = _vec(theta_hat, "theta_hat"), _vec(phi, "phi")
    _same_dim(("theta_hat", theta_hat), ("phi", phi))
    return float(theta_hat @ phi) + mean_next


def regret(theta_true, theta_hat, phi) -> float:
    """Squared gap between the optimal and the adaptive predictor."""
    theta_true = _vec(theta_true, "theta_true")
    theta_hat, phi = _vec(theta_hat, "theta_hat"), _vec(phi, "phi")
    _same_dim(("theta_true", theta_true), ("theta_hat", theta_hat), ("phi", phi))
    d = float((theta_true - theta_hat) @ phi)
    return d * d


@dataclass(frozen=True)
class AffineRegressorBuilder:
    """Regressor affine in the scalar input: ``phi(u) = g + h * u``."""

    g: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        g, h = _vec(self.g, "g"), _vec(self.h, "h")
        _same_dim(("g", g), ("h", h))
        if not np.any(h != 0):
            raise ValueError("h must be nonzero, otherwise the input has no effect")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "h", h)

    @classmethod
    def intercept_and_input(cls) -> "AffineRegressorBuilder":
        """phi = (1, u)."""
        return cls(np.array([1.0, 0.0]), np.array([0.0, 1.0]))

    def __call__(self, u: float) -> np.ndarray:
        return self.g + self.h * u


def control_input(theta_hat, builder: AffineRegressorBuilder, y_star: float,
                  mean_next: float = 0.0,
                  gain_floor: float = DEFAULT_GAIN_FLOOR) -> tuple[float, bool]:
    """Input that makes the predicted output equal ``y_star``.

    Returns ``(u, clamped)``. When ``|theta_hat . h| < gain_floor`` the
    denominator is replaced by ``sign * gain_floor`` (sign(0) = +1) and
    ``clamped`` is True; the prediction then no longer hits ``y_star``.
    """
    theta_hat = _vec(theta_hat, "theta_hat")
    _same_dim(("theta_hat", theta_hat), ("g", builder.g))
    if gain_floor <= 0:
        raise ValueError("gain_floor must be positive")
    gain = float(theta_hat @ builder.h)
    clamped = abs(gain) < gain_floor
    if clamped:
        gain = math.copysign(gain_floor, gain) if gain != 0 else gain_floor
    u = (y_star - mean_next - float(theta_hat @ builder.g)) / gain
    return u, clamped


@dataclass
class TrackingMetrics:
    """Running sums for one replication.

    ``n`` counts completed steps; derived quantities are None while undefined
    (``G_n`` needs log n > 0, so n >= 2; ``L_n`` needs log log n > 0, so n >= 3).
    """

    n: int = 0
    sq_error_sum: float = 0.0
    sigma_sq_sum: float = 0.0
    regret_sum: float = 0.0
    theta_err_sq: float = math.nan

    @property
    def J_n(self):
        return self.sq_error_sum / self.n if self.n else None

    @property
    def L_n(self):
        if self.n < 3:
            return None
        n = self.n
        return abs(self.J_n - self.sigma_sq_sum / n) * math.sqrt(n / math.log(math.log(n)))

    @property
    def G_n(self):
        if self.n < 2 or math.isnan(self.theta_err_sq):
            return None
        return self.theta_err_sq * math.sqrt(self.n) / math.log(self.n)

    @property
    def regret_over_log(self):
        return self.regret_sum / math.log(self.n) if self.n >= 2 else None

    @property
    def regret_avg(self):
        return self.regret_sum / self.n if self.n else None


def update_metrics(metrics: TrackingMetrics, k: int, y: float, y_star: float,
                   sigma_sq_k: float, R_k: float, theta_err_sq: float) -> TrackingMetrics:
    """Fold in step ``k`` (1-based count of completed steps) in place."""
    if k < 1:
        raise ValueError("k counts completed steps and starts at 1")
    if k != metrics.n + 1:
        raise ValueError(f"expected step {metrics.n + 1}, got {k}")
    d = y - y_star
    metrics.n = k
    metrics.sq_error_sum += d * d
    metrics.sigma_sq_sum += sigma_sq_k
    metrics.regret_sum += R_k
    metrics.theta_err_sq = theta_err_sq
    return metrics
