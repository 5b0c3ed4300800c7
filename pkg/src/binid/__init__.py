"""Recursive identification and adaptive control from binary-valued sensors."""
from .adaptation import (AffineRegressorBuilder, TrackingMetrics, control_input, predict, regret,
                         update_metrics)
from .errors import (BinIdError, ConfigError, DimensionMismatch, InvalidConfig, NonFiniteInput,
                     NonpositiveDensity, NotSymmetric, SingularMetric)
from .estimator import EstimatorConfig, EstimatorState, QuasiNewtonEstimator, StepOutcome
from .geometry import ConvexBox, WeightedMetric, project, sym_eig_extremes, weighted_norm
from .noise import Custom, GaussianConstant, GaussianSchedule, NoiseModel

__version__ = "0.1.0"
