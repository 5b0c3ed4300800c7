"""The three canned experiments: open-loop identification with a decaying
input, the same with log-decaying noise, and adaptive tracking control.

The regressor bound M is not part of the published setups. The Gaussian
inputs are unbounded, so M here is a tuning constant that only fixes the
density radius L*M + C and therefore beta. It is chosen small enough that
beta stays comparable to the density the estimator actually sees; with the
literal sup of |phi| the density infimum underflows and the gain vanishes.
"""
from __future__ import annotations

from .config import (ControlSpec, EstimatorSpec, ExcitationSpec, ExperimentConfig, OutputSpec,
                     PlantSpec)

EXAMPLE_IDS = (1, 2, 3)
EXAMPLE_M = 0.25


def example_config(example_id: int, **run_overrides) -> ExperimentConfig:
    if example_id == 1:
        cfg = ExperimentConfig(
            plant=PlantSpec(theta=(0.5, -0.5), threshold=0.0,
                            noise_family="gaussian-constant", sigma=1.0),
            excitation=ExcitationSpec("decaying-gaussian", exponent=0.25),
            estimator=EstimatorSpec(lo=(-2.0, -2.0), hi=(2.0, 2.0), theta0=(1.0, -1.0),
                                    M=EXAMPLE_M, C=0.0, beta0="auto", p0="identity"),
            output=OutputSpec(name="example1"),
        )
    elif example_id == 2:
        cfg = ExperimentConfig(
            plant=PlantSpec(theta=(1.0, 1.0), threshold=0.0,
                            noise_family="gaussian-logdecay", sigma=1.0),
            excitation=ExcitationSpec("decaying-gaussian", exponent=0.25),
            estimator=EstimatorSpec(lo=(-3.0, -3.0), hi=(3.0, 3.0), theta0=(-2.0, 2.0),
                                    M=EXAMPLE_M, C=0.0, beta0="auto", p0="identity"),
            output=OutputSpec(name="example2"),
        )
    elif example_id == 3:
        cfg = ExperimentConfig(
            plant=PlantSpec(theta=(0.5, 0.8), threshold=0.0,
                            noise_family="gaussian-constant", sigma=1.0),
            excitation=ExcitationSpec("from-controller"),
            estimator=EstimatorSpec(lo=(-2.0, 0.3), hi=(2.0, 2.0), theta0=(1.0, 1.0),
                                    M=EXAMPLE_M, C=0.0, beta0="auto", p0="identity"),
            control=ControlSpec(enabled=True, y_star=1.0, gain_floor=0.3),
            output=OutputSpec(name="example3"),
        )
    else:
        raise ValueError(f"unknown example {example_id}; choose one of {EXAMPLE_IDS}")
    if run_overrides:
        cfg = cfg.with_overrides(**run_overrides)
    return cfg


__all__ = ["EXAMPLE_IDS", "EXAMPLE_M", "example_config"]
