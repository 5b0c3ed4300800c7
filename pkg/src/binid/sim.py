"""Closed-loop simulation: plant, excitation, estimator, metrics and traces."""
from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import estimator as qn
from .adaptation import AffineRegressorBuilder, TrackingMetrics, control_input, update_metrics
from .config import ExperimentConfig, read_column
from .errors import ConfigError
from .geometry import logdet, sym_eig_extremes
from .noise import NoiseModel

log = logging.getLogger(__name__)

DIAG_EVERY = 100
SUMMARY_METRICS = (
    "theta_err_sq", "G_n", "regret_over_log", "regret_avg", "J_n", "L_n",
    "lambda_min", "lambda_max", "lai_wei", "logdet",
)


# ---------------------------------------------------------------------------
# plant and excitation


@dataclass(frozen=True)
class Plant:
    theta_true: np.ndarray
    noise: NoiseModel
    thresholds: tuple = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "theta_true", np.asarray(self.theta_true, dtype=float))
        object.__setattr__(self, "thresholds", tuple(float(c) for c in self.thresholds))

    def threshold(self, k: int) -> float:
        return self.thresholds[k % len(self.thresholds)]


def step_plant(plant: Plant, phi, k: int, rng: np.random.Generator, v: Optional[float] = None):
    """Output, bit and noise for step k: ``y_{k+1}``, ``s_{k+1}``, ``v_{k+1}``.

    ``v`` may be forced; otherwise it is drawn from the noise law at ``k+1``.
    """
    if v is None:
        v = plant.noise.sample(k + 1, rng)
    y = float(np.asarray(phi, dtype=float) @ plant.theta_true) + v
    s = 1 if y >= plant.threshold(k) else 0
    return y, s, v


@dataclass(frozen=True)
class DecayingGaussian:
    """``phi_k = (1, u_k)`` with ``u_k ~ max(k,1)^(-exponent) N(0,1)``."""

    exponent: float = 0.25

    def regressor(self, k: int, rng: np.random.Generator) -> np.ndarray:
        scale = max(k, 1) ** -self.exponent
        return np.array((1.0, scale * rng.standard_normal()))


def ConstantGaussian() -> DecayingGaussian:
    return DecayingGaussian(0.0)


@dataclass(frozen=True)
class FromFile:
    """Regressors read from rows of a file, cycled if the run is longer."""

    rows: tuple

    @classmethod
    def load(cls, path, dim: int) -> "FromFile":
        rows = read_column(path, "excitation")
        if not rows:
            raise ConfigError(f"excitation file {path} has no rows", key="excitation.file")
        if any(len(r) != dim for r in rows):
            raise ConfigError(f"every excitation row needs {dim} entries", key="excitation.file")
        return cls(tuple(tuple(r) for r in rows))

    def regressor(self, k: int, rng) -> np.ndarray:
        return np.array(self.rows[k % len(self.rows)])


# ---------------------------------------------------------------------------
# excitation diagnostics


@dataclass(frozen=True)
class Diagnostics:
    lambda_min: float
    lambda_max: float
    lai_wei_ratio: float
    logdet: float


def _diagnose(A, logdet_of=None) -> Diagnostics:
    lam_min, lam_max = sym_eig_extremes(A)
    ratio = math.log(lam_max) / lam_min if lam_min > 0 and lam_max > 0 else math.nan
    return Diagnostics(lam_min, lam_max, ratio, logdet(A if logdet_of is None else logdet_of))


def diagnostics(phi_history, P0_inv, P_inv=None) -> Diagnostics:
    """Eigen-extremes of ``P0_inv + sum phi phi^T`` and the Lai-Wei ratio.

    The log-determinant is of ``P_inv`` when given (the estimator's weighted
    information matrix), else of the accumulated matrix itself.
    """
    phis = np.atleast_2d(np.asarray(phi_history, dtype=float))
    A = np.array(P0_inv, dtype=float) + phis.T @ phis
    return _diagnose(A, P_inv)


class ExcitationTracker:
    """Maintains ``A_n = P0_inv + sum phi_i phi_i^T`` incrementally."""

    def __init__(self, P0_inv):
        self.A = np.array(P0_inv, dtype=float)
        self.n = 0

    def add(self, phi) -> None:
        self.A += phi[:, None] * phi
        self.n += 1

    def diagnostics(self, P_inv=None) -> Diagnostics:
        return _diagnose(self.A, P_inv)


# ---------------------------------------------------------------------------
# traces


def trace_columns(p: int) -> list[str]:
    return (
        ["k"] + [f"phi_{i}" for i in range(p)] + ["c", "y", "s"]
        + [f"theta_{i}" for i in range(p)]
        + ["e", "a", "beta", "omega", "regret", "cum_regret", "lambda_min", "lambda_max",
           "lai_wei", "G_n", "J_n", "L_n", "clamped"]
    )


def _fmt(x) -> str:
    if x is None or not math.isfinite(x):
        return ""
    return "%.17g" % x


@dataclass
class Checkpoint:
    seed: int
    n: int
    theta_err_sq: float
    G_n: Optional[float]
    regret_over_log: Optional[float]
    regret_avg: Optional[float]
    J_n: Optional[float]
    L_n: Optional[float]
    lambda_min: float
    lambda_max: float
    lai_wei: float
    logdet: float


@dataclass
class Audit:
    """Per-replication counts of range violations plus running sums."""

    steps: int = 0
    e_out_of_range: int = 0
    a_out_of_range: int = 0
    beta_increase: int = 0
    theta_outside: int = 0
    clamp_count: int = 0
    omega_sum: float = 0.0
    inverse_residual_max: float = 0.0
    regressor_bound_violations: int = 0

    @property
    def omega_mean(self) -> float:
        return self.omega_sum / self.steps if self.steps else math.nan

    @property
    def range_violations(self) -> int:
        return self.e_out_of_range + self.a_out_of_range + self.beta_increase + self.theta_outside


@dataclass
class ReplicationResult:
    seed: int
    trace_csv: str
    checkpoints: list = field(default_factory=list)
    audit: Audit = field(default_factory=Audit)
    final_theta: Optional[np.ndarray] = None


def _reference(cfg: ExperimentConfig):
    if cfg.control.reference_file:
        rows = read_column(cfg.control.reference_file, "reference")
        values = tuple(r[0] for r in rows if r)
        if not values:
            raise ConfigError("reference file is empty", key="control.reference_file")
        return lambda k: values[k % len(values)]
    y_star = cfg.control.y_star
    return lambda k: y_star


def _excitation(cfg: ExperimentConfig):
    kind = cfg.excitation.kind
    if kind == "decaying-gaussian":
        return DecayingGaussian(cfg.excitation.exponent)
    if kind == "constant-gaussian":
        return ConstantGaussian()
    if kind == "from-file":
        return FromFile.load(cfg.excitation.file, cfg.dim)
    return None


def replication_rngs(seed: int):
    """Independent (excitation, noise) generators for one replication."""
    ss = np.random.SeedSequence(seed)
    ex, nz = ss.spawn(2)
    return np.random.Generator(np.random.Philox(ex)), np.random.Generator(np.random.Philox(nz))


def _row_due(n: int, run) -> bool:
    return n <= run.full_until or n % run.stride == 0


def run_replication(cfg: ExperimentConfig, seed: int) -> ReplicationResult:
    """Run one seed of the closed loop and return its trace and checkpoints."""
    est_cfg = cfg.validate()
    run = cfg.run
    p = cfg.dim
    theta = np.asarray(cfg.plant.theta, dtype=float)
    noise = est_cfg.noise
    plant = Plant(theta, noise, cfg.plant.thresholds())
    domain = est_cfg.domain
    rng_u, rng_v = replication_rngs(seed)
    source = _excitation(cfg)
    controlled = cfg.control.enabled
    builder = AffineRegressorBuilder.intercept_and_input() if controlled else None
    reference = _reference(cfg) if controlled else None
    checkpoints = set(c for c in run.checkpoints if 1 <= c <= run.n)
    if run.n >= 1:
        checkpoints.add(run.n)

    state = qn.new(est_cfg)
    tracker = ExcitationTracker(np.linalg.inv(est_cfg.P0))
    metrics = TrackingMetrics()
    audit = Audit()
    result = ReplicationResult(seed=seed, trace_csv="")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(trace_columns(p))
    cum_regret = 0.0
    prev_beta = state.beta

    for k in range(run.n):
        theta_hat = state.theta_hat
        clamped = False
        if controlled:
            mean_next = noise.conditional_mean(k + 1)
            u, clamped = control_input(theta_hat, builder, reference(k + 1), mean_next,
                                       cfg.control.gain_floor)
            phi = builder(u)
        else:
            phi = source.regressor(k, rng_u)
        c = plant.threshold(k)
        y, s, v = step_plant(plant, phi, k, rng_v)

        d = float((theta - theta_hat) @ phi)
        R = d * d
        cum_regret += R
        omega = s - 1.0 + noise.cdf(k + 1, c - float(theta @ phi))

        state, out = qn.step(est_cfg, state, phi, c, s)
        tracker.add(phi)
        n = k + 1
        err = theta - state.theta_hat
        y_star = reference(k + 1) if controlled else 0.0
        update_metrics(metrics, n, y, y_star, noise.variance(k + 1), R, float(err @ err))

        audit.steps = n
        audit.omega_sum += omega
        audit.clamp_count += clamped
        if not -1.0 <= out.e <= 1.0:
            audit.e_out_of_range += 1
        if not 0.0 < out.a <= 1.0:
            audit.a_out_of_range += 1
        if state.beta > prev_beta:
            audit.beta_increase += 1
        prev_beta = state.beta
        if not domain.contains(state.theta_hat):
            audit.theta_outside += 1

        is_checkpoint = n in checkpoints
        if is_checkpoint or _row_due(n, run):
            diag = None
            if is_checkpoint or n % DIAG_EVERY == 0:
                diag = tracker.diagnostics(state.P_inv)
            writer.writerow(
                [k] + [_fmt(x) for x in phi] + [_fmt(c), _fmt(y), s]
                + [_fmt(x) for x in theta_hat]
                + [_fmt(out.e), _fmt(out.a), _fmt(out.beta), _fmt(omega), _fmt(R),
                   _fmt(cum_regret),
                   _fmt(diag and diag.lambda_min), _fmt(diag and diag.lambda_max),
                   _fmt(diag and diag.lai_wei_ratio),
                   _fmt(metrics.G_n),
                   _fmt(metrics.J_n if controlled else None),
                   _fmt(metrics.L_n if controlled else None),
                   int(clamped)]
            )
            if is_checkpoint:
                audit.inverse_residual_max = max(
                    audit.inverse_residual_max, qn.inverse_residual(state.P, state.P_inv))
                result.checkpoints.append(Checkpoint(
                    seed=seed, n=n, theta_err_sq=metrics.theta_err_sq, G_n=metrics.G_n,
                    regret_over_log=metrics.regret_over_log, regret_avg=metrics.regret_avg,
                    J_n=metrics.J_n if controlled else None,
                    L_n=metrics.L_n if controlled else None,
                    lambda_min=diag.lambda_min, lambda_max=diag.lambda_max,
                    lai_wei=diag.lai_wei_ratio, logdet=diag.logdet,
                ))

    audit.regressor_bound_violations = state.bound_violations
    result.trace_csv = buf.getvalue()
    result.audit = audit
    result.final_theta = state.theta_hat.copy()
    return result


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    seeds: list
    checkpoints: list  # Checkpoint rows over all seeds
    audits: dict  # seed -> Audit
    trace_paths: dict  # seed -> Path (empty when nothing was written)

    def values(self, metric: str, n: int) -> np.ndarray:
        vals = [getattr(c, metric) for c in self.checkpoints if c.n == n]
        return np.array([np.nan if v is None else v for v in vals], dtype=float)

    def median(self, metric: str, n: int) -> float:
        return float(np.nanmedian(self.values(metric, n)))

    def quantile(self, metric: str, n: int, q: float) -> float:
        return float(np.nanquantile(self.values(metric, n), q))

    @property
    def checkpoint_ns(self) -> list:
        return sorted({c.n for c in self.checkpoints})


def trace_filename(cfg: ExperimentConfig, seed: int) -> str:
    return f"{cfg.output.name}_seed{seed}.csv"


def _replicate(args):
    cfg, seed = args
    return run_replication(cfg, seed)


def run_experiment(cfg: ExperimentConfig, seeds: Optional[Sequence[int]] = None,
                   out_dir=None, write: bool = True) -> ExperimentResult:
    """Run every seed and write traces plus summary files.

    Seeds default to ``base_seed + i`` for ``i < run.seeds``. Replications
    run in worker processes when more than one worker is available; files are
    written here, by the parent, one per seed.
    """
    cfg.validate()
    if seeds is None:
        seeds = [cfg.run.base_seed + i for i in range(cfg.run.seeds)]
    seeds = list(seeds)
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct", key="run.seeds")
    out = Path(out_dir if out_dir is not None else cfg.output.directory)
    if write:
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create output directory {out}: {exc.strerror}") from None

    workers = cfg.run.workers or os.cpu_count() or 1
    workers = min(workers, len(seeds))
    jobs = [(cfg, s) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results: Iterable[ReplicationResult] = pool.map(_replicate, jobs)
            collected = _collect(cfg, results, out, write)
    else:
        collected = _collect(cfg, map(_replicate, jobs), out, write)
    checkpoints, audits, paths = collected
    result = ExperimentResult(cfg, seeds, checkpoints, audits, paths)
    if write:
        write_summary(result, out / f"{cfg.output.name}_summary.csv")
        write_aggregate(result, out / f"{cfg.output.name}_aggregate.csv")
    return result


def _collect(cfg, results, out: Path, write: bool):
    checkpoints, audits, paths = [], {}, {}
    for res in results:
        checkpoints.extend(res.checkpoints)
        audits[res.seed] = res.audit
        if write:
            path = out / trace_filename(cfg, res.seed)
            path.write_text(res.trace_csv)
            paths[res.seed] = path
    return checkpoints, audits, paths


SUMMARY_COLUMNS = ("seed", "n") + SUMMARY_METRICS


def write_summary(result: ExperimentResult, path) -> None:
    """One row per (seed, checkpoint)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for c in sorted(result.checkpoints, key=lambda c: (c.seed, c.n)):
            w.writerow([c.seed, c.n] + [_fmt(getattr(c, m)) for m in SUMMARY_METRICS])


def write_aggregate(result: ExperimentResult, path) -> None:
    """Median and 10/90% quantiles across seeds at each checkpoint."""
    cols = ["n", "seeds"]
    for m in SUMMARY_METRICS:
        cols += [f"{m}_median", f"{m}_q10", f"{m}_q90"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for n in result.checkpoint_ns:
            row = [n, len(result.values("theta_err_sq", n))]
            for m in SUMMARY_METRICS:
                vals = result.values(m, n)
                if np.all(np.isnan(vals)):
                    row += ["", "", ""]
                else:
                    row += [_fmt(np.nanmedian(vals)), _fmt(np.nanquantile(vals, 0.1)),
                            _fmt(np.nanquantile(vals, 0.9))]
            w.writerow(row)


def read_trace(path) -> list[dict]:
    """Parse a trace CSV back into dicts; empty fields become None."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append({k: (None if v == "" else float(v)) for k, v in rec.items()})
    return rows
