"""Parameter boxes, the Q-weighted projection onto them, and a small
symmetric eigensolver used for excitation diagnostics."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DimensionMismatch, NotSymmetric, SingularMetric

SYMMETRY_TOL = 1e-12
EIG_SYMMETRY_TOL = 1e-9
JACOBI_TOL = 1e-12
ACTIVE_SET_MAX_DIM = 3
KKT_TOL = 1e-8
PG_TOL = 1e-10
PG_MAX_ITER = 100_000
PG_FACE_EVERY = 5


# ---------------------------------------------------------------------------
# eigenvalues


def jacobi_eigenvalues(A, tol: float = JACOBI_TOL, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.

    Sweeps until the off-diagonal Frobenius norm is at most ``tol * ||A||_F``.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    if A.size and np.max(np.abs(A - A.T)) > EIG_SYMMETRY_TOL:
        raise NotSymmetric("matrix is not symmetric within 1e-9")
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    scale = np.linalg.norm(A)
    if n < 2 or scale == 0.0:
        return np.sort(np.diag(A))
    target = tol * scale
    for _ in range(max_sweeps):
        off = math.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-18 * max(abs(A[p, p]), abs(A[q, q])):
                    # negligible coupling; rotating would overflow theta
                    A[p, q] = A[q, p] = 0.0
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                A = rot.T @ A @ rot
                A[p, q] = A[q, p] = 0.0
    return np.sort(np.diag(A))


def sym_eig_extremes(A) -> tuple[float, float]:
    """(smallest, largest) eigenvalue of a symmetric matrix."""
    w = jacobi_eigenvalues(A)
    return float(w[0]), float(w[-1])


def logdet(A) -> float:
    """Log-determinant as the sum of log eigenvalues; -inf if singular."""
    w = jacobi_eigenvalues(A)
    if np.any(w <= 0):
        return -math.inf
    return float(np.sum(np.log(w)))


# ---------------------------------------------------------------------------
# sets and metrics


@dataclass(frozen=True)
class ConvexBox:
    """Axis-aligned box ``lo <= x <= hi``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionMismatch(f"lo has {lo.size} entries, hi has {hi.size}")
        if lo.size == 0:
            raise ValueError("box must have at least one coordinate")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(lo >= hi):
            raise ValueError("box requires lo[i] < hi[i] for every coordinate")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def symmetric(cls, half_widths) -> "ConvexBox":
        h = np.asarray(half_widths, dtype=float)
        return cls(-h, h)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def radius(self) -> float:
        """sup of the Euclidean norm over the box (attained at a corner)."""
        return float(np.linalg.norm(np.maximum(np.abs(self.lo), np.abs(self.hi))))

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        if tol:
            return bool((x >= self.lo - tol).all() and (x <= self.hi + tol).all())
        return bool((x >= self.lo).all() and (x <= self.hi).all())

    def clip(self, x) -> np.ndarray:
        return np.minimum(np.maximum(x, self.lo), self.hi)


@dataclass(frozen=True)
class WeightedMetric:
    """Symmetric positive-definite weight matrix for ``x^T Q x``."""

    Q: np.ndarray

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionMismatch(f"metric must be square, got shape {Q.shape}")
        if not np.all(np.isfinite(Q)):
            raise SingularMetric("metric has non-finite entries")
        if np.max(np.abs(Q - Q.T)) > SYMMETRY_TOL:
            raise SingularMetric("metric is not symmetric within 1e-12")
        lam_min, _ = sym_eig_extremes(Q)
        if not lam_min > 0:
            raise SingularMetric(f"metric is not positive definite (lambda_min={lam_min:g})")
        Q.flags.writeable = False
        object.__setattr__(self, "Q", Q)

    @property
    def dim(self) -> int:
        return self.Q.shape[0]


MetricLike = Union[WeightedMetric, np.ndarray]


def _matrix(Q: MetricLike, check: bool) -> np.ndarray:
    if isinstance(Q, WeightedMetric):
        return Q.Q
    if check:
        return WeightedMetric(Q).Q
    return np.asarray(Q, dtype=float)


def weighted_norm(Q: MetricLike, x) -> float:
    """``x^T Q x``. Note there is no square root."""
    Q = _matrix(Q, check=False)
    x = np.asarray(x, dtype=float)
    if x.shape != (Q.shape[0],):
        raise DimensionMismatch(f"vector of shape {x.shape} vs metric {Q.shape}")
    return float(x @ Q @ x)


# ---------------------------------------------------------------------------
# projection


def project(Q: MetricLike, box: ConvexBox, x, check: bool = True) -> np.ndarray:
    """argmin over w in ``box`` of ``(x - w)^T Q (x - w)``.

    Exact face enumeration for dimension <= 3, projected gradient beyond.
    With ``check=False`` a raw array ``Q`` is trusted to be SPD.
    """
    Q = _matrix(Q, check)
    x = np.asarray(x, dtype=float)
    p = box.dim
    if x.shape != (p,) or Q.shape != (p, p):
        raise DimensionMismatch(f"point {x.shape}, metric {Q.shape}, box dimension {p}")
    if (x >= box.lo).all() and (x <= box.hi).all():
        return x.copy()
    if not np.isfinite(x).all():
        raise ValueError("cannot project a non-finite point")
    if box.dim <= ACTIVE_SET_MAX_DIM:
        w = _project_active_set(Q, box, x)
    else:
        w = _project_gradient(Q, box, x)
    return box.clip(w)


def _face_candidate(Q, box, x, pattern):
    """Minimiser over the face where coords with pattern 1/2 sit at lo/hi."""
    w = x.copy()
    fixed = [i for i, s in enumerate(pattern) if s]
    free = [i for i, s in enumerate(pattern) if not s]
    for i in fixed:
        w[i] = box.lo[i] if pattern[i] == 1 else box.hi[i]
    if free and fixed:
        d_fixed = w[fixed] - x[fixed]
        rhs = -Q[np.ix_(free, fixed)] @ d_fixed
        w[free] = x[free] + np.linalg.solve(Q[np.ix_(free, free)], rhs)
    return w


def _kkt_ok(Q, box, x, w, pattern, tol=KKT_TOL):
    g = 2.0 * Q @ (w - x)
    scale = max(1.0, float(np.max(np.abs(g))))
    for i, s in enumerate(pattern):
        if s == 0 and abs(g[i]) > tol * scale:
            return False
        if s == 1 and g[i] < -tol * scale:
            return False
        if s == 2 and g[i] > tol * scale:
            return False
    return True


def _project_active_set(Q, box, x):
    feasible = []
    for pattern in itertools.product((0, 1, 2), repeat=box.dim):
        w = _face_candidate(Q, box, x, pattern)
        if not box.contains(w, tol=1e-12):
            continue
        d = x - w
        obj = float(d @ Q @ d)
        feasible.append((obj, tuple(w), _kkt_ok(Q, box, x, w, pattern), w))
    kkt = [c for c in feasible if c[2]]
    pool = kkt or feasible
    # smallest objective, then lexicographic on the point
    best = min(pool, key=lambda c: (c[0], c[1]))
    return best[3]


def _project_gradient(Q, box, x):
    """Projected gradient with Armijo steps, used only to locate the optimal face.

    Every ``PG_FACE_EVERY`` iterations the face of the current iterate is solved
    exactly; the first candidate passing the KKT screen is returned.
    """
    w = box.clip(x)
    lip = 2.0 * sym_eig_extremes(Q)[1]
    step0 = 1.0 / lip

    def f(z):
        d = z - x
        return float(d @ Q @ d)

    for it in range(PG_MAX_ITER):
        if it % PG_FACE_EVERY == 0:
            pattern = _face_of(box, w)
            cand = _face_candidate(Q, box, x, pattern)
            if box.contains(cand, tol=1e-12) and _kkt_ok(Q, box, x, cand, pattern):
                return cand
        g = 2.0 * Q @ (w - x)
        if np.max(np.abs(w - box.clip(w - g))) <= PG_TOL:
            break
        t = step0
        fw = f(w)
        while True:
            z = box.clip(w - t * g)
            if f(z) <= fw + 1e-4 * float(g @ (z - w)) or t < 1e-16:
                break
            t *= 0.5
        w = z
    return _polish(Q, box, x, w)


def _face_of(box, w, eps=1e-9):
    return tuple(
        1 if w[i] <= box.lo[i] + eps else 2 if w[i] >= box.hi[i] - eps else 0
        for i in range(box.dim)
    )


def _polish(Q, box, x, w):
    """Re-solve exactly on the face identified by projected gradient."""
    pattern = _face_of(box, w)
    cand = _face_candidate(Q, box, x, pattern)
    if box.contains(cand, tol=1e-12):
        d0, d1 = x - w, x - cand
        if float(d1 @ Q @ d1) <= float(d0 @ Q @ d0):
            return cand
    return w
