"""Training objectives: semi-hard triplet, relational (RKD), neighbor-KL (SND).

Each loss returns a ``LossResult`` holding the scalar value and the analytic
gradient with respect to the student embedding rows. Teacher quantities are
treated as constants.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels_numpy
from .backend import kernels
from .errors import DegenerateBatchError, EmptyBatchError, InputError
from .geometry import NeighborDistribution


@dataclass
class LossResult:
    loss: float
    grad: np.ndarray


def huber(x: float, delta: float):
    """Huber penalty and its derivative at x."""
    if delta <= 0.0:
        raise InputError("delta must be positive")
    ax = abs(x)
    if ax <= delta:
        return 0.5 * x * x, float(x)
    return delta * (ax - 0.5 * delta), delta * float(np.sign(x))


def _student(s) -> np.ndarray:
    s = np.ascontiguousarray(np.asarray(s, dtype=np.float64))
    if s.ndim != 2:
        raise InputError(f"embeddings must be 2-D, got shape {s.shape}")
    return s


def triplet_semihard(s, labels, margin: float = 0.2) -> LossResult:
    """Semi-hard triplet loss over all ordered anchor-positive pairs.

    The negative for (a, p) is the closest one farther from the anchor than p;
    if none exists, the farthest negative. Per-triplet hinge
    max(0, d(a,p) - d(a,n) + margin), averaged over anchor-positive pairs.
    """
    s = _student(s)
    labels = np.ascontiguousarray(np.asarray(labels, dtype=np.int64).ravel())
    if labels.shape[0] != s.shape[0]:
        raise InputError("labels must have one entry per embedding row")
    loss, grad, n_pairs = kernels.triplet_semihard_loss_grad(s, labels, margin)
    if n_pairs == 0:
        raise EmptyBatchError("batch has no anchor-positive pair with a negative")
    return LossResult(float(loss), grad)


def semihard_triplets(s, labels):
    """The fixed (anchor, positive, negative) selection used by the loss."""
    s = _student(s)
    labels = np.asarray(labels, dtype=np.int64).ravel()
    return _kernels_numpy.semihard_triplets(s, labels)


def rkd_distance(t, s, delta: float = 1.0, l1: bool = False) -> LossResult:
    """Match batch-mean-normalized pairwise distances of student to teacher.

    loss = mean over unordered pairs of l(d_t - d_s), d = ||x_i - x_j|| / mu.
    The gradient carries the full chain rule through the student mean mu_s.
    ``l1=True`` swaps the Huber penalty for the absolute error.
    """
    t = _student(t)
    s = _student(s)
    if t.shape[0] != s.shape[0]:
        raise InputError("teacher and student must embed the same samples")
    if s.shape[0] < 3:
        raise InputError("need at least 3 samples for a meaningful batch mean")
    if delta <= 0.0:
        raise InputError("delta must be positive")
    loss, grad, mu_t, mu_s = kernels.rkd_loss_grad(t, s, delta, l1)
    if mu_t < 1e-12 or mu_s < 1e-12:
        raise DegenerateBatchError(
            f"mean pairwise distance collapsed (teacher {mu_t:.3e}, student {mu_s:.3e})"
        )
    return LossResult(float(loss), grad)


def snd(p, s, tau: float = 1.0) -> LossResult:
    """Sum over rows of KL(P_i || Q_i) with Q built from the student rows.

    tau is the uniform student kernel denominator 2 sigma'^2. The gradient is
    (2 / tau) sum_j (s_i - s_j)(p_ij - q_ij + p_ji - q_ji); with tau = 1 this
    is the classic stochastic-neighbor gradient.
    """
    if isinstance(p, NeighborDistribution):
        p = p.probs
    p = np.ascontiguousarray(np.asarray(p, dtype=np.float64))
    s = _student(s)
    if tau <= 0.0:
        raise InputError("tau must be positive")
    if p.shape != (s.shape[0], s.shape[0]):
        raise InputError(
            f"teacher distribution is {p.shape}, student batch has {s.shape[0]} rows"
        )
    loss, grad = kernels.snd_loss_grad(p, s, tau)
    return LossResult(float(loss), grad)
