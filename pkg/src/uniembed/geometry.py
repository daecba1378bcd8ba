"""Distances, neighbor distributions with perplexity-calibrated bandwidths, PCA.

All functions are pure and operate on float64 arrays. Neighbor distributions
follow the SNE convention: the self-pair is excluded from both the numerator
and the normalizing sum, so probs[i, i] == 0 and each row sums to 1.
"""

from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .errors import DegenerateInputError, InputError

JACOBI_OFF_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


@dataclass
class NeighborDistribution:
    """Row-stochastic Gaussian pick probabilities plus the per-row bandwidths."""

    probs: np.ndarray
    sigmas: np.ndarray

    @property
    def n(self) -> int:
        return self.probs.shape[0]


def _as_matrix(x, name="X") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise InputError(f"{name} must be a 2-D matrix, got shape {x.shape}")
    return np.ascontiguousarray(x)


def pairwise_sq_dist(x) -> np.ndarray:
    """n x n matrix of squared Euclidean distances between rows of x."""
    x = _as_matrix(x)
    if x.shape[0] < 2 or x.shape[1] < 1:
        raise InputError(f"need at least 2 rows and 1 column, got {x.shape}")
    return kernels.pairwise_sq_dist(x)


def unit_normalize(x) -> np.ndarray:
    """Rescale each row to unit L2 norm."""
    x = _as_matrix(x)
    norms = np.sqrt((x * x).sum(axis=1))
    if np.any(norms < 1e-30):
        raise DegenerateInputError("cannot unit-normalize a (near-)zero row")
    return x / norms[:, None]


def neighbor_probs(d, sigmas) -> NeighborDistribution:
    """Gaussian neighbor distribution from squared distances and bandwidths."""
    d = _as_matrix(d, "D")
    sigmas = np.ascontiguousarray(np.asarray(sigmas, dtype=np.float64))
    if d.shape[0] != d.shape[1]:
        raise InputError(f"distance matrix must be square, got {d.shape}")
    if d.shape[0] < 2:
        raise InputError("need at least 2 points")
    if sigmas.shape != (d.shape[0],):
        raise InputError("sigmas must have one entry per row")
    if np.any(sigmas <= 0.0):
        raise InputError("all sigmas must be positive")
    return NeighborDistribution(kernels.neighbor_probs_from_dists(d, sigmas), sigmas)


def row_perplexity(p_row) -> float:
    """2^entropy of one probability row: the effective neighbor count."""
    p = np.asarray(p_row, dtype=np.float64).ravel()
    if np.any(p < 0.0) or abs(p.sum() - 1.0) > 1e-9:
        raise InputError("row must be a probability vector summing to 1")
    nz = p[p > 0.0]
    h = -(nz * np.log2(nz)).sum()
    return float(2.0 ** h)


def search_sigma(d_row, target_perplexity: float, tol: float = 1e-3,
                 max_iter: int = 100) -> float:
    """Bandwidth whose neighbor distribution over d_row hits a target perplexity.

    d_row holds the squared distances to the other points (self excluded).
    Perplexity is monotone in sigma; binary search runs on a bracket that is
    expanded geometrically from [1e-8, 1e8] if it does not enclose the target.
    """
    d_row = np.ascontiguousarray(np.asarray(d_row, dtype=np.float64).ravel())
    if d_row.size < 2:
        raise InputError("need at least 2 neighbors")
    if not (1.0 < target_perplexity <= d_row.size):
        raise InputError(
            f"target perplexity must lie in (1, {d_row.size}], got {target_perplexity}"
        )
    return float(kernels.search_sigma_row(d_row, target_perplexity, tol, max_iter))


def calibrated_neighbor_probs(d, target_perplexity: float, tol: float = 1e-3,
                              max_iter: int = 100) -> NeighborDistribution:
    """Neighbor distribution with each row's sigma searched to the target."""
    d = _as_matrix(d, "D")
    n = d.shape[0]
    if n < 3:
        raise InputError("need at least 3 points to calibrate")
    if not (1.0 < target_perplexity <= n - 1):
        raise InputError(
            f"target perplexity must lie in (1, {n - 1}], got {target_perplexity}"
        )
    sigmas = kernels.search_sigmas(d, target_perplexity, tol, max_iter)
    return NeighborDistribution(kernels.neighbor_probs_from_dists(d, sigmas), sigmas)


def pca(x, out_dim: int):
    """PCA of the rows of x via cyclic Jacobi on the covariance matrix.

    Returns (projection, eigenvalues): projection is d x out_dim with
    orthonormal columns (leading eigenvectors of the centered covariance),
    eigenvalues is the full descending spectrum (length d).
    """
    x = _as_matrix(x)
    n, d = x.shape
    if not (1 <= out_dim <= min(n - 1, d)):
        raise InputError(
            f"out_dim must lie in [1, min(n-1, d)] = [1, {min(n - 1, d)}], got {out_dim}"
        )
    xc = x - x.mean(axis=0)
    cov = np.ascontiguousarray((xc.T @ xc) / n)
    vals, vecs = kernels.jacobi_eigh(cov, JACOBI_OFF_TOL, JACOBI_MAX_SWEEPS)
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    # fix signs for reproducibility: largest-magnitude component positive
    for j in range(d):
        k = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[k, j] < 0.0:
            vecs[:, j] = -vecs[:, j]
    return vecs[:, :out_dim].copy(), vals
