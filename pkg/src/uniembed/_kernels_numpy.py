"""Pure-numpy implementations of the hot numeric kernels.

This module is the fallback backend (``UNIEMBED_BACKEND=numpy``) and the
reference the numba kernels are checked against. Every function here has a
same-named twin in ``_kernels_numba``; keep signatures and semantics in sync.
"""

import numpy as np

# Bracket for the per-row sigma binary search. Expanded geometrically when the
# target perplexity is not enclosed.
SIGMA_LO = 1e-8
SIGMA_HI = 1e8


def pairwise_sq_dist(x: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between all rows of x. Exact zero diagonal."""
    diff = x[:, None, :] - x[None, :, :]
    d = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d, 0.0)
    return d


def neighbor_probs_from_dists(d: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    """Row-stochastic Gaussian neighbor probabilities, diagonal excluded.

    p[i, j] = exp(-d[i,j] / (2 sigma_i^2)) / sum_{k != i} exp(-d[i,k] / (2 sigma_i^2))
    computed with row-max subtraction in the exponent.
    """
    n = d.shape[0]
    logits = -d / (2.0 * sigmas[:, None] ** 2)
    np.fill_diagonal(logits, -np.inf)
    row_max = logits.max(axis=1, keepdims=True)
    p = np.exp(logits - row_max)
    np.fill_diagonal(p, 0.0)
    p /= p.sum(axis=1, keepdims=True)
    return p


def row_neighbor_probs(d_row: np.ndarray, sigma: float) -> np.ndarray:
    """Neighbor probabilities for one row of squared distances (self excluded)."""
    logits = -d_row / (2.0 * sigma * sigma)
    logits -= logits.max()
    p = np.exp(logits)
    return p / p.sum()


def _row_perplexity(d_row: np.ndarray, sigma: float) -> float:
    """exp of the Shannon entropy (nats) of the row's neighbor distribution."""
    p = row_neighbor_probs(d_row, sigma)
    nz = p[p > 0.0]
    return float(np.exp(-(nz * np.log(nz)).sum()))


def search_sigma_row(d_row: np.ndarray, target: float, tol: float, max_iter: int) -> float:
    """Binary search (in log sigma) for the bandwidth hitting a target perplexity.

    Perplexity is monotone nondecreasing in sigma, so a bracket [lo, hi] with
    perp(lo) <= target <= perp(hi) stays valid under bisection. Returns the
    best bracket midpoint when max_iter is exhausted.
    """
    lo, hi = SIGMA_LO, SIGMA_HI
    for _ in range(64):
        if _row_perplexity(d_row, lo) <= target:
            break
        lo *= 0.125
    for _ in range(64):
        if _row_perplexity(d_row, hi) >= target:
            break
        hi *= 8.0
    sigma = float(np.sqrt(lo * hi))
    for _ in range(max_iter):
        sigma = float(np.sqrt(lo * hi))
        perp = _row_perplexity(d_row, sigma)
        if abs(perp - target) <= tol:
            return sigma
        if perp < target:
            lo = sigma
        else:
            hi = sigma
    return sigma


def search_sigmas(d: np.ndarray, target: float, tol: float, max_iter: int) -> np.ndarray:
    """Per-row sigma search over a full squared-distance matrix (self excluded)."""
    n = d.shape[0]
    keep = ~np.eye(n, dtype=bool)
    sigmas = np.empty(n)
    for i in range(n):
        sigmas[i] = search_sigma_row(d[i][keep[i]], target, tol, max_iter)
    return sigmas


def snd_loss_grad(p: np.ndarray, s: np.ndarray, tau: float):
    """KL(P_i || Q_i) summed over rows, and its gradient w.r.t. the student rows.

    Q is the student neighbor distribution with uniform kernel 2 sigma'^2 = tau.
    Gradient: (2 / tau) * sum_j (s_i - s_j) (p_ij - q_ij + p_ji - q_ji).
    """
    n = s.shape[0]
    d = pairwise_sq_dist(s)
    logits = -d / tau
    np.fill_diagonal(logits, -np.inf)
    row_max = logits.max(axis=1, keepdims=True)
    shifted = np.exp(logits - row_max)
    np.fill_diagonal(shifted, 0.0)
    denom = shifted.sum(axis=1, keepdims=True)
    logq = (logits - row_max) - np.log(denom)
    q = shifted / denom

    mask = p > 0.0
    loss = float(np.sum(p[mask] * (np.log(p[mask]) - logq[mask])))

    c = p - q + p.T - q.T
    grad = (2.0 / tau) * (s * c.sum(axis=1)[:, None] - c @ s)
    return loss, grad


def _huber(e: np.ndarray, delta: float):
    a = np.abs(e)
    small = a <= delta
    val = np.where(small, 0.5 * e * e, delta * (a - 0.5 * delta))
    der = np.where(small, e, delta * np.sign(e))
    return val, der


def rkd_loss_grad(t: np.ndarray, s: np.ndarray, delta: float, use_l1: bool):
    """Batch-mean-normalized distance matching between teacher and student.

    loss = mean over unordered pairs of l(d_t - d_s) with d = ||x_i - x_j|| / mu.
    Gradient includes the chain through mu_s. Returns (loss, grad, mu_t, mu_s);
    the caller checks the means for degeneracy.
    """
    n = s.shape[0]
    rt = np.sqrt(pairwise_sq_dist(t))
    rs = np.sqrt(pairwise_sq_dist(s))
    iu = np.triu_indices(n, 1)
    m = iu[0].size
    mu_t = float(rt[iu].mean())
    mu_s = float(rs[iu].mean())
    if mu_t < 1e-12 or mu_s < 1e-12:
        return np.nan, np.zeros_like(s), mu_t, mu_s

    e = rt / mu_t - rs / mu_s
    if use_l1:
        val = np.abs(e)
        der = np.sign(e)
    else:
        val, der = _huber(e, delta)
    loss = float(val[iu].sum() / m)

    # dL/dr_kl = -h'(e_kl) / (m mu_s) + A / (m^2 mu_s^2), A = sum_{i<j} h'(e_ij) r_ij
    a_sum = float((der * rs)[iu].sum())
    w = -der / (m * mu_s) + a_sum / (m * m * mu_s * mu_s)
    np.fill_diagonal(w, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(rs > 1e-12, w / rs, 0.0)
    grad = s * c.sum(axis=1)[:, None] - c @ s
    return loss, grad, mu_t, mu_s


def triplet_semihard_loss_grad(s: np.ndarray, labels: np.ndarray, margin: float):
    """Semi-hard triplet loss averaged over ordered anchor-positive pairs.

    For each (a, p) the negative is the closest one farther than the positive,
    falling back to the farthest negative; ties resolve to the lowest index.
    Returns (loss, grad, n_pairs); n_pairs == 0 signals an unusable batch.
    """
    n = s.shape[0]
    r = np.sqrt(pairwise_sq_dist(s))
    grad = np.zeros_like(s)
    loss_sum = 0.0
    n_pairs = 0
    for a in range(n):
        same = labels == labels[a]
        pos = np.flatnonzero(same)
        pos = pos[pos != a]
        neg = np.flatnonzero(~same)
        if pos.size == 0 or neg.size == 0:
            continue
        d_an = r[a, neg]
        for p in pos:
            d_ap = r[a, p]
            semi = d_an > d_ap
            if semi.any():
                cand = np.where(semi, d_an, np.inf)
                j = neg[int(np.argmin(cand))]
            else:
                j = neg[int(np.argmax(d_an))]
            n_pairs += 1
            viol = d_ap - r[a, j] + margin
            if viol > 0.0:
                loss_sum += viol
                if d_ap > 1e-12:
                    g = (s[a] - s[p]) / d_ap
                    grad[a] += g
                    grad[p] -= g
                if r[a, j] > 1e-12:
                    g = (s[a] - s[j]) / r[a, j]
                    grad[a] -= g
                    grad[j] += g
    if n_pairs == 0:
        return 0.0, grad, 0
    return loss_sum / n_pairs, grad / n_pairs, n_pairs


def semihard_triplets(s: np.ndarray, labels: np.ndarray):
    """The (anchor, positive, negative) index triples the loss above selects."""
    n = s.shape[0]
    r = np.sqrt(pairwise_sq_dist(s))
    triples = []
    for a in range(n):
        same = labels == labels[a]
        pos = np.flatnonzero(same)
        pos = pos[pos != a]
        neg = np.flatnonzero(~same)
        if pos.size == 0 or neg.size == 0:
            continue
        d_an = r[a, neg]
        for p in pos:
            semi = d_an > r[a, p]
            if semi.any():
                cand = np.where(semi, d_an, np.inf)
                j = neg[int(np.argmin(cand))]
            else:
                j = neg[int(np.argmax(d_an))]
            triples.append((a, int(p), int(j)))
    return triples


def jacobi_eigh(a: np.ndarray, tol: float, max_sweeps: int):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps the strict upper triangle in row-major order until the largest
    off-diagonal magnitude is at most tol. Returns (eigenvalues, eigenvectors)
    unsorted; columns of the second output are the eigenvectors.
    """
    a = a.copy()
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return np.diag(a).copy(), v
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            row_off = np.max(np.abs(a[p, p + 1:]))
            if row_off > off:
                off = row_off
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                sn = t * c
                app, aqq = a[p, p], a[q, q]
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - sn * col_q
                a[:, q] = sn * col_p + c * col_q
                a[p, :] = a[:, p]
                a[q, :] = a[:, q]
                a[p, p] = c * c * app - 2.0 * sn * c * apq + sn * sn * aqq
                a[q, q] = sn * sn * app + 2.0 * sn * c * apq + c * c * aqq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - sn * vq
                v[:, q] = sn * vp + c * vq
    return np.diag(a).copy(), v
