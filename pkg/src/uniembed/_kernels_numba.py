"""Numba-jitted implementations of the hot numeric kernels.

Default backend. Signatures and semantics mirror ``_kernels_numpy``; no
``fastmath`` or ``parallel`` so results stay deterministic run to run.
"""

import numpy as np
from numba import njit

SIGMA_LO = 1e-8
SIGMA_HI = 1e8


@njit(cache=True)
def pairwise_sq_dist(x):
    n, dim = x.shape
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(dim):
                diff = x[i, k] - x[j, k]
                acc += diff * diff
            d[i, j] = acc
            d[j, i] = acc
    return d


@njit(cache=True)
def neighbor_probs_from_dists(d, sigmas):
    n = d.shape[0]
    p = np.zeros((n, n))
    for i in range(n):
        denom = 2.0 * sigmas[i] * sigmas[i]
        row_max = -np.inf
        for j in range(n):
            if j == i:
                continue
            logit = -d[i, j] / denom
            if logit > row_max:
                row_max = logit
        total = 0.0
        for j in range(n):
            if j == i:
                continue
            e = np.exp(-d[i, j] / denom - row_max)
            p[i, j] = e
            total += e
        for j in range(n):
            p[i, j] /= total
    return p


@njit(cache=True)
def row_neighbor_probs(d_row, sigma):
    m = d_row.shape[0]
    denom = 2.0 * sigma * sigma
    row_max = -np.inf
    for j in range(m):
        logit = -d_row[j] / denom
        if logit > row_max:
            row_max = logit
    p = np.empty(m)
    total = 0.0
    for j in range(m):
        e = np.exp(-d_row[j] / denom - row_max)
        p[j] = e
        total += e
    for j in range(m):
        p[j] /= total
    return p


@njit(cache=True)
def _row_perplexity(d_row, sigma):
    p = row_neighbor_probs(d_row, sigma)
    h = 0.0
    for j in range(p.shape[0]):
        if p[j] > 0.0:
            h -= p[j] * np.log(p[j])
    return np.exp(h)


@njit(cache=True)
def search_sigma_row(d_row, target, tol, max_iter):
    lo = SIGMA_LO
    hi = SIGMA_HI
    for _ in range(64):
        if _row_perplexity(d_row, lo) <= target:
            break
        lo *= 0.125
    for _ in range(64):
        if _row_perplexity(d_row, hi) >= target:
            break
        hi *= 8.0
    sigma = np.sqrt(lo * hi)
    for _ in range(max_iter):
        sigma = np.sqrt(lo * hi)
        perp = _row_perplexity(d_row, sigma)
        if abs(perp - target) <= tol:
            return sigma
        if perp < target:
            lo = sigma
        else:
            hi = sigma
    return sigma


@njit(cache=True)
def search_sigmas(d, target, tol, max_iter):
    n = d.shape[0]
    sigmas = np.empty(n)
    row = np.empty(n - 1)
    for i in range(n):
        k = 0
        for j in range(n):
            if j != i:
                row[k] = d[i, j]
                k += 1
        sigmas[i] = search_sigma_row(row, target, tol, max_iter)
    return sigmas


@njit(cache=True)
def snd_loss_grad(p, s, tau):
    n, dim = s.shape
    d = pairwise_sq_dist(s)
    q = np.zeros((n, n))
    logq = np.zeros((n, n))
    for i in range(n):
        row_max = -np.inf
        for j in range(n):
            if j == i:
                continue
            logit = -d[i, j] / tau
            if logit > row_max:
                row_max = logit
        total = 0.0
        for j in range(n):
            if j == i:
                continue
            e = np.exp(-d[i, j] / tau - row_max)
            q[i, j] = e
            total += e
        log_total = np.log(total)
        for j in range(n):
            if j == i:
                continue
            q[i, j] /= total
            logq[i, j] = -d[i, j] / tau - row_max - log_total

    loss = 0.0
    for i in range(n):
        for j in range(n):
            if p[i, j] > 0.0:
                loss += p[i, j] * (np.log(p[i, j]) - logq[i, j])

    grad = np.zeros((n, dim))
    scale = 2.0 / tau
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            c = p[i, j] - q[i, j] + p[j, i] - q[j, i]
            for k in range(dim):
                grad[i, k] += scale * c * (s[i, k] - s[j, k])
    return loss, grad


@njit(cache=True)
def rkd_loss_grad(t, s, delta, use_l1):
    n, dim = s.shape
    rt = np.sqrt(pairwise_sq_dist(t))
    rs = np.sqrt(pairwise_sq_dist(s))
    m = n * (n - 1) // 2
    mu_t = 0.0
    mu_s = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            mu_t += rt[i, j]
            mu_s += rs[i, j]
    mu_t /= m
    mu_s /= m
    grad = np.zeros((n, dim))
    if mu_t < 1e-12 or mu_s < 1e-12:
        return np.nan, grad, mu_t, mu_s

    loss = 0.0
    der = np.zeros((n, n))
    a_sum = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            e = rt[i, j] / mu_t - rs[i, j] / mu_s
            if use_l1:
                loss += abs(e)
                dv = np.sign(e)
            else:
                if abs(e) <= delta:
                    loss += 0.5 * e * e
                    dv = e
                else:
                    loss += delta * (abs(e) - 0.5 * delta)
                    dv = delta * np.sign(e)
            der[i, j] = dv
            der[j, i] = dv
            a_sum += dv * rs[i, j]
    loss /= m

    for i in range(n):
        for j in range(i + 1, n):
            if rs[i, j] <= 1e-12:
                continue
            w = -der[i, j] / (m * mu_s) + a_sum / (m * m * mu_s * mu_s)
            coef = w / rs[i, j]
            for k in range(dim):
                g = coef * (s[i, k] - s[j, k])
                grad[i, k] += g
                grad[j, k] -= g
    return loss, grad, mu_t, mu_s


@njit(cache=True)
def triplet_semihard_loss_grad(s, labels, margin):
    n, dim = s.shape
    r = np.sqrt(pairwise_sq_dist(s))
    grad = np.zeros((n, dim))
    loss_sum = 0.0
    n_pairs = 0
    for a in range(n):
        for p in range(n):
            if p == a or labels[p] != labels[a]:
                continue
            d_ap = r[a, p]
            best_semi = np.inf
            best_semi_idx = -1
            best_far = -np.inf
            best_far_idx = -1
            for j in range(n):
                if labels[j] == labels[a]:
                    continue
                d_an = r[a, j]
                if d_an > d_ap and d_an < best_semi:
                    best_semi = d_an
                    best_semi_idx = j
                if d_an > best_far:
                    best_far = d_an
                    best_far_idx = j
            if best_far_idx < 0:
                continue
            neg = best_semi_idx if best_semi_idx >= 0 else best_far_idx
            n_pairs += 1
            viol = d_ap - r[a, neg] + margin
            if viol > 0.0:
                loss_sum += viol
                if d_ap > 1e-12:
                    for k in range(dim):
                        g = (s[a, k] - s[p, k]) / d_ap
                        grad[a, k] += g
                        grad[p, k] -= g
                if r[a, neg] > 1e-12:
                    for k in range(dim):
                        g = (s[a, k] - s[neg, k]) / r[a, neg]
                        grad[a, k] -= g
                        grad[neg, k] += g
    if n_pairs == 0:
        return 0.0, grad, 0
    return loss_sum / n_pairs, grad / n_pairs, n_pairs


@njit(cache=True)
def jacobi_eigh(a, tol, max_sweeps):
    a = a.copy()
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return np.diag(a).copy(), v
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) > off:
                    off = abs(a[p, q])
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
                app = a[p, p]
                aqq = a[q, q]
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - sn * akq
                    a[k, q] = sn * akp + c * akq
                for k in range(n):
                    a[p, k] = a[k, p]
                    a[q, k] = a[k, q]
                a[p, p] = c * c * app - 2.0 * sn * c * apq + sn * sn * aqq
                a[q, q] = sn * sn * app + 2.0 * sn * c * apq + c * c * aqq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - sn * vkq
                    v[k, q] = sn * vkp + c * vkq
    return np.diag(a).copy(), v
