"""Hot numeric kernels.

Every kernel exists twice: a loop-style version compiled by numba (suffix
``_nb``) and a numpy version (suffix ``_np``). The public names at the bottom
of the module dispatch on :data:`detsched._jit.USE_NUMBA`. Random numbers are
always drawn by the caller and passed in, so both paths consume identical
streams and return identical results up to floating-point rounding.
"""
import math

import numpy as np

from ._jit import USE_NUMBA, njit

# [K]_ii at or below this is treated as "never scheduled".
PALM_EPS = 1e-12
# Projection sampling gives up when every selection weight is below this.
SAMPLE_EPS = 1e-14

STATUS_OK = 0
STATUS_EXHAUSTED = 1


# ---------------------------------------------------------------- marginal K


@njit
def marginal_from_log_quality_nb(w, S):
    n = w.shape[0]
    q = np.exp(w)
    L = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            L[a, b] = q[a] * S[a, b] * q[b]
    lam, V = np.linalg.eigh(L)
    mu = np.empty(n)
    for k in range(n):
        lk = lam[k] if lam[k] > 0.0 else 0.0
        mu[k] = lk / (1.0 + lk)
    K = np.zeros((n, n))
    for a in range(n):
        for b in range(a, n):
            s = 0.0
            for k in range(n):
                s += V[a, k] * mu[k] * V[b, k]
            K[a, b] = s
            K[b, a] = s
    return K


def marginal_from_log_quality_np(w, S):
    q = np.exp(w)
    L = q[:, None] * S * q[None, :]
    lam, V = np.linalg.eigh(L)
    lam = np.clip(lam, 0.0, None)
    K = (V * (lam / (1.0 + lam))) @ V.T
    return 0.5 * (K + K.T)


# ------------------------------------------------------------- coverage terms


@njit
def coverage_terms_nb(K, omh, wvec):
    """Inclusion ``[K]_ii`` and conditional coverage for every link.

    ``omh[i, j] = 1 - h_{x_i}(x_j)``; ``wvec[i]`` is the noise factor of link i.
    Conditional coverage is NaN where ``[K]_ii <= PALM_EPS``.
    """
    n = K.shape[0]
    incl = np.empty(n)
    cond = np.empty(n)
    m = n - 1
    M = np.empty((m, m))
    s = np.empty(m)
    for i in range(n):
        kii = K[i, i]
        incl[i] = kii
        if kii <= PALM_EPS:
            cond[i] = np.nan
            continue
        if m == 0:
            cond[i] = wvec[i]
            continue
        ai = 0
        for a in range(n):
            if a != i:
                s[ai] = math.sqrt(omh[i, a])
                ai += 1
        ai = 0
        for a in range(n):
            if a == i:
                continue
            bi = 0
            for b in range(n):
                if b == i:
                    continue
                M[ai, bi] = s[ai] * (K[a, b] - K[a, i] * K[b, i] / kii) * s[bi]
                bi += 1
            ai += 1
        lam = np.linalg.eigvalsh(M)
        det = 1.0
        for k in range(m):
            lk = min(max(lam[k], 0.0), 1.0)
            det *= 1.0 - lk
        c = det * wvec[i]
        cond[i] = min(max(c, 0.0), 1.0)
    return incl, cond


def coverage_terms_np(K, omh, wvec):
    n = K.shape[0]
    incl = np.diag(K).copy()
    if n == 1:
        cond = np.where(incl > PALM_EPS, wvec, np.nan)
        return incl, cond
    ok = incl > PALM_EPS
    kz = np.where(ok, incl, 1.0)
    # full[i, a, b] = K[a, b] - K[a, i] K[b, i] / K[i, i], scaled by sqrt(omh)
    full = K[None, :, :] - K[:, :, None] * K[:, None, :] / kz[:, None, None]
    sq = np.sqrt(omh)
    full = sq[:, :, None] * full * sq[:, None, :]
    others = np.array([[j for j in range(n) if j != i] for i in range(n)])
    M = full[np.arange(n)[:, None, None], others[:, :, None], others[:, None, :]]
    lam = np.clip(np.linalg.eigvalsh(M), 0.0, 1.0)
    cond = np.clip(np.prod(1.0 - lam, axis=1) * wvec, 0.0, 1.0)
    cond = np.where(ok, cond, np.nan)
    return incl, cond


# ----------------------------------------------------------------- utility


@njit
def utility_log_quality_nb(w, S, omh, wvec, log_r0):
    n = w.shape[0]
    K = marginal_from_log_quality_nb(w, S)
    incl, cond = coverage_terms_nb(K, omh, wvec)
    total = n * log_r0
    for i in range(n):
        if not (incl[i] > PALM_EPS) or not (cond[i] > 0.0):
            return -np.inf
        total += math.log(incl[i]) + math.log(cond[i])
    return total


def utility_log_quality_np(w, S, omh, wvec, log_r0):
    K = marginal_from_log_quality_np(w, S)
    incl, cond = coverage_terms_np(K, omh, wvec)
    if not (np.all(incl > PALM_EPS) and np.all(cond > 0.0)):
        return -np.inf
    return float(len(w) * log_r0 + np.sum(np.log(incl)) + np.sum(np.log(cond)))


@njit
def fd_gradient_nb(w, S, omh, wvec, log_r0, step):
    n = w.shape[0]
    g = np.empty(n)
    x = w.copy()
    for k in range(n):
        x[k] = w[k] + step
        up = utility_log_quality_nb(x, S, omh, wvec, log_r0)
        x[k] = w[k] - step
        down = utility_log_quality_nb(x, S, omh, wvec, log_r0)
        x[k] = w[k]
        g[k] = (up - down) / (2.0 * step)
    return g


def fd_gradient_np(w, S, omh, wvec, log_r0, step):
    n = w.shape[0]
    g = np.empty(n)
    x = w.copy()
    for k in range(n):
        x[k] = w[k] + step
        up = utility_log_quality_np(x, S, omh, wvec, log_r0)
        x[k] = w[k] - step
        down = utility_log_quality_np(x, S, omh, wvec, log_r0)
        x[k] = w[k]
        g[k] = (up - down) / (2.0 * step)
    return g


# ----------------------------------------------------------------- sampling


@njit
def sample_masks_nb(lam, V, uniforms):
    """Spectral DPP sampler, one sample per row of ``uniforms``.

    ``uniforms`` has shape (m, 2n): the first n entries decide which
    eigenvectors are kept, the next ones drive the sequential point draws.
    """
    n = lam.shape[0]
    m = uniforms.shape[0]
    masks = np.zeros((m, n), dtype=np.bool_)
    status = np.zeros(m, dtype=np.int8)
    W = np.empty((n, n))
    weights = np.empty(n)
    for s in range(m):
        k = 0
        for j in range(n):
            if uniforms[s, j] < lam[j]:
                for a in range(n):
                    W[a, k] = V[a, j]
                k += 1
        cols = k
        for step in range(k):
            total = 0.0
            wmax = 0.0
            for a in range(n):
                acc = 0.0
                for c in range(cols):
                    acc += W[a, c] * W[a, c]
                if masks[s, a]:
                    acc = 0.0
                weights[a] = acc
                total += acc
                if acc > wmax:
                    wmax = acc
            if wmax < SAMPLE_EPS:
                status[s] = STATUS_EXHAUSTED
                break
            target = uniforms[s, n + step] * total
            pick = -1
            run = 0.0
            for a in range(n):
                if weights[a] > 0.0:
                    pick = a
                    run += weights[a]
                    if target < run:
                        break
            masks[s, pick] = True
            # eliminate the picked coordinate using the column with the largest entry
            piv = 0
            best = -1.0
            for c in range(cols):
                v = abs(W[pick, c])
                if v > best:
                    best = v
                    piv = c
            pv = W[pick, piv]
            for c in range(cols):
                if c == piv:
                    continue
                f = W[pick, c] / pv
                for a in range(n):
                    W[a, c] -= f * W[a, piv]
            cols -= 1
            if piv != cols:
                for a in range(n):
                    W[a, piv] = W[a, cols]
            # modified Gram-Schmidt on the remaining columns
            for c in range(cols):
                for d in range(c):
                    dot = 0.0
                    for a in range(n):
                        dot += W[a, c] * W[a, d]
                    for a in range(n):
                        W[a, c] -= dot * W[a, d]
                nrm = 0.0
                for a in range(n):
                    nrm += W[a, c] * W[a, c]
                nrm = math.sqrt(nrm)
                if nrm > 0.0:
                    for a in range(n):
                        W[a, c] /= nrm
    return masks, status


def sample_masks_np(lam, V, uniforms):
    n = lam.shape[0]
    m = uniforms.shape[0]
    masks = np.zeros((m, n), dtype=bool)
    status = np.zeros(m, dtype=np.int8)
    keep = uniforms[:, :n] < lam[None, :]
    for s in range(m):
        W = V[:, keep[s]].copy()
        for step in range(W.shape[1]):
            weights = np.einsum("ac,ac->a", W, W)
            weights[masks[s]] = 0.0
            if weights.max() < SAMPLE_EPS:
                status[s] = STATUS_EXHAUSTED
                break
            cum = np.cumsum(weights)
            target = uniforms[s, n + step] * cum[-1]
            pick = int(np.searchsorted(cum, target, side="right"))
            pick = min(pick, n - 1)
            while weights[pick] <= 0.0:
                pick -= 1
            masks[s, pick] = True
            piv = int(np.argmax(np.abs(W[pick])))
            W = W - np.outer(W[:, piv], W[pick] / W[pick, piv])
            W = np.delete(W, piv, axis=1)
            if W.shape[1]:
                W, _ = np.linalg.qr(W)
    return masks, status


# ---------------------------------------------------------------- Monte Carlo


@njit
def sinr_success_nb(masks, fades, G, noise, tau):
    """``covered[s, i]``: link i active in sample s and its SINR exceeds tau.

    ``fades[s, i, j]`` is the fade from transmitter j to receiver i and
    ``G[i, j]`` the matching path-loss gain.
    """
    m, n = masks.shape
    covered = np.zeros((m, n), dtype=np.bool_)
    for s in range(m):
        for i in range(n):
            if not masks[s, i]:
                continue
            interf = 0.0
            for j in range(n):
                if j != i and masks[s, j]:
                    interf += fades[s, i, j] * G[i, j]
            covered[s, i] = fades[s, i, i] * G[i, i] > tau * (noise + interf)
    return covered


def sinr_success_np(masks, fades, G, noise, tau):
    n = masks.shape[1]
    off = ~np.eye(n, dtype=bool)
    active = masks[:, None, :] & off[None, :, :]
    with np.errstate(invalid="ignore"):
        power = np.where(active, fades * G[None, :, :], 0.0)
    interf = power.sum(axis=2)
    signal = fades[:, np.arange(n), np.arange(n)] * np.diag(G)[None, :]
    return masks & (signal > tau * (noise + interf))


if USE_NUMBA:
    marginal_from_log_quality = marginal_from_log_quality_nb
    coverage_terms = coverage_terms_nb
    utility_log_quality = utility_log_quality_nb
    fd_gradient = fd_gradient_nb
    sample_masks = sample_masks_nb
    sinr_success = sinr_success_nb
else:
    marginal_from_log_quality = marginal_from_log_quality_np
    coverage_terms = coverage_terms_np
    utility_log_quality = utility_log_quality_np
    fd_gradient = fd_gradient_np
    sample_masks = sample_masks_np
    sinr_success = sinr_success_np
