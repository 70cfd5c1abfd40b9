"""Compiled inner loops for the Gibbs sampler and the held-out estimator.

All randomness is passed in as pre-drawn uniform variates so the kernels are
pure functions of their inputs; the caller owns the generator.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def word_weights(
    out, i, w, sigma,
    n_d, n_dl, n_dlz, n_lz, n_lzw, m_d, m_dl,
    gamma, gamma_sum, alpha, alpha_sum, beta, beta_sum,
):
    """Unnormalised (S, K) full conditional of one word token, written to ``out``.

    Counts must already exclude the token. Returns the total weight.
    """
    S, K = out.shape
    doc_den = n_d[i] + sigma * m_d[i] + gamma_sum
    total = 0.0
    for l in range(S):
        f1 = (n_dl[i, l] + sigma * m_dl[i, l] + gamma[l]) / doc_den
        topic_den = n_dl[i, l] + alpha_sum[l]
        for z in range(K):
            b = beta[l, z, w]
            if b == 0.0 and n_lzw[l, z, w] == 0:
                out[l, z] = 0.0
                continue
            f2 = (n_dlz[i, l, z] + alpha[l, z]) / topic_den
            f3 = (n_lzw[l, z, w] + b) / (n_lz[l, z] + beta_sum[l, z])
            v = f1 * f2 * f3
            out[l, z] = v
            total += v
    return total


@njit(**_JIT)
def rating_weights(
    out, i, r, sigma,
    n_d, n_dl, m_d, m_dl, m_l, m_lr,
    gamma, gamma_sum, delta, delta_sum,
):
    """Unnormalised length-S conditional of one rating token (value ``r`` in 1..5)."""
    S = out.shape[0]
    doc_den = n_d[i] + sigma * m_d[i] + gamma_sum
    total = 0.0
    for l in range(S):
        f1 = (n_dl[i, l] + sigma * m_dl[i, l] + gamma[l]) / doc_den
        f2 = (m_lr[l, r - 1] + delta[l, r - 1]) / (m_l[l] + delta_sum[l])
        v = f1 * f2
        out[l] = v
        total += v
    return total


@njit(**_JIT)
def draw_cell(flat_weights, total, u):
    """Inverse-CDF draw over unnormalised weights using one uniform in [0, 1)."""
    target = u * total
    acc = 0.0
    last = -1
    for k in range(flat_weights.shape[0]):
        wk = flat_weights[k]
        if wk > 0.0:
            acc += wk
            last = k
            if target < acc:
                return k
    # round-off at the upper end: fall back to the last admissible cell
    return last


@njit(**_JIT)
def sweep(
    word_ids, word_ptr, ls, zs, rating_vals, rating_ptr, lr,
    n_d, n_dl, n_dlz, n_lz, n_lzw, m_d, m_dl, m_l, m_lr,
    gamma, alpha, beta, delta, sigma,
    u_words, u_ratings,
):
    """One systematic-scan Gibbs pass. Returns -1 on success or the flat
    index of the first word token whose conditional vanished everywhere."""
    S, K = alpha.shape
    D = word_ptr.shape[0] - 1
    gamma_sum = gamma.sum()
    alpha_sum = alpha.sum(axis=1)
    beta_sum = beta.sum(axis=2)
    delta_sum = delta.sum(axis=1)
    table = np.empty((S, K))
    flat = table.reshape(S * K)
    rvec = np.empty(S)
    for i in range(D):
        for t in range(word_ptr[i], word_ptr[i + 1]):
            w = word_ids[t]
            l = ls[t]
            z = zs[t]
            n_d[i] -= 1
            n_dl[i, l] -= 1
            n_dlz[i, l, z] -= 1
            n_lz[l, z] -= 1
            n_lzw[l, z, w] -= 1
            total = word_weights(table, i, w, sigma, n_d, n_dl, n_dlz, n_lz, n_lzw, m_d, m_dl,
                                 gamma, gamma_sum, alpha, alpha_sum, beta, beta_sum)
            if not total > 0.0:
                return t
            k = draw_cell(flat, total, u_words[t])
            l = k // K
            z = k % K
            ls[t] = l
            zs[t] = z
            n_d[i] += 1
            n_dl[i, l] += 1
            n_dlz[i, l, z] += 1
            n_lz[l, z] += 1
            n_lzw[l, z, w] += 1
        for t in range(rating_ptr[i], rating_ptr[i + 1]):
            r = rating_vals[t]
            l = lr[t]
            m_d[i] -= 1
            m_dl[i, l] -= 1
            m_l[l] -= 1
            m_lr[l, r - 1] -= 1
            total = rating_weights(rvec, i, r, sigma, n_d, n_dl, m_d, m_dl, m_l, m_lr,
                                   gamma, gamma_sum, delta, delta_sum)
            l = draw_cell(rvec, total, u_ratings[t])
            lr[t] = l
            m_d[i] += 1
            m_dl[i, l] += 1
            m_l[l] += 1
            m_lr[l, r - 1] += 1
    return -1


@njit(**_JIT)
def left_to_right(word_ids, ratings, phi, mu, gamma, alpha, sigma, n_particles, rating_burn, uniforms):
    """Left-to-right sequential estimate of log P(words | phi, ratings) for one document.

    Each particle carries sentiment/topic labels for the words seen so far
    and sentiment labels for the document's ratings. Rating labels are
    scored against the fixed ``mu``; their counts enter the document-level
    sentiment factor with weight ``sigma`` (pass an empty ``ratings`` array
    to score words alone).

    Returns (log likelihood, offending position); the position is -1 unless
    some word has zero predictive probability, in which case the
    log likelihood is -inf.
    """
    S, K = alpha.shape
    N = word_ids.shape[0]
    M = ratings.shape[0]
    gamma_sum = gamma.sum()
    alpha_sum = alpha.sum(axis=1)
    table = np.empty((S, K))
    flat = table.reshape(S * K)
    rvec = np.empty(S)
    ls = np.zeros((n_particles, N), dtype=np.int64)
    zs = np.zeros((n_particles, N), dtype=np.int64)
    lr = np.zeros((n_particles, M), dtype=np.int64)
    n_l = np.zeros((n_particles, S))
    n_lz = np.zeros((n_particles, S, K))
    m_l = np.zeros((n_particles, S))
    u_pos = 0

    # initial rating labels: a short Gibbs run on the ratings alone
    for p in range(n_particles):
        for j in range(M):
            r = ratings[j]
            tot = 0.0
            for l in range(S):
                rvec[l] = gamma[l] * mu[l, r - 1]
                tot += rvec[l]
            l = draw_cell(rvec, tot, uniforms[u_pos])
            u_pos += 1
            lr[p, j] = l
            m_l[p, l] += 1.0
        for _ in range(rating_burn):
            for j in range(M):
                r = ratings[j]
                m_l[p, lr[p, j]] -= 1.0
                tot = 0.0
                for l in range(S):
                    rvec[l] = (sigma * m_l[p, l] + gamma[l]) * mu[l, r - 1]
                    tot += rvec[l]
                l = draw_cell(rvec, tot, uniforms[u_pos])
                u_pos += 1
                lr[p, j] = l
                m_l[p, l] += 1.0

    loglik = 0.0
    for n in range(N):
        acc = 0.0
        for p in range(n_particles):
            # one Gibbs pass over earlier word labels and the rating labels
            for j in range(n):
                w = word_ids[j]
                l = ls[p, j]
                z = zs[p, j]
                n_l[p, l] -= 1.0
                n_lz[p, l, z] -= 1.0
                tot = 0.0
                for l2 in range(S):
                    f1 = n_l[p, l2] + sigma * m_l[p, l2] + gamma[l2]
                    den2 = n_l[p, l2] + alpha_sum[l2]
                    for z2 in range(K):
                        v = f1 * (n_lz[p, l2, z2] + alpha[l2, z2]) / den2 * phi[l2, z2, w]
                        table[l2, z2] = v
                        tot += v
                k = draw_cell(flat, tot, uniforms[u_pos])
                u_pos += 1
                l = k // K
                z = k % K
                ls[p, j] = l
                zs[p, j] = z
                n_l[p, l] += 1.0
                n_lz[p, l, z] += 1.0
            if n > 0:
                for j in range(M):
                    r = ratings[j]
                    m_l[p, lr[p, j]] -= 1.0
                    tot = 0.0
                    for l2 in range(S):
                        rvec[l2] = (n_l[p, l2] + sigma * m_l[p, l2] + gamma[l2]) * mu[l2, r - 1]
                        tot += rvec[l2]
                    l = draw_cell(rvec, tot, uniforms[u_pos])
                    u_pos += 1
                    lr[p, j] = l
                    m_l[p, l] += 1.0
            # predictive probability of the next word under this particle
            w = word_ids[n]
            den1 = n + sigma * M + gamma_sum
            tot = 0.0
            for l2 in range(S):
                f1 = (n_l[p, l2] + sigma * m_l[p, l2] + gamma[l2]) / den1
                den2 = n_l[p, l2] + alpha_sum[l2]
                for z2 in range(K):
                    v = f1 * (n_lz[p, l2, z2] + alpha[l2, z2]) / den2 * phi[l2, z2, w]
                    table[l2, z2] = v
                    tot += v
            if not tot > 0.0:
                return -np.inf, n
            acc += tot
            k = draw_cell(flat, tot, uniforms[u_pos])
            u_pos += 1
            ls[p, n] = k // K
            zs[p, n] = k % K
            n_l[p, k // K] += 1.0
            n_lz[p, k // K, k % K] += 1.0
        loglik += np.log(acc / n_particles)
    return loglik, -1


def left_to_right_draws(n_words: int, n_ratings: int, n_particles: int, rating_burn: int) -> int:
    """Number of uniforms ``left_to_right`` consumes."""
    per_particle = n_ratings * (1 + rating_burn)
    for n in range(n_words):
        per_particle += n + 1 + (n_ratings if n > 0 else 0)
    return n_particles * per_particle


def as_int(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)
