"""Shared brute-force oracles used across test modules.

Everything here is deliberately naive: double loops, exhaustive enumeration,
restricted-growth strings. These implementations are the ground truth the
package code is checked against, so they must stay independent of it.
"""

import itertools

import numpy as np

from microlink.model import LinkageState


def all_partitions(I):
    """All set partitions of {0..I-1} as canonical label vectors (1-based)."""
    out = []
    labels = np.ones(I, dtype=np.int64)

    def grow(i, maxlab):
        if i == I:
            out.append(labels.copy())
            return
        for lab in range(1, maxlab + 2):
            labels[i] = lab
            grow(i + 1, max(maxlab, lab))

    grow(1, 1)
    return out


def naive_network_loglik(edges, xi, beta, U):
    """Double loop over all record pairs; log Bernoulli terms via plain math."""
    I = len(xi)
    eset = {(min(i, j), max(i, j)) for i, j in edges}
    ll = 0.0
    for i in range(I):
        for j in range(i + 1, I):
            d = np.linalg.norm(U[xi[i] - 1] - U[xi[j] - 1])
            eta = beta - d
            p = 1.0 / (1.0 + np.exp(-eta))
            y = 1 if (i, j) in eset else 0
            ll += y * np.log(p) + (1 - y) * np.log1p(-p)
    return ll


def naive_profile_loglik(P, xi, Pi, W, thetas):
    ll = 0.0
    I, L = P.shape
    for i in range(I):
        for l in range(L):
            if W[i, l] == 0:
                assert P[i, l] == Pi[xi[i] - 1, l]
            else:
                ll += np.log(thetas[l][P[i, l]])
    return ll


def normalized_pmf_over_partitions(log_pmf_fn, I):
    """Evaluate log_pmf on every partition of I and normalize to sum 1."""
    parts = all_partitions(I)
    logs = np.array([log_pmf_fn(LinkageState(p)) for p in parts])
    finite = np.isfinite(logs)
    m = logs[finite].max()
    w = np.where(finite, np.exp(np.where(finite, logs, m) - m), 0.0)
    return parts, w / w.sum()


def partition_counts(samples):
    """Frequency table keyed by canonical label tuples."""
    counts = {}
    for s in samples:
        key = tuple(LinkageState(s).xi.tolist()) if not isinstance(s, LinkageState) else tuple(s.xi.tolist())
        counts[key] = counts.get(key, 0) + 1
    return counts


def total_variation(parts, probs, counts, n_draws):
    emp = {tuple(p.tolist()): 0.0 for p in parts}
    for key, c in counts.items():
        emp[key] = c / n_draws
    return 0.5 * sum(abs(emp[tuple(p.tolist())] - q) for p, q in zip(parts, probs))


def pair_set(xi):
    """Unordered co-clustered record pairs of a label vector."""
    I = len(xi)
    return {(i, j) for i, j in itertools.combinations(range(I), 2) if xi[i] == xi[j]}
