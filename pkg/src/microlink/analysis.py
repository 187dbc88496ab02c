"""Posterior summaries: point-estimate linkage, pairwise metrics, diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError
from .model import LinkageState, Network
from .priors import PriorSpec, prior_sample

__all__ = [
    "PosteriorSimilarity",
    "EvalReport",
    "similarity_matrix",
    "binder_point_estimate",
    "pairwise_metrics",
    "population_size_summary",
    "network_stats",
    "microclustering_diagnostic",
]


@dataclass(frozen=True)
class PosteriorSimilarity:
    """Pairwise co-clustering frequencies across kept samples."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ContractViolationError("similarity matrix must be square")
        if not np.allclose(m, m.T) or np.any(m < 0) or np.any(m > 1):
            raise ContractViolationError("similarity entries must be symmetric in [0,1]")
        if not np.allclose(np.diag(m), 1.0):
            raise ContractViolationError("similarity diagonal must be 1")

    @property
    def I(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class EvalReport:
    recall: float
    precision: float
    f1: float
    n_mean: float
    n_sd: float
    seconds_per_100_iter: float = float("nan")


def similarity_matrix(samples) -> PosteriorSimilarity:
    """Fraction of samples in which each record pair shares a cluster."""
    rows = [s.xi if isinstance(s, LinkageState) else np.asarray(s) for s in samples]
    if not rows:
        raise ContractViolationError("need at least one posterior sample")
    I = len(rows[0])
    acc = np.zeros((I, I), dtype=np.int64)
    for xi in rows:
        acc += xi[:, None] == xi[None, :]
    return PosteriorSimilarity(acc / len(rows))


def binder_point_estimate(sim: PosteriorSimilarity) -> LinkageState:
    """Greedy agglomerative minimizer of the expected Binder loss.

    With equal misclassification costs the loss decreases by
    sum_{cross pairs} (sim - 1/2) when two clusters merge, so we repeatedly
    merge the pair with the largest positive gain. Ties break on the lowest
    index pair so the estimate is deterministic.
    """
    I = sim.I
    gain = sim.matrix - 0.5
    np.fill_diagonal(gain, -np.inf)
    active = np.ones(I, dtype=bool)
    labels = np.arange(I)
    members: list[list[int]] = [[i] for i in range(I)]

    while True:
        masked = np.where(active[:, None] & active[None, :], gain, -np.inf)
        best = np.argmax(masked)
        a, b = divmod(int(best), I)
        if masked[a, b] <= 0:
            break
        a, b = min(a, b), max(a, b)
        # merged cluster keeps slot a; gains are additive over members
        gain[a, :] += gain[b, :]
        gain[:, a] = gain[a, :]
        gain[a, a] = -np.inf
        active[b] = False
        members[a].extend(members[b])
        labels[members[b]] = labels[members[a][0]]

    return LinkageState(labels + 1)


def binder_loss(lk: LinkageState, sim: PosteriorSimilarity) -> float:
    """Expected Binder loss of a partition under the similarity matrix."""
    co = lk.xi[:, None] == lk.xi[None, :]
    iu = np.triu_indices(lk.I, k=1)
    s = sim.matrix[iu]
    return float(np.sum(np.where(co[iu], 1.0 - s, s)))


def pairwise_metrics(est: LinkageState, truth: LinkageState) -> EvalReport:
    """Recall/precision/F1 over unordered co-clustered record pairs."""
    if est.I != truth.I:
        raise ContractViolationError("point estimate and truth must cover the same records")
    co_e = est.xi[:, None] == est.xi[None, :]
    co_t = truth.xi[:, None] == truth.xi[None, :]
    iu = np.triu_indices(est.I, k=1)
    e, t = co_e[iu], co_t[iu]
    n_e, n_t = int(e.sum()), int(t.sum())
    n_both = int((e & t).sum())
    precision = 1.0 if n_e == 0 else n_both / n_e
    recall = 1.0 if n_t == 0 else n_both / n_t
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EvalReport(recall=recall, precision=precision, f1=f1,
                      n_mean=float(est.n_clusters), n_sd=0.0)


def population_size_summary(samples) -> tuple[float, float]:
    """Posterior mean and sd of the number of clusters across kept draws."""
    ns = np.array([
        s.n_clusters if isinstance(s, LinkageState) else int(np.max(s))
        for s in samples
    ], dtype=float)
    if len(ns) < 2:
        raise ContractViolationError("need at least two samples for a spread estimate")
    return float(ns.mean()), float(ns.std(ddof=1))


def network_stats(net: Network) -> tuple[float, float, float]:
    """(global transitivity, degree assortativity, density).

    Assortativity is the Pearson correlation of endpoint degrees over
    directed edge copies; it is NaN when the degree variance is zero.
    """
    I = net.n_nodes
    if I < 3:
        raise ContractViolationError("network statistics need at least 3 nodes")
    A = net.dense_adjacency().astype(np.float64)
    deg = A.sum(axis=1)
    triangles = float(np.trace(A @ A @ A)) / 6.0
    triples = float(np.sum(deg * (deg - 1) / 2.0))
    transitivity = 3.0 * triangles / triples if triples > 0 else float("nan")

    if net.n_edges == 0:
        assortativity = float("nan")
    else:
        di = deg[net.edges[:, 0]]
        dj = deg[net.edges[:, 1]]
        x = np.concatenate([di, dj])
        y = np.concatenate([dj, di])
        vx = x.var()
        if vx < 1e-12:
            assortativity = float("nan")
        else:
            assortativity = float(np.mean((x - x.mean()) * (y - y.mean())) / vx)

    density = 2.0 * net.n_edges / (I * (I - 1))
    return transitivity, assortativity, density


def microclustering_diagnostic(
    spec: PriorSpec,
    I_grid,
    draws: int,
    rng: np.random.Generator,
) -> list[tuple[int, float]]:
    """Monte Carlo estimates of E[max cluster size / I] along a grid of I."""
    grid = list(I_grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ContractViolationError("I grid must be increasing")
    out = []
    for I in grid:
        vals = [prior_sample(spec, I, rng).sizes.max() / I for _ in range(draws)]
        out.append((I, float(np.mean(vals))))
    return out


def write_diagnostic_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("I,mean_max_cluster_fraction\n")
        for I, v in rows:
            fh.write(f"{I},{v:.10g}\n")
