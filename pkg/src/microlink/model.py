"""Core domain types and likelihood evaluators for the de-duplication model.

The joint model couples an undirected network among records with categorical
profile fields through a shared cluster assignment of records to latent
entities. Network edges follow a logistic latent-distance model; profile
cells follow a hit-miss distortion model around each entity's true values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit as _expit

from .errors import ContractViolationError, ElicitationError

__all__ = [
    "RecordTable",
    "Network",
    "LinkageState",
    "LatentState",
    "HyperParams",
    "expit",
    "edge_logit",
    "network_loglik",
    "profile_loglik",
    "marginal_record_field_lik",
    "elicit_network_hypers",
]


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RecordTable:
    """I x L matrix of categorical codes with per-field domain sizes."""

    values: np.ndarray         # (I, L) integer codes, 0-based
    domain_sizes: np.ndarray   # (L,) M_l per field

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int64)
        domain = np.asarray(self.domain_sizes, dtype=np.int64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "domain_sizes", domain)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ContractViolationError("record table must be a nonempty 2-d matrix")
        if domain.shape != (values.shape[1],):
            raise ContractViolationError("one domain size per field required")
        if np.any(domain < 2):
            raise ContractViolationError("every field needs at least 2 categories")
        if np.any(values < 0) or np.any(values >= domain[None, :]):
            raise ContractViolationError("category code out of range for its field")

    @property
    def I(self) -> int:
        return self.values.shape[0]

    @property
    def L(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Network:
    """Undirected simple graph on record indices; edges stored as (E, 2) with i < j."""

    n_nodes: int
    edges: np.ndarray  # (E, 2) int, each row (i, j) with i < j

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        order = np.lexsort((edges[:, 1], edges[:, 0])) if len(edges) else np.array([], dtype=np.int64)
        edges = edges[order]
        object.__setattr__(self, "edges", edges)
        if self.n_nodes < 1:
            raise ContractViolationError("network needs at least one node")
        if len(edges):
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise ContractViolationError("edges must satisfy i < j (no self-loops)")
            if np.any(edges < 0) or np.any(edges >= self.n_nodes):
                raise ContractViolationError("edge endpoint out of range")
            if len(np.unique(edges[:, 0] * self.n_nodes + edges[:, 1])) != len(edges):
                raise ContractViolationError("duplicate edges")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def adjacency_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Symmetric adjacency as (indptr, indices); neighbor lists sorted."""
        deg = np.zeros(self.n_nodes, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        np.cumsum(deg, out=indptr[1:])
        indices = np.empty(2 * self.n_edges, dtype=np.int64)
        fill = indptr[:-1].copy()
        for i, j in self.edges:
            indices[fill[i]] = j
            fill[i] += 1
            indices[fill[j]] = i
            fill[j] += 1
        for i in range(self.n_nodes):
            indices[indptr[i]:indptr[i + 1]].sort()
        return indptr, indices

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def dense_adjacency(self) -> np.ndarray:
        A = np.zeros((self.n_nodes, self.n_nodes), dtype=np.int8)
        if len(self.edges):
            A[self.edges[:, 0], self.edges[:, 1]] = 1
            A[self.edges[:, 1], self.edges[:, 0]] = 1
        return A


def _canonicalize(labels: np.ndarray) -> np.ndarray:
    """Relabel cluster ids to 1..N in order of first appearance."""
    out = np.empty(len(labels), dtype=np.int64)
    seen: dict[int, int] = {}
    for idx, lab in enumerate(labels):
        key = int(lab)
        if key not in seen:
            seen[key] = len(seen) + 1
        out[idx] = seen[key]
    return out


@dataclass(frozen=True)
class LinkageState:
    """Cluster assignment of records with canonical labels 1..N.

    `sizes[n-1]` is the size of cluster n; `allelic[s-1]` counts clusters of
    size s (length I). Both are derived from `xi` at construction.
    """

    xi: np.ndarray
    n_clusters: int = field(init=False)
    sizes: np.ndarray = field(init=False)
    allelic: np.ndarray = field(init=False)

    def __post_init__(self):
        raw = np.asarray(self.xi, dtype=np.int64)
        if raw.ndim != 1 or len(raw) < 1:
            raise ContractViolationError("linkage state needs a nonempty label vector")
        xi = _canonicalize(raw)
        object.__setattr__(self, "xi", xi)
        n = int(xi.max())
        sizes = np.bincount(xi, minlength=n + 1)[1:]
        allelic = np.bincount(sizes, minlength=len(xi) + 1)[1:]
        object.__setattr__(self, "n_clusters", n)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "allelic", allelic)

    @classmethod
    def from_labels(cls, labels) -> "LinkageState":
        return cls(np.asarray(labels))

    @classmethod
    def from_partition(cls, blocks, n_records: int) -> "LinkageState":
        xi = np.zeros(n_records, dtype=np.int64)
        for lab, block in enumerate(blocks, start=1):
            for i in block:
                xi[i] = lab
        if np.any(xi == 0):
            raise ContractViolationError("partition does not cover all records")
        return cls(xi)

    @property
    def I(self) -> int:
        return len(self.xi)

    def blocks(self) -> list[frozenset]:
        out = [set() for _ in range(self.n_clusters)]
        for i, lab in enumerate(self.xi):
            out[lab - 1].add(i)
        return [frozenset(b) for b in out]

    def partition_key(self) -> tuple:
        """Hashable canonical representation of the induced set partition."""
        return tuple(self.xi.tolist())


@dataclass
class LatentState:
    """Continuous and discrete latent parameters accompanying a LinkageState."""

    beta: float
    sigma2: float
    U: np.ndarray             # (N, K) entity positions
    Pi: np.ndarray            # (N, L) entity true field codes
    theta_fields: list        # per field, length-M_l probability vector
    psi: np.ndarray           # (L,) distortion probabilities
    W: np.ndarray             # (I, L) binary distortion indicators

    def validate(self, linkage: LinkageState, table: RecordTable) -> None:
        if self.sigma2 <= 0:
            raise ContractViolationError("sigma2 must be positive")
        if self.U.shape[0] != linkage.n_clusters or self.Pi.shape[0] != linkage.n_clusters:
            raise ContractViolationError("U/Pi row count must equal number of clusters")
        for l, th in enumerate(self.theta_fields):
            if abs(float(np.sum(th)) - 1.0) > 1e-12 or np.any(np.asarray(th) < 0):
                raise ContractViolationError(f"theta for field {l} is not a probability vector")
        if np.any((self.psi <= 0) | (self.psi >= 1)):
            raise ContractViolationError("psi must lie in (0,1)")
        mismatch = (self.W == 0) & (table.values != self.Pi[linkage.xi - 1])
        if np.any(mismatch):
            i, l = np.argwhere(mismatch)[0]
            raise ContractViolationError(
                f"support constraint violated at record {i}, field {l}: w=0 but p != pi"
            )


@dataclass(frozen=True)
class HyperParams:
    """Fixed hyperparameters of the continuous-parameter priors."""

    omega: float = 100.0      # prior sd of the network intercept
    a_sigma: float = 6.0
    b_sigma: float = 1.0
    alpha: float = 1.0        # symmetric Dirichlet parameter for each field
    a_dist: float = 1.0       # Beta(a, b) prior on each distortion probability
    b_dist: float = 99.0
    K: int = 2

    def __post_init__(self):
        vals = (self.omega, self.a_sigma, self.b_sigma, self.alpha, self.a_dist, self.b_dist)
        if any(v <= 0 for v in vals) or self.K < 1:
            raise ContractViolationError("hyperparameters must be positive, K >= 1")


# ---------------------------------------------------------------------------
# likelihood evaluators
# ---------------------------------------------------------------------------


def expit(x):
    """Numerically stable logistic function 1/(1+exp(-x))."""
    return _expit(x)


def edge_logit(beta: float, u_a: np.ndarray, u_b: np.ndarray) -> float:
    """Edge log-odds: intercept minus Euclidean distance between positions."""
    u_a = np.asarray(u_a, dtype=float)
    u_b = np.asarray(u_b, dtype=float)
    if u_a.shape != u_b.shape:
        raise ContractViolationError("position vectors must have equal dimension")
    return float(beta - np.linalg.norm(u_a - u_b))


def _softplus(x: np.ndarray) -> np.ndarray:
    # log(1 + e^x), overflow-safe
    return np.logaddexp(0.0, x)


def network_loglik(net: Network, linkage: LinkageState, beta: float, U: np.ndarray) -> float:
    """Bernoulli log-likelihood of all record pairs i < i'.

    Pairs within the same cluster are included: their distance is 0, so the
    edge probability is expit(beta).
    """
    U = np.asarray(U, dtype=float)
    if net.n_nodes != linkage.I:
        raise ContractViolationError("network size does not match linkage")
    if U.shape[0] != linkage.n_clusters:
        raise ContractViolationError("one position row per cluster required")

    # aggregate by cluster pair: all pairs in block (n, m) share one logit
    sizes = linkage.sizes.astype(np.int64)
    n = linkage.n_clusters
    diff = U[:, None, :] - U[None, :, :]
    dist = np.sqrt(np.einsum("nmk,nmk->nm", diff, diff))
    eta = beta - dist
    sp = _softplus(eta)

    T = np.outer(sizes, sizes).astype(float)
    np.fill_diagonal(T, sizes * (sizes - 1) / 2.0)

    # E[n, m] = edge count between clusters n and m; diagonal = 2 * within count
    E = np.zeros((n, n), dtype=np.int64)
    if net.n_edges:
        ci = linkage.xi[net.edges[:, 0]] - 1
        cj = linkage.xi[net.edges[:, 1]] - 1
        np.add.at(E, (ci, cj), 1)
        np.add.at(E, (cj, ci), 1)
    # ll over pairs = sum_blocks E*eta - T*softplus(eta)
    iu = np.triu_indices(n, k=1)
    ll = float(np.sum(E[iu] * eta[iu] - T[iu] * sp[iu]))
    dg = np.arange(n)
    ll += float(np.sum((np.diag(E) / 2.0) * eta[dg, dg] - np.diag(T) * sp[dg, dg]))
    return ll


def profile_loglik(
    tab: RecordTable,
    linkage: LinkageState,
    Pi: np.ndarray,
    W: np.ndarray,
    theta_fields: list,
) -> float:
    """Log-likelihood of the profile matrix given latent true values and distortions.

    Cells with w=0 are point masses (the support constraint must already
    hold); cells with w=1 contribute log theta_l(p).
    """
    Pi = np.asarray(Pi)
    W = np.asarray(W)
    latent = Pi[linkage.xi - 1]
    bad = (W == 0) & (tab.values != latent)
    if np.any(bad):
        i, l = np.argwhere(bad)[0]
        raise ContractViolationError(
            f"support constraint violated at record {i}, field {l} (sampler bug)"
        )
    ll = 0.0
    for l in range(tab.L):
        mask = W[:, l] == 1
        if np.any(mask):
            th = np.asarray(theta_fields[l], dtype=float)
            ll += float(np.sum(np.log(th[tab.values[mask, l]])))
    return ll


def marginal_record_field_lik(p: int, pi_val: int, psi_l: float, theta_l: np.ndarray) -> float:
    """Field likelihood of one record cell with the distortion indicator summed out."""
    theta_l = np.asarray(theta_l, dtype=float)
    hit = 1.0 if p == pi_val else 0.0
    return float((1.0 - psi_l) * hit + psi_l * theta_l[p])


def elicit_network_hypers(I: int, K: int) -> HyperParams:
    """Default hyperparameters for the network and profile priors at size I.

    The latent-variance prior scale grows with I so that prior pairwise
    distances remain compatible with a non-degenerate network.
    """
    if K < 1:
        raise ElicitationError("latent dimension must be at least 1")
    if I <= 4:
        raise ElicitationError(f"elicitation needs I > 4 (got I={I}); sqrt(I)-2 must be positive")
    a_sigma = 2.0 + 0.5 ** (-2)
    b_sigma = (
        (a_sigma - 1.0)
        * (math.sqrt(I) / (math.sqrt(I) - 2.0))
        * (math.pi ** (K / 2.0) / math.gamma(K / 2.0 + 1.0))
        * I ** (2.0 / K)
    )
    return HyperParams(
        omega=100.0,
        a_sigma=a_sigma,
        b_sigma=b_sigma,
        alpha=1.0,
        a_dist=1.0,
        b_dist=99.0,
        K=K,
    )
