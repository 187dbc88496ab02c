"""Partition priors on the linkage structure.

Five families are supported:

* ``UP``    -- uniform over partitions whose clusters have size at most 2.
* ``EPP``   -- Ewens-Pitman (Chinese restaurant) prior with a Gamma hyperprior
               on its concentration.
* ``NBNBP`` -- Kolchin-type prior: cluster count and cluster sizes both
               negative binomial (truncated to {1,2,...}).
* ``NBDP``  -- Kolchin-type prior with a Dirichlet-process size distribution,
               marginalized to a Polya urn over cluster sizes.
* ``ABP``   -- allelic binomial prior: a binomial chain over the allelic
               partition (counts of clusters per size) with a hard cap M on
               the largest cluster, which enforces microclustering.

All pmfs are evaluated in log space, conditional on the current values of any
resampled prior parameters. Except where noted they are unnormalized but
consistent across partitions of the same record count, which is all that
Gibbs ratios and enumeration-based normalization checks require.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import betaln, gammaln

from .errors import ContractViolationError, ElicitationError, SamplingError
from .model import LinkageState

__all__ = [
    "AllelicVector",
    "UPSpec",
    "EPPSpec",
    "NBNBPSpec",
    "NBDPSpec",
    "ABPSpec",
    "TruncNegBinom",
    "GeometricN",
    "PointMassN",
    "allelic_of",
    "epp_log_pmf",
    "kpp_log_pmf",
    "nbnb_elicit",
    "nbdp_size_predictive",
    "abp_conditional_log_pmf",
    "abp_allelic_log_pmf",
    "abp_joint_log_pmf",
    "abp_m2_marginal_log_pmf",
    "abp_elicit",
    "up_log_pmf",
    "joint_log_pmf",
    "reassignment_log_weights",
    "prior_sample",
    "prior_joint_sample",
]

NEG_INF = float("-inf")


# ---------------------------------------------------------------------------
# allelic partitions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AllelicVector:
    """Counts of clusters per size, trimmed to the largest occupied size."""

    counts: np.ndarray  # counts[s-1] = number of clusters of size s

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        last = int(np.max(np.nonzero(c)[0])) + 1 if np.any(c) else 0
        object.__setattr__(self, "counts", c[:last])

    @property
    def n_records(self) -> int:
        s = np.arange(1, len(self.counts) + 1)
        return int(np.sum(s * self.counts))

    @property
    def n_clusters(self) -> int:
        return int(np.sum(self.counts))

    @property
    def max_size(self) -> int:
        return len(self.counts)

    def as_full(self, I: int) -> np.ndarray:
        out = np.zeros(I, dtype=np.int64)
        out[: len(self.counts)] = self.counts
        return out


def allelic_of(linkage: LinkageState) -> AllelicVector:
    """Allelic partition induced by a linkage state."""
    return AllelicVector(linkage.allelic.copy())


# ---------------------------------------------------------------------------
# distributions over the positive integers (for Kolchin priors)
# ---------------------------------------------------------------------------


class TruncNegBinom:
    """Negative binomial with shape a and success weight q, truncated to {1,2,...}.

    Untruncated pmf: C(k+a-1, k) q^k (1-q)^a on k >= 0, mean a*q/(1-q).
    """

    def __init__(self, a: float, q: float):
        if a <= 0 or not 0 < q < 1:
            raise ContractViolationError("TruncNegBinom needs a > 0 and q in (0,1)")
        self.a = float(a)
        self.q = float(q)
        # P(k >= 1) = 1 - (1-q)^a
        self._log_trunc = math.log(-math.expm1(self.a * math.log1p(-self.q)))

    def log_pmf(self, k: int) -> float:
        if k < 1:
            return NEG_INF
        a, q = self.a, self.q
        return (
            gammaln(k + a) - gammaln(a) - gammaln(k + 1)
            + k * math.log(q) + a * math.log1p(-q)
            - self._log_trunc
        )

    def sample(self, rng: np.random.Generator) -> int:
        # numpy's negative_binomial(n, p) counts failures before the n-th
        # success with success probability p, i.e. our (a, q) with p = 1 - q.
        while True:
            k = int(rng.negative_binomial(self.a, 1.0 - self.q))
            if k >= 1:
                return k


class GeometricN:
    """Geometric distribution on {1,2,...}: pmf (1-p)^(s-1) p."""

    def __init__(self, p: float):
        if not 0 < p < 1:
            raise ContractViolationError("GeometricN needs p in (0,1)")
        self.p = float(p)

    def log_pmf(self, k: int) -> float:
        if k < 1:
            return NEG_INF
        return (k - 1) * math.log1p(-self.p) + math.log(self.p)

    def pmf(self, k: int) -> float:
        return 0.0 if k < 1 else math.exp(self.log_pmf(k))

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.geometric(self.p))


class PointMassN:
    """Degenerate distribution at a single positive integer."""

    def __init__(self, k: int):
        if k < 1:
            raise ContractViolationError("PointMassN needs k >= 1")
        self.k = int(k)

    def log_pmf(self, k: int) -> float:
        return 0.0 if k == self.k else NEG_INF

    def sample(self, rng: np.random.Generator) -> int:
        return self.k


# ---------------------------------------------------------------------------
# prior specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UPSpec:
    """Uniform prior over partitions with cluster sizes capped at 2."""

    max_size: int = 2

    kind = "UP"

    def __post_init__(self):
        if self.max_size != 2:
            raise ContractViolationError("the uniform prior is defined with cap 2")


@dataclass(frozen=True)
class EPPSpec:
    """Ewens-Pitman prior; theta carries the current concentration value."""

    a_theta: float = 1.0
    b_theta: float = 1.0
    theta: float = 1.0

    kind = "EPP"

    def __post_init__(self):
        if min(self.a_theta, self.b_theta, self.theta) <= 0:
            raise ContractViolationError("EPP parameters must be positive")


@dataclass(frozen=True)
class NBNBPSpec:
    """Negative binomial cluster count and sizes; (eta, theta) are resampled."""

    a: float
    q: float
    a_eta: float = 1.0
    b_eta: float = 1.0
    a_theta: float = 2.0
    b_theta: float = 2.0
    eta: float = 1.0
    theta: float = 0.5

    kind = "NBNBP"

    def __post_init__(self):
        if self.a <= 0 or not 0 < self.q < 1:
            raise ContractViolationError("NBNBP needs a > 0 and q in (0,1)")
        if min(self.a_eta, self.b_eta, self.a_theta, self.b_theta, self.eta) <= 0:
            raise ContractViolationError("NBNBP hyperparameters must be positive")
        if not 0 < self.theta < 1:
            raise ContractViolationError("NBNBP size parameter theta must be in (0,1)")

    @classmethod
    def for_records(cls, I: int, **kw) -> "NBNBPSpec":
        a, q = nbnb_elicit(I)
        return cls(a=a, q=q, **kw)


@dataclass(frozen=True)
class NBDPSpec:
    """Negative binomial cluster count, Dirichlet-process size distribution."""

    a: float
    q: float
    alpha: float = 1.0
    mu0_param: float = 0.5

    kind = "NBDP"

    def __post_init__(self):
        if self.a <= 0 or not 0 < self.q < 1:
            raise ContractViolationError("NBDP needs a > 0 and q in (0,1)")
        if self.alpha <= 0 or not 0 < self.mu0_param < 1:
            raise ContractViolationError("NBDP needs alpha > 0 and mu0 parameter in (0,1)")

    @property
    def mu0(self) -> GeometricN:
        return GeometricN(self.mu0_param)

    @classmethod
    def for_records(cls, I: int, **kw) -> "NBDPSpec":
        a, q = nbnb_elicit(I)
        return cls(a=a, q=q, **kw)


@dataclass(frozen=True)
class ABPSpec:
    """Allelic binomial prior with cap M; theta_k carry the current chain values."""

    M: int
    a_k: tuple          # Beta parameters for k = 2..M
    b_k: tuple
    theta_k: tuple = field(default=())

    kind = "ABP"

    def __post_init__(self):
        if self.M < 1:
            raise ContractViolationError("ABP needs M >= 1")
        if len(self.a_k) != self.M - 1 or len(self.b_k) != self.M - 1:
            raise ContractViolationError("ABP stores exactly M-1 Beta pairs")
        if any(v <= 0 for v in self.a_k) or any(v <= 0 for v in self.b_k):
            raise ContractViolationError("ABP Beta parameters must be positive")
        if not self.theta_k:
            means = tuple(a / (a + b) for a, b in zip(self.a_k, self.b_k))
            object.__setattr__(self, "theta_k", means)
        if len(self.theta_k) != self.M - 1 or any(not 0 < t < 1 for t in self.theta_k):
            raise ContractViolationError("ABP needs one theta_k in (0,1) per size 2..M")

    @classmethod
    def from_targets(cls, pi_singleton: float, cv: float, M: int = 2) -> "ABPSpec":
        a, b = abp_elicit(pi_singleton, cv, M)
        return cls(M=M, a_k=a, b_k=b)


PriorSpec = UPSpec | EPPSpec | NBNBPSpec | NBDPSpec | ABPSpec


# ---------------------------------------------------------------------------
# pmf evaluation
# ---------------------------------------------------------------------------


def epp_log_pmf(linkage: LinkageState, theta: float) -> float:
    """Ewens sampling formula; normalized over set partitions for every theta."""
    if theta <= 0:
        raise ContractViolationError("EPP concentration must be positive")
    I = linkage.I
    return float(
        gammaln(theta) - gammaln(I + theta)
        + linkage.n_clusters * math.log(theta)
        + np.sum(gammaln(linkage.sizes))
    )


def kpp_log_pmf(linkage: LinkageState, kappa, mu) -> float:
    """Unnormalized Kolchin partition mass: N! kappa(N) prod_n S_n! mu(S_n).

    The leading factor is N! (from counting label-to-block assignments in the
    generative construction), which the rejection-sampler oracle confirms.
    """
    N = linkage.n_clusters
    out = gammaln(N + 1) + kappa.log_pmf(N)
    for s in linkage.sizes:
        out += gammaln(int(s) + 1) + mu.log_pmf(int(s))
    return float(out)


def nbnb_elicit(I: int) -> tuple[float, float]:
    """(a, q) moment-matched so the untruncated cluster count has mean = sd = I/2."""
    if I <= 2:
        raise ElicitationError(f"NBNBP elicitation needs I > 2 (got {I})")
    q = 1.0 - 2.0 / I
    a = I / (I - 2.0)
    return a, q


def nbdp_size_predictive(s: int, other_cluster_sizes, alpha: float, mu0) -> float:
    """Polya-urn predictive probability of one cluster size given the others."""
    if alpha <= 0:
        raise ContractViolationError("DP concentration must be positive")
    others = list(other_cluster_sizes)
    v_s = sum(1 for x in others if x == s)
    base = math.exp(mu0.log_pmf(s)) if s >= 1 else 0.0
    return (alpha * base + v_s) / (alpha + len(others))


def _nbnbp_log_pmf(linkage: LinkageState, spec: NBNBPSpec) -> float:
    kappa = TruncNegBinom(spec.a, spec.q)
    mu = TruncNegBinom(spec.eta, spec.theta)
    return kpp_log_pmf(linkage, kappa, mu)


def _nbdp_log_pmf(linkage: LinkageState, spec: NBDPSpec) -> float:
    """Kolchin mass with the DP size distribution integrated out (urn form)."""
    N = linkage.n_clusters
    kappa = TruncNegBinom(spec.a, spec.q)
    mu0 = spec.mu0
    out = gammaln(N + 1) + kappa.log_pmf(N)
    out += float(np.sum(gammaln(linkage.sizes + 1)))
    out += gammaln(spec.alpha) - gammaln(spec.alpha + N)
    counts = linkage.allelic
    for s0 in np.nonzero(counts)[0]:
        w = spec.alpha * math.exp(mu0.log_pmf(int(s0) + 1))
        out += gammaln(w + counts[s0]) - gammaln(w)
    return float(out)


def _log_binom_pmf(k: int, n: int, p: float) -> float:
    if k < 0 or k > n:
        return NEG_INF
    if n == 0:
        return 0.0
    return (
        gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
        + (k * math.log(p) if k else 0.0)
        + ((n - k) * math.log1p(-p) if n - k else 0.0)
    )


def _abp_qk(counts: np.ndarray, M: int, I: int) -> np.ndarray:
    """Binomial-chain caps Q_k for k = 1..M given allelic counts (index k-1)."""
    q = np.zeros(M, dtype=np.int64)
    tail = 0  # sum_{i>k} i*r_i
    for k in range(M, 0, -1):
        q[k - 1] = (I - tail) // k
        if k - 1 < len(counts):
            tail += k * int(counts[k - 1])
    return q


def abp_conditional_log_pmf(linkage: LinkageState, r: AllelicVector | None = None) -> float:
    """log p(xi | r): partitions are uniform within an allelic class."""
    counts = linkage.allelic
    if r is not None:
        if not np.array_equal(r.as_full(linkage.I), counts):
            raise ContractViolationError("allelic vector inconsistent with linkage state")
    I = linkage.I
    out = -gammaln(I + 1)
    for s0 in np.nonzero(counts)[0]:
        out += counts[s0] * gammaln(int(s0) + 2) + gammaln(counts[s0] + 1)
    return float(out)


def abp_allelic_log_pmf(r: AllelicVector | np.ndarray, spec: ABPSpec, I: int) -> float:
    """log p(r | M) under the binomial chain with the spec's current theta_k."""
    counts = r.counts if isinstance(r, AllelicVector) else np.asarray(r, dtype=np.int64)
    M = spec.M
    if len(counts) > M and np.any(counts[M:]):
        return NEG_INF
    full = np.zeros(M, dtype=np.int64)
    full[: min(M, len(counts))] = counts[:M]
    if int(np.sum(np.arange(1, M + 1) * full)) != I:
        return NEG_INF
    qk = _abp_qk(full, M, I)
    if full[0] != qk[0]:
        return NEG_INF  # delta constraint on the singleton count
    out = 0.0
    for k in range(2, M + 1):
        out += _log_binom_pmf(int(full[k - 1]), int(qk[k - 1]), spec.theta_k[k - 2])
    return float(out)


def abp_joint_log_pmf(linkage: LinkageState, spec: ABPSpec) -> float:
    """log p(xi) = log p(xi|r) + log p(r|M); -inf if any cluster exceeds M."""
    if linkage.sizes.max() > spec.M:
        return NEG_INF
    r = allelic_of(linkage)
    return abp_conditional_log_pmf(linkage) + abp_allelic_log_pmf(r, spec, linkage.I)


def abp_m2_marginal_log_pmf(linkage: LinkageState, a2: float, b2: float) -> float:
    """Closed form for M=2 with theta_2 integrated out (beta-binomial on r_2)."""
    if linkage.sizes.max() > 2:
        return NEG_INF
    I = linkage.I
    q2 = I // 2
    r2 = int(linkage.allelic[1]) if len(linkage.allelic) > 1 else 0
    log_cond = (
        gammaln(I - 2 * r2 + 1) + r2 * math.log(2.0) + gammaln(r2 + 1) - gammaln(I + 1)
    )
    log_bb = (
        gammaln(q2 + 1) - gammaln(r2 + 1) - gammaln(q2 - r2 + 1)
        + betaln(r2 + a2, q2 - r2 + b2) - betaln(a2, b2)
    )
    return float(log_cond + log_bb)


def _beta_params_from_rho(rho: float, cv: float) -> tuple[float, float]:
    """Raw elicitation formula: a = (rho - cv^2) / ((1 + rho) cv^2), b = a * rho."""
    a = (rho - cv * cv) / ((1.0 + rho) * cv * cv)
    return a, a * rho


def abp_elicit(pi_singleton: float, cv: float, M: int = 2) -> tuple[tuple, tuple]:
    """Beta parameters (a_k, b_k), k = 2..M, matching a singleton target.

    ``pi_singleton`` is the prior expected fraction of records kept as
    singletons and ``cv`` the coefficient of variation of the per-size
    binomial rates. The induced Beta has mean 1 - pi_singleton, so higher
    targets mean fewer multi-record clusters.

    The odds are oriented as rho = pi/(1-pi); the printed mirror-image
    orientation collapses to a degenerate Beta for every pi >= 1/(1+cv^2)
    (e.g. pi=0.8, cv=0.5) and is therefore rejected by prior-predictive
    validation at I=500.
    """
    if not 0 < pi_singleton < 1:
        raise ElicitationError("singleton fraction must be in (0,1)")
    if cv <= 0:
        raise ElicitationError("coefficient of variation must be positive")
    if M < 2:
        raise ElicitationError("elicitation targets sizes 2..M, so M >= 2")
    rho = pi_singleton / (1.0 - pi_singleton)
    a, b = _beta_params_from_rho(rho, cv)
    if a <= 0 or b <= 0:
        raise ElicitationError(
            f"degenerate Beta from pi={pi_singleton}, cv={cv}: "
            f"rho={rho:.4g} <= cv^2={cv * cv:.4g}; lower cv or raise pi"
        )
    return tuple([a] * (M - 1)), tuple([b] * (M - 1))


def up_log_pmf(linkage: LinkageState) -> float:
    """Uniform (unnormalized) over partitions with cluster sizes <= 2."""
    return 0.0 if linkage.sizes.max() <= 2 else NEG_INF


def joint_log_pmf(spec: PriorSpec, linkage: LinkageState) -> float:
    """Dispatch to the spec's (possibly unnormalized) partition log pmf."""
    if isinstance(spec, UPSpec):
        return up_log_pmf(linkage)
    if isinstance(spec, EPPSpec):
        return epp_log_pmf(linkage, spec.theta)
    if isinstance(spec, NBNBPSpec):
        return _nbnbp_log_pmf(linkage, spec)
    if isinstance(spec, NBDPSpec):
        return _nbdp_log_pmf(linkage, spec)
    if isinstance(spec, ABPSpec):
        return abp_joint_log_pmf(linkage, spec)
    raise ContractViolationError(f"unknown prior spec {type(spec)!r}")


# ---------------------------------------------------------------------------
# Gibbs support: log prior ratios for single-record reassignment
# ---------------------------------------------------------------------------


def reassignment_log_weights(spec: PriorSpec, linkage: LinkageState, i: int) -> np.ndarray:
    """Log prior ratio of moving record i to each destination vs. staying put.

    Destinations are the clusters of the remaining records in canonical order
    (labels of ``LinkageState(xi without i)``), followed by one fresh
    singleton. Entry k is log p(moved partition) - log p(current partition);
    size-cap violations yield -inf. Everything is computed from allelic
    counts in O(1) per destination (O(M) for the ABP).
    """
    if not 0 <= i < linkage.I:
        raise ContractViolationError("record index out of range")
    if linkage.I == 1:
        return np.array([0.0])  # only the fresh destination exists

    xi = linkage.xi
    keep = np.arange(linkage.I) != i
    base = LinkageState(xi[keep])
    n_base = base.n_clusters
    sizes_b = base.sizes
    r_full = np.zeros(linkage.I + 2, dtype=np.int64)
    r_full[1: len(base.allelic) + 1] = base.allelic

    s_orig = int(linkage.sizes[xi[i] - 1]) - 1  # original cluster size after removal

    out = np.empty(n_base + 1)

    if isinstance(spec, UPSpec):
        for k in range(n_base):
            out[k] = 0.0 if sizes_b[k] + 1 <= 2 else NEG_INF
        out[n_base] = 0.0
        return out

    if isinstance(spec, ABPSpec):
        # absolute candidate pmfs relative to the current one
        cur = _abp_log_pmf_counts(linkage.allelic, spec, linkage.I)
        for k in range(n_base):
            s = int(sizes_b[k])
            if s + 1 > spec.M:
                out[k] = NEG_INF
                continue
            cand = r_full[1:].copy()
            cand[s - 1] -= 1
            cand[s] += 1
            out[k] = _abp_log_pmf_counts(cand, spec, linkage.I) - cur
        cand = r_full[1:].copy()
        cand[0] += 1
        out[n_base] = _abp_log_pmf_counts(cand, spec, linkage.I) - cur
        return out

    # delta-based variants: weight = delta(dest) - delta(original placement)
    if isinstance(spec, EPPSpec):
        def d_join(s):
            return math.log(s)

        d_fresh = math.log(spec.theta)
    elif isinstance(spec, NBNBPSpec):
        log_z = math.log(-math.expm1(spec.eta * math.log1p(-spec.theta)))

        def d_join(s):
            return math.log(s + spec.eta) + math.log(spec.theta)

        d_fresh = (
            math.log(n_base + spec.a) + math.log(spec.q)
            + math.log(spec.eta) + math.log(spec.theta)
            + spec.eta * math.log1p(-spec.theta) - log_z
        )
    elif isinstance(spec, NBDPSpec):
        mu0 = spec.mu0

        def d_join(s):
            num = spec.alpha * mu0.pmf(s + 1) + r_full[s + 1]
            den = spec.alpha * mu0.pmf(s) + r_full[s] - 1
            return math.log(s + 1) + math.log(num) - math.log(den)

        d_fresh = (
            math.log(n_base + spec.a) + math.log(spec.q)
            + math.log(spec.alpha * mu0.pmf(1) + r_full[1])
            - math.log(spec.alpha + n_base)
        )
    else:
        raise ContractViolationError(f"unknown prior spec {type(spec)!r}")

    d_orig = d_fresh if s_orig == 0 else d_join(s_orig)
    for k in range(n_base):
        out[k] = d_join(int(sizes_b[k])) - d_orig
    out[n_base] = d_fresh - d_orig
    return out


def _abp_log_pmf_counts(counts: np.ndarray, spec: ABPSpec, I: int) -> float:
    """ABP joint log pmf from allelic counts alone."""
    counts = np.asarray(counts, dtype=np.int64)
    if len(counts) > spec.M and np.any(counts[spec.M:]):
        return NEG_INF
    out = -gammaln(I + 1)
    for s0 in np.nonzero(counts)[0]:
        out += counts[s0] * gammaln(int(s0) + 2) + gammaln(counts[s0] + 1)
    return float(out) + abp_allelic_log_pmf(counts, spec, I)


# ---------------------------------------------------------------------------
# generative sampling
# ---------------------------------------------------------------------------


def _partition_from_sizes(sizes, I: int, rng: np.random.Generator) -> LinkageState:
    """Uniform member of the class of partitions with the given size multiset."""
    perm = rng.permutation(I)
    xi = np.zeros(I, dtype=np.int64)
    pos = 0
    for lab, s in enumerate(sizes, start=1):
        xi[perm[pos: pos + s]] = lab
        pos += s
    return LinkageState(xi)


def prior_joint_sample(
    spec: PriorSpec,
    I: int,
    rng: np.random.Generator,
    max_attempts: int = 1_000_000,
) -> tuple[PriorSpec, LinkageState]:
    """Joint draw of (prior parameters, partition of I records).

    Kolchin priors are sampled by rejection of the whole tuple on the total
    size, which is exactly the event conditioning used by the model; the
    returned spec carries the accepted parameter values.
    """
    if I < 1:
        raise ContractViolationError("need at least one record")

    if isinstance(spec, UPSpec):
        # enumerate allelic classes (r2 pairs) and weight by class size
        r2_max = I // 2
        r2s = np.arange(r2_max + 1)
        logw = gammaln(I + 1) - r2s * math.log(2.0) - gammaln(r2s + 1) - gammaln(I - 2 * r2s + 1)
        w = np.exp(logw - logw.max())
        r2 = int(rng.choice(r2s, p=w / w.sum()))
        sizes = [2] * r2 + [1] * (I - 2 * r2)
        return spec, _partition_from_sizes(sizes, I, rng)

    if isinstance(spec, ABPSpec):
        theta = tuple(float(rng.beta(a, b)) for a, b in zip(spec.a_k, spec.b_k))
        counts = np.zeros(spec.M, dtype=np.int64)
        tail = 0
        for k in range(spec.M, 1, -1):
            qk = (I - tail) // k
            counts[k - 1] = rng.binomial(qk, theta[k - 2]) if qk > 0 else 0
            tail += k * int(counts[k - 1])
        counts[0] = I - tail
        sizes = [s for s in range(spec.M, 0, -1) for _ in range(int(counts[s - 1]))]
        return replace(spec, theta_k=theta), _partition_from_sizes(sizes, I, rng)

    if isinstance(spec, EPPSpec):
        # tiny shapes can underflow the gamma draw to exactly 0
        theta = max(float(rng.gamma(spec.a_theta, 1.0 / spec.b_theta)), 1e-300)
        # CRP seating; joining an existing cluster with weight prop. to its
        # size is the same as copying a uniformly chosen earlier record
        xi = np.zeros(I, dtype=np.int64)
        xi[0] = 1
        n = 1
        for i in range(1, I):
            if rng.random() < theta / (theta + i):
                n += 1
                xi[i] = n
            else:
                xi[i] = xi[int(rng.integers(i))]
        return replace(spec, theta=theta), LinkageState(xi)

    if isinstance(spec, NBNBPSpec):
        kappa = TruncNegBinom(spec.a, spec.q)
        for _ in range(max_attempts):
            eta = float(rng.gamma(spec.a_eta, 1.0 / spec.b_eta))
            theta = float(rng.beta(spec.a_theta, spec.b_theta))
            n = kappa.sample(rng)
            mu = TruncNegBinom(eta, theta)
            sizes = [mu.sample(rng) for _ in range(n)]
            if sum(sizes) == I:
                out = replace(spec, eta=eta, theta=theta)
                return out, _partition_from_sizes(sizes, I, rng)
        raise SamplingError(
            f"NBNBP rejection budget ({max_attempts}) exhausted at I={I}; "
            "raise max_attempts or sample at a smaller I"
        )

    if isinstance(spec, NBDPSpec):
        kappa = TruncNegBinom(spec.a, spec.q)
        mu0 = spec.mu0
        for _ in range(max_attempts):
            n = kappa.sample(rng)
            sizes = []
            for j in range(n):
                if rng.random() < spec.alpha / (spec.alpha + j):
                    sizes.append(mu0.sample(rng))
                else:
                    sizes.append(sizes[int(rng.integers(j))])
            if sum(sizes) == I:
                return spec, _partition_from_sizes(sizes, I, rng)
        raise SamplingError(
            f"NBDP rejection budget ({max_attempts}) exhausted at I={I}; "
            "raise max_attempts or sample at a smaller I"
        )

    raise ContractViolationError(f"unknown prior spec {type(spec)!r}")


def prior_sample(
    spec: PriorSpec,
    I: int,
    rng: np.random.Generator,
    max_attempts: int = 1_000_000,
) -> LinkageState:
    """One partition of I records from the prior (hyperpriors marginalized)."""
    return prior_joint_sample(spec, I, rng, max_attempts)[1]
