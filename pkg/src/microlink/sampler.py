"""Posterior simulation: Gibbs sweeps over the full parameter set.

One sweep updates, in order: the cluster assignments (record-wise collapsed
Gibbs with one auxiliary fresh cluster), the profile conjugates (w, pi,
theta, psi), the latent-space variance, the network parameters (adaptive
random-walk MH or SGHMC), and the partition-prior parameters.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit as _sp_expit

from . import _kernels as _k
from .errors import ConfigError, ContractViolationError
from .model import HyperParams, LinkageState, Network, RecordTable
from .priors import (
    ABPSpec,
    EPPSpec,
    NBDPSpec,
    NBNBPSpec,
    PriorSpec,
    TruncNegBinom,
    UPSpec,
)

__all__ = [
    "SamplerConfig",
    "ChainOutput",
    "GibbsChain",
    "run_chain",
    "potential_and_grad_beta",
    "potential_and_grad_u",
]


@dataclass(frozen=True)
class SamplerConfig:
    burn_in: int = 1000
    samples: int = 1000
    thin: int = 1
    seed: int = 0
    network_kernel: str = "RW"
    rw_target_accept: float = 0.35
    sghmc_epsilon: float = 0.001
    sghmc_L: int = 5
    sghmc_minibatch_frac: float = 0.2
    sghmc_mass: float = 1.0
    record_scan_order: str = "shuffled"

    def __post_init__(self):
        if self.burn_in < 0 or self.samples < 1 or self.thin < 1:
            raise ConfigError("iteration counts must be positive")
        if self.network_kernel not in ("RW", "SGHMC"):
            raise ConfigError("network_kernel must be RW or SGHMC")
        if self.sghmc_epsilon <= 0 or self.sghmc_L < 1 or self.sghmc_mass <= 0:
            raise ConfigError("sghmc needs epsilon > 0, L >= 1, mass > 0")
        if not 0 < self.sghmc_minibatch_frac <= 1:
            raise ConfigError("minibatch fraction must be in (0, 1]")
        if self.record_scan_order not in ("sequential", "shuffled"):
            raise ConfigError("record_scan_order must be sequential or shuffled")

    @classmethod
    def from_dict(cls, block: dict) -> "SamplerConfig":
        sg = block.get("sghmc", {})
        return cls(
            burn_in=block["burn_in"],
            samples=block["samples"],
            thin=block.get("thin", 1),
            seed=block["seed"],
            network_kernel=block["network_kernel"],
            rw_target_accept=block.get("rw_target_accept", 0.35),
            sghmc_epsilon=sg.get("epsilon", 0.001),
            sghmc_L=sg.get("L", 5),
            sghmc_minibatch_frac=sg.get("minibatch_frac", 0.2),
            sghmc_mass=sg.get("mass", 1.0),
            record_scan_order=block.get("record_scan_order", "shuffled"),
        )


@dataclass
class ChainOutput:
    samples: np.ndarray               # (S, I) canonical linkage labels
    traces: dict[str, np.ndarray]     # per-kept-sample scalar traces
    accept_rates: dict[str, float]
    seconds_per_100: float
    n_iterations: int
    prior_kind: str


def _pack_prior(spec: PriorSpec) -> tuple[int, np.ndarray]:
    if isinstance(spec, UPSpec):
        return 0, np.zeros(1)
    if isinstance(spec, EPPSpec):
        return 1, np.array([spec.theta])
    if isinstance(spec, NBNBPSpec):
        return 2, np.array([spec.a, spec.q, spec.eta, spec.theta])
    if isinstance(spec, NBDPSpec):
        return 3, np.array([spec.a, spec.q, spec.alpha, spec.mu0_param])
    if isinstance(spec, ABPSpec):
        return 4, np.array([float(spec.M)] + list(spec.theta_k))
    raise ContractViolationError(f"unknown prior spec {type(spec)!r}")


class GibbsChain:
    """Mutable sampler state over one dataset. One chain per RNG."""

    def __init__(
        self,
        table: RecordTable,
        net: Network | None,
        prior: PriorSpec,
        hypers: HyperParams,
        config: SamplerConfig,
    ):
        self.table = table
        self.net = net
        self.prior = prior
        self.hypers = hypers
        self.config = config
        self.I = table.I
        self.L = table.L
        self.K = hypers.K
        self.has_net = net is not None

        I, L, K = self.I, self.L, self.K
        cap = I + 1
        self.cap = cap
        self.xi = np.arange(I, dtype=np.int64)       # singleton init
        self.n_clusters = I
        self.sizes = np.zeros(cap, dtype=np.int64)
        self.sizes[:I] = 1
        self.r = np.zeros(I + 2, dtype=np.int64)
        self.r[1] = I
        self.head = np.full(cap, -1, dtype=np.int64)
        self.head[:I] = np.arange(I)
        self.nxt = np.full(I, -1, dtype=np.int64)
        self.U = np.zeros((cap, K))
        self.Pi = np.zeros((cap, L), dtype=np.int64)
        self.Pi[:I] = table.values
        self.W = np.zeros((I, L), dtype=np.uint8)

        Mmax = int(table.domain_sizes.max())
        self.Mls = table.domain_sizes.astype(np.int64)
        self.theta = np.zeros((L, Mmax))
        for l in range(L):
            freq = np.bincount(table.values[:, l], minlength=self.Mls[l]).astype(float)
            freq = freq + hypers.alpha
            self.theta[l, : self.Mls[l]] = freq / freq.sum()
        self.psi = np.full(L, hypers.a_dist / (hypers.a_dist + hypers.b_dist))
        self.sigma2 = hypers.b_sigma / max(hypers.a_sigma - 1.0, 0.5)
        self.beta = 0.0

        # network-side structures
        self.indptr = np.zeros(I + 1, dtype=np.int64)
        self.indices = np.zeros(0, dtype=np.int64)
        self.edges_i = np.zeros(0, dtype=np.int64)
        self.edges_j = np.zeros(0, dtype=np.int64)
        self.D = np.zeros((0, 0))
        self.SP = np.zeros((0, 0))
        self.LC = np.zeros(0)
        if net is not None:
            self.set_network(net)
            density = 2.0 * net.n_edges / (I * (I - 1)) if I > 1 else 0.0
            self.beta = float(np.clip(np.log(max(density, 1e-4) / max(1 - density, 1e-4)), -8, 8))
            self.D = np.zeros((cap, cap))
            self.SP = np.zeros((cap, cap))
            self.LC = np.zeros(cap)

        # adaptive proposal scales (log) and acceptance bookkeeping
        self.log_s_beta = math.log(0.5)
        self.log_s_u = math.log(1.0)
        self.adapt = True
        self._adapt_t = 0
        self.acc = {"beta": [0, 0], "u": [0, 0], "prior": [0, 0]}

        # SGHMC fixed shuffles, built lazily (seed-dependent)
        self._pairs = None
        self._rec_shuffle = None
        self._nbnb_scale = 0.5

    # -- data wiring ------------------------------------------------------

    def set_network(self, net: Network) -> None:
        self.net = net
        self.has_net = True
        self.indptr, self.indices = net.adjacency_csr()
        self.edges_i = net.edges[:, 0].copy()
        self.edges_j = net.edges[:, 1].copy()
        self._pairs = None

    def set_profiles(self, values: np.ndarray) -> None:
        if values.shape != self.table.values.shape:
            raise ContractViolationError("profile shape may not change")
        self.table = RecordTable(values, self.table.domain_sizes)
        # keep the support constraint intact
        mismatch = (self.W == 0) & (values != self.Pi[self.xi])
        self.W[mismatch] = 1

    def _ensure_pair_shuffle(self, rng: np.random.Generator) -> None:
        if self._pairs is not None:
            return
        I = self.I
        iu = np.triu_indices(I, k=1)
        order = rng.permutation(len(iu[0]))
        pi = iu[0][order].astype(np.int64)
        pj = iu[1][order].astype(np.int64)
        A = self.net.dense_adjacency()
        py = A[pi, pj].astype(np.int64)
        self._pairs = (pi, pj, py)
        self._rec_shuffle = rng.permutation(I).astype(np.int64)

    # -- views and conversions --------------------------------------------

    def linkage(self) -> LinkageState:
        return LinkageState(self.xi + 1)

    def active_U(self) -> np.ndarray:
        return self.U[: self.n_clusters]

    def active_Pi(self) -> np.ndarray:
        return self.Pi[: self.n_clusters]

    def rebuild_net_caches(self) -> None:
        """Refresh the scan-phase distance/softplus caches from U and beta."""
        _k._rebuild_caches(
            self.U, self.sizes, self.n_clusters, self.beta, self.D, self.SP, self.LC
        )

    def validate_invariants(self) -> None:
        lk = self.linkage()
        sizes = np.bincount(self.xi, minlength=self.n_clusters)
        if not np.array_equal(np.sort(sizes), np.sort(self.sizes[: self.n_clusters])):
            raise ContractViolationError("cached sizes diverged from xi")
        allelic = np.bincount(sizes, minlength=self.I + 2)[1:]
        if not np.array_equal(allelic, self.r[1: self.I + 2]):
            raise ContractViolationError("cached allelic counts diverged from xi")
        if int(np.sum(np.arange(1, self.I + 2) * self.r[1:])) != self.I:
            raise ContractViolationError("allelic counts do not cover all records")
        mismatch = (self.W == 0) & (self.table.values != self.Pi[self.xi])
        if np.any(mismatch):
            raise ContractViolationError("support constraint violated after sweep")
        assert lk.n_clusters == self.n_clusters

    @classmethod
    def from_state(
        cls,
        table: RecordTable,
        net: Network | None,
        prior: PriorSpec,
        hypers: HyperParams,
        config: SamplerConfig,
        linkage: LinkageState,
        beta: float,
        sigma2: float,
        U: np.ndarray,
        Pi: np.ndarray,
        theta_fields,
        psi: np.ndarray,
        W: np.ndarray,
    ) -> "GibbsChain":
        chain = cls(table, net, prior, hypers, config)
        n = linkage.n_clusters
        chain.xi = (linkage.xi - 1).astype(np.int64)
        chain.n_clusters = n
        chain.sizes[:] = 0
        chain.sizes[:n] = linkage.sizes
        chain.r[:] = 0
        chain.r[1: chain.I + 1] = linkage.allelic
        chain.head[:] = -1
        chain.nxt[:] = -1
        for i in range(chain.I - 1, -1, -1):
            c = chain.xi[i]
            chain.nxt[i] = chain.head[c]
            chain.head[c] = i
        chain.U[:n] = U
        chain.Pi[:n] = Pi
        for l in range(chain.L):
            chain.theta[l, : chain.Mls[l]] = theta_fields[l]
        chain.psi = np.asarray(psi, dtype=float).copy()
        chain.W = np.asarray(W, dtype=np.uint8).copy()
        chain.beta = float(beta)
        chain.sigma2 = float(sigma2)
        return chain


# ---------------------------------------------------------------------------
# component updates
# ---------------------------------------------------------------------------


def update_xi_scan(chain: GibbsChain, rng: np.random.Generator,
                   order=None, likelihood_on: bool = True) -> None:
    """Record-wise Gibbs reassignment over `order` (default: all records)."""
    if order is None:
        if chain.config.record_scan_order == "shuffled":
            order = rng.permutation(chain.I).astype(np.int64)
        else:
            order = np.arange(chain.I, dtype=np.int64)
    else:
        order = np.asarray(order, dtype=np.int64)
    net_on = chain.has_net and likelihood_on
    if net_on:
        chain.rebuild_net_caches()
    kind, params = _pack_prior(chain.prior)
    rand_u = rng.random((len(order), chain.L + 1))
    rand_n = rng.standard_normal((len(order), chain.K))
    chain.n_clusters = int(
        _k._scan_records(
            order,
            chain.table.values, chain.theta, chain.Mls, chain.psi, chain.W,
            chain.xi, chain.sizes, chain.r, chain.head, chain.nxt, chain.n_clusters,
            chain.U, chain.Pi,
            net_on, chain.indptr, chain.indices,
            chain.D if net_on else np.zeros((1, 1)),
            chain.SP if net_on else np.zeros((1, 1)),
            chain.LC if net_on else np.zeros(1),
            chain.beta, chain.sigma2,
            kind, params,
            likelihood_on,
            rand_u, rand_n,
        )
    )


def update_xi_record(chain: GibbsChain, i: int, rng: np.random.Generator) -> None:
    """Gibbs update of a single record's assignment (testing convenience)."""
    update_xi_scan(chain, rng, order=np.array([i], dtype=np.int64))


def update_profile_conjugates(chain: GibbsChain, rng: np.random.Generator,
                              likelihood_on: bool = True) -> None:
    """Closed-form draws of w, pi, theta and psi, in that order."""
    I, L, n = chain.I, chain.L, chain.n_clusters
    P = chain.table.values
    xi = chain.xi

    # distortion indicators
    if likelihood_on:
        latent = chain.Pi[xi]
        match = P == latent
        tp = np.empty((I, L))
        for l in range(L):
            tp[:, l] = chain.theta[l, P[:, l]]
        q1 = chain.psi[None, :] * tp
        prob1 = np.where(match, q1 / (q1 + (1.0 - chain.psi)[None, :]), 1.0)
        chain.W = (rng.random((I, L)) < prob1).astype(np.uint8)
    else:
        chain.W = (rng.random((I, L)) < chain.psi[None, :]).astype(np.uint8)

    # latent true values: pinned by any undistorted member, otherwise prior
    for l in range(L):
        col = np.empty(n, dtype=np.int64)
        Ml = int(chain.Mls[l])
        draws = rng.choice(Ml, size=n, p=chain.theta[l, :Ml])
        col[:] = draws
        if likelihood_on:
            w0 = chain.W[:, l] == 0
            if np.any(w0):
                col[xi[w0]] = P[w0, l]
        chain.Pi[:n, l] = col

    # field distributions
    for l in range(L):
        Ml = int(chain.Mls[l])
        cnt = np.bincount(chain.Pi[:n, l], minlength=Ml).astype(float)
        if likelihood_on:
            w1 = chain.W[:, l] == 1
            cnt += np.bincount(P[w1, l], minlength=Ml)
        chain.theta[l, :Ml] = rng.dirichlet(chain.hypers.alpha + cnt)

    # distortion probabilities
    sw = chain.W.sum(axis=0).astype(float)
    chain.psi = rng.beta(chain.hypers.a_dist + sw, chain.hypers.b_dist + I - sw)


def update_sigma2(chain: GibbsChain, rng: np.random.Generator) -> None:
    """Conjugate inverse-gamma draw for the latent-space variance."""
    n = chain.n_clusters
    shape = chain.hypers.a_sigma + n * chain.K / 2.0
    rate = chain.hypers.b_sigma + 0.5 * float(np.sum(chain.U[:n] ** 2))
    chain.sigma2 = float(1.0 / rng.gamma(shape, 1.0 / rate))


def _adapt_scale(chain: GibbsChain, name: str, acc_prob: float) -> None:
    if not chain.adapt:
        return
    chain._adapt_t += 1
    gamma = chain._adapt_t ** -0.7
    delta = gamma * (acc_prob - chain.config.rw_target_accept)
    if name == "beta":
        chain.log_s_beta = float(np.clip(chain.log_s_beta + delta, -12, 6))
    else:
        chain.log_s_u = float(np.clip(chain.log_s_u + delta, -12, 6))


def rw_update_network(chain: GibbsChain, rng: np.random.Generator) -> None:
    """Adaptive random-walk MH on the intercept and every entity position."""
    n = chain.n_clusters
    E = _k._build_cluster_edges(chain.xi, chain.edges_i, chain.edges_j, n)

    prop = chain.beta + math.exp(chain.log_s_beta) * rng.standard_normal()
    ll_cur, ll_prop = _k._beta_two_lls(chain.beta, prop, chain.U[:n], chain.sizes, E, n)
    log_a = (ll_prop - ll_cur
             + (chain.beta ** 2 - prop ** 2) / (2.0 * chain.hypers.omega ** 2))
    acc_prob = 1.0 if log_a >= 0 else math.exp(log_a)
    chain.acc["beta"][1] += 1
    if math.log(rng.random() + 1e-300) < log_a:
        chain.beta = float(prop)
        chain.acc["beta"][0] += 1
    _adapt_scale(chain, "beta", acc_prob)

    prop_z = rng.standard_normal((n, chain.K))
    acc_u = rng.random(n)
    n_acc, mean_acc = _k._rw_update_positions(
        chain.U[:n], chain.sizes, E, n, chain.beta, chain.sigma2,
        math.exp(chain.log_s_u), prop_z, acc_u,
    )
    chain.acc["u"][0] += int(n_acc)
    chain.acc["u"][1] += n
    _adapt_scale(chain, "u", mean_acc)


def sghmc_update_network(chain: GibbsChain, rng: np.random.Generator) -> None:
    """SGHMC updates for the intercept and every entity position."""
    cfg = chain.config
    chain._ensure_pair_shuffle(rng)
    pi, pj, py = chain._pairs
    n = chain.n_clusters
    n_pairs = len(pi)

    batch = max(1, int(round(cfg.sghmc_minibatch_frac * n_pairs)))
    start = int(rng.integers(n_pairs))
    r0 = math.sqrt(cfg.sghmc_mass) * rng.standard_normal()
    b_star, h0, h_star = _k._sghmc_beta(
        chain.beta, r0, cfg.sghmc_epsilon, cfg.sghmc_L, cfg.sghmc_mass,
        pi, pj, py, start, batch,
        chain.xi, chain.U[:n], chain.hypers.omega ** 2,
    )
    chain.acc["beta"][1] += 1
    if np.isfinite(h_star) and math.log(rng.random() + 1e-300) < h0 - h_star:
        chain.beta = float(b_star)
        chain.acc["beta"][0] += 1

    # per-entity member lists from one stable sort
    order = np.argsort(chain.xi, kind="stable").astype(np.int64)
    bounds = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(chain.xi, minlength=n), out=bounds[1:])

    batch_u = max(1, int(round(cfg.sghmc_minibatch_frac * chain.I)))
    r0s = math.sqrt(cfg.sghmc_mass) * rng.standard_normal((n, chain.K))
    starts = rng.integers(chain.I, size=n).astype(np.int64)
    acc_u = rng.random(n)
    n_acc = _k._sghmc_u_all(
        chain.U[:n], chain.sizes, chain.xi, chain.indptr, chain.indices,
        order, bounds,
        r0s, cfg.sghmc_epsilon, cfg.sghmc_L, cfg.sghmc_mass,
        chain._rec_shuffle, starts, batch_u, acc_u,
        chain.beta, chain.sigma2, n,
    )
    chain.acc["u"][0] += int(n_acc)
    chain.acc["u"][1] += n


def update_prior_hypers(chain: GibbsChain, rng: np.random.Generator) -> None:
    """Prior-specific parameter steps (conjugate or MH)."""
    spec = chain.prior
    if isinstance(spec, (UPSpec, NBDPSpec)):
        return

    if isinstance(spec, ABPSpec):
        theta = []
        tail = 0
        I = chain.I
        for k in range(spec.M, 1, -1):
            qk = (I - tail) // k
            rk = int(chain.r[k])
            a = spec.a_k[k - 2] + rk
            b = spec.b_k[k - 2] + qk - rk
            theta.append(float(rng.beta(a, b)))
            tail += k * rk
        theta.reverse()
        chain.prior = replace(spec, theta_k=tuple(theta))
        return

    if isinstance(spec, EPPSpec):
        N, I = chain.n_clusters, chain.I
        eta = float(rng.beta(spec.theta + 1.0, I))
        rate = spec.b_theta - math.log(eta)
        w1 = spec.a_theta + N - 1.0
        eps = w1 / (I * rate + w1)
        shape = spec.a_theta + N if rng.random() < eps else spec.a_theta + N - 1.0
        theta = max(float(rng.gamma(shape, 1.0 / rate)), 1e-300)
        chain.prior = replace(spec, theta=theta)
        return

    if isinstance(spec, NBNBPSpec):
        # joint RW-MH on (log eta, logit theta); truncation breaks conjugacy
        def log_target(eta, theta):
            mu = TruncNegBinom(eta, theta)
            out = (spec.a_eta - 1.0) * math.log(eta) - spec.b_eta * eta
            out += (spec.a_theta - 1.0) * math.log(theta) + (spec.b_theta - 1.0) * math.log1p(-theta)
            for s0 in np.nonzero(chain.r[1:])[0]:
                out += chain.r[s0 + 1] * mu.log_pmf(int(s0) + 1)
            # transform jacobians
            out += math.log(eta) + math.log(theta) + math.log1p(-theta)
            return out

        cur = (math.log(spec.eta), math.log(spec.theta / (1.0 - spec.theta)))
        prop = (cur[0] + chain._nbnb_scale * rng.standard_normal(),
                cur[1] + chain._nbnb_scale * rng.standard_normal())
        eta_p = math.exp(prop[0])
        theta_p = float(_sp_expit(prop[1]))
        chain.acc["prior"][1] += 1
        if 0.0 < theta_p < 1.0 and np.isfinite(eta_p) and eta_p > 0:
            log_a = log_target(eta_p, theta_p) - log_target(spec.eta, spec.theta)
            acc_prob = 1.0 if log_a >= 0 else math.exp(log_a)
            if math.log(rng.random() + 1e-300) < log_a:
                chain.prior = replace(spec, eta=eta_p, theta=theta_p)
                chain.acc["prior"][0] += 1
            if chain.adapt:
                gamma = max(chain._adapt_t, 1) ** -0.7
                chain._nbnb_scale = float(
                    np.clip(chain._nbnb_scale * math.exp(gamma * (acc_prob - 0.3)), 1e-3, 10.0)
                )
        return

    raise ContractViolationError(f"unknown prior spec {type(spec)!r}")


def gibbs_sweep(chain: GibbsChain, rng: np.random.Generator,
                prior_only: bool = False) -> None:
    """One full scan over all components of the model."""
    update_xi_scan(chain, rng, likelihood_on=not prior_only)
    update_profile_conjugates(chain, rng, likelihood_on=not prior_only)
    if chain.has_net:
        update_sigma2(chain, rng)
        if prior_only:
            # no data term: the conditionals are the priors themselves
            chain.beta = float(rng.normal(0.0, chain.hypers.omega))
            n = chain.n_clusters
            chain.U[:n] = rng.normal(0.0, math.sqrt(chain.sigma2), size=(n, chain.K))
        elif chain.config.network_kernel == "RW":
            rw_update_network(chain, rng)
        else:
            sghmc_update_network(chain, rng)
    update_prior_hypers(chain, rng)


# ---------------------------------------------------------------------------
# public potentials (the SGHMC energy surface over record pairs)
# ---------------------------------------------------------------------------


def _all_pairs(I: int) -> np.ndarray:
    iu = np.triu_indices(I, k=1)
    return np.column_stack(iu)


def _pair_y(net: Network, pairs: np.ndarray) -> np.ndarray:
    A = net.dense_adjacency()
    return A[pairs[:, 0], pairs[:, 1]].astype(np.int64)


def potential_and_grad_beta(
    beta: float,
    linkage: LinkageState,
    U: np.ndarray,
    net: Network,
    omega: float,
    subset: np.ndarray | None = None,
) -> tuple[float, float]:
    """Potential energy of the intercept and its derivative.

    ``subset`` is an (n, 2) array of record pairs; when given, the data term
    is rescaled by |all pairs| / |subset|.
    """
    full = _all_pairs(linkage.I)
    pairs = full if subset is None else np.asarray(subset)
    scale = len(full) / len(pairs)
    y = _pair_y(net, pairs)
    pos = U[linkage.xi - 1]
    d = np.linalg.norm(pos[pairs[:, 0]] - pos[pairs[:, 1]], axis=1)
    eta = beta - d
    sp = np.logaddexp(0.0, eta)
    val = -scale * float(np.sum(y * eta - sp))
    val += beta ** 2 / (2.0 * omega ** 2) + 0.5 * math.log(2.0 * math.pi * omega ** 2)
    grad = scale * float(np.sum(_sp_expit(eta) - y)) + beta / omega ** 2
    return val, grad


def potential_and_grad_u(
    n_label: int,
    beta: float,
    linkage: LinkageState,
    U: np.ndarray,
    net: Network,
    sigma2: float,
    subset: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Potential energy of one entity position and its gradient.

    The data term runs over pairs with at least one record in cluster
    ``n_label``; pairs internal to the cluster contribute a constant with
    zero gradient. Coincident distinct positions (distance < 1e-12) are
    guarded with a zero gradient contribution.
    """
    if not 1 <= n_label <= linkage.n_clusters:
        raise ContractViolationError("cluster label out of range")
    xi = linkage.xi
    full = _all_pairs(linkage.I)
    in_n = (xi[full[:, 0]] == n_label) | (xi[full[:, 1]] == n_label)
    full = full[in_n]
    pairs = full if subset is None else np.asarray(subset)
    scale = len(full) / len(pairs)
    y = _pair_y(net, pairs)
    pos = U[xi - 1]
    diff = pos[pairs[:, 0]] - pos[pairs[:, 1]]
    d = np.linalg.norm(diff, axis=1)
    eta = beta - d
    sp = np.logaddexp(0.0, eta)
    u_n = U[n_label - 1]
    val = -scale * float(np.sum(y * eta - sp))
    val += float(np.sum(u_n ** 2)) / (2.0 * sigma2)
    val += 0.5 * len(u_n) * math.log(2.0 * math.pi * sigma2)

    # orient each pair so the gradient acts on u_n; both-in-cluster pairs and
    # coincident positions contribute nothing
    first_in = xi[pairs[:, 0]] == n_label
    second_in = xi[pairs[:, 1]] == n_label
    sign = np.where(first_in, 1.0, -1.0)
    cross = first_in ^ second_in
    safe = cross & (d > 1e-12)
    coef = np.where(safe, (_sp_expit(eta) - y) * sign / np.where(d > 0, d, 1.0), 0.0)
    # d(-ll)/du_n = (expit(eta) - y) * (-(u_n - u_m)/d) summed over pairs
    grad = -scale * np.sum(coef[:, None] * diff, axis=0)
    grad = grad + u_n / sigma2
    return val, grad


def sghmc_update(
    block: str,
    chain: GibbsChain,
    rng: np.random.Generator,
    entity: int | None = None,
) -> dict:
    """One SGHMC proposal for a named block ('beta' or 'u'); returns details."""
    cfg = chain.config
    chain._ensure_pair_shuffle(rng)
    pi, pj, py = chain._pairs
    n = chain.n_clusters
    if block == "beta":
        n_pairs = len(pi)
        batch = max(1, int(round(cfg.sghmc_minibatch_frac * n_pairs)))
        start = int(rng.integers(n_pairs))
        r0 = math.sqrt(cfg.sghmc_mass) * rng.standard_normal()
        b_star, h0, h_star = _k._sghmc_beta(
            chain.beta, r0, cfg.sghmc_epsilon, cfg.sghmc_L, cfg.sghmc_mass,
            pi, pj, py, start, batch,
            chain.xi, chain.U[:n], chain.hypers.omega ** 2,
        )
        accepted = np.isfinite(h_star) and math.log(rng.random() + 1e-300) < h0 - h_star
        if accepted:
            chain.beta = float(b_star)
        return {"h0": h0, "h_star": h_star, "accepted": accepted, "proposal": b_star}
    if block == "u":
        if entity is None:
            raise ContractViolationError("entity index required for a position block")
        members = np.nonzero(chain.xi == entity)[0].astype(np.int64)
        batch_u = max(1, int(round(cfg.sghmc_minibatch_frac * chain.I)))
        start = int(rng.integers(chain.I))
        r0 = math.sqrt(cfg.sghmc_mass) * rng.standard_normal(chain.K)
        u_star, h0, h_star = _k._sghmc_u(
            entity, chain.U[:n], chain.sizes, chain.xi, chain.indptr, chain.indices,
            members, r0, cfg.sghmc_epsilon, cfg.sghmc_L, cfg.sghmc_mass,
            chain._rec_shuffle, start, batch_u,
            chain.beta, chain.sigma2,
        )
        accepted = np.isfinite(h_star) and math.log(rng.random() + 1e-300) < h0 - h_star
        if accepted:
            chain.U[entity] = u_star
        return {"h0": h0, "h_star": h_star, "accepted": accepted, "proposal": u_star}
    raise ContractViolationError(f"unknown SGHMC block {block!r}")


# ---------------------------------------------------------------------------
# chain driver
# ---------------------------------------------------------------------------


def run_chain(
    table: RecordTable,
    net: Network | None,
    prior: PriorSpec,
    hypers: HyperParams,
    config: SamplerConfig,
    prior_only: bool = False,
    check_invariants: bool = False,
) -> ChainOutput:
    """Run one seeded chain and collect kept samples and traces."""
    rng = np.random.default_rng(config.seed)
    chain = GibbsChain(table, net, prior, hypers, config)

    total = config.burn_in + config.samples * config.thin
    kept = 0
    samples = np.empty((config.samples, table.I), dtype=np.int32)
    tr: dict[str, list] = {"N": [], "sum_w": []}
    if chain.has_net:
        tr["beta"] = []
        tr["sigma2"] = []
    for l in range(table.L):
        tr[f"psi_{l}"] = []
    for name in _prior_trace_names(prior):
        tr[name] = []

    t0 = time.perf_counter()
    for it in range(total):
        if it == config.burn_in:
            chain.adapt = False  # freeze adaptation: sampling phase is Markov
        gibbs_sweep(chain, rng, prior_only=prior_only)
        if check_invariants:
            chain.validate_invariants()
        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
            samples[kept] = chain.linkage().xi
            kept += 1
            tr["N"].append(chain.n_clusters)
            tr["sum_w"].append(int(chain.W.sum()))
            if chain.has_net:
                tr["beta"].append(chain.beta)
                tr["sigma2"].append(chain.sigma2)
            for l in range(table.L):
                tr[f"psi_{l}"].append(float(chain.psi[l]))
            for name, val in _prior_trace_values(chain.prior).items():
                tr[name].append(val)
    elapsed = time.perf_counter() - t0

    rates = {}
    for key, (hits, tries) in chain.acc.items():
        if tries:
            rates[key] = hits / tries
    return ChainOutput(
        samples=samples[:kept],
        traces={k: np.asarray(v) for k, v in tr.items()},
        accept_rates=rates,
        seconds_per_100=elapsed / total * 100.0,
        n_iterations=total,
        prior_kind=prior.kind,
    )


def _prior_trace_names(prior: PriorSpec) -> list[str]:
    if isinstance(prior, ABPSpec):
        return [f"theta_{k}" for k in range(2, prior.M + 1)]
    if isinstance(prior, EPPSpec):
        return ["epp_theta"]
    if isinstance(prior, NBNBPSpec):
        return ["nb_eta", "nb_theta"]
    return []


def _prior_trace_values(prior: PriorSpec) -> dict[str, float]:
    if isinstance(prior, ABPSpec):
        return {f"theta_{k}": prior.theta_k[k - 2] for k in range(2, prior.M + 1)}
    if isinstance(prior, EPPSpec):
        return {"epp_theta": prior.theta}
    if isinstance(prior, NBNBPSpec):
        return {"nb_eta": prior.eta, "nb_theta": prior.theta}
    return {}
