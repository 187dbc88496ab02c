import math

import mpmath
import numpy as np
import pytest

from microlink.errors import ContractViolationError, ElicitationError
from microlink.model import (
    HyperParams,
    LinkageState,
    Network,
    RecordTable,
    edge_logit,
    elicit_network_hypers,
    expit,
    marginal_record_field_lik,
    network_loglik,
    profile_loglik,
)
from .oracles import naive_network_loglik, naive_profile_loglik


def random_instance(rng, I=8, K=2, L=3, M=4, edge_p=0.3):
    xi = rng.integers(1, I // 2 + 2, size=I)
    linkage = LinkageState(xi)
    U = rng.normal(0, 2, size=(linkage.n_clusters, K))
    beta = float(rng.normal(0, 2))
    edges = [(i, j) for i in range(I) for j in range(i + 1, I) if rng.random() < edge_p]
    net = Network(I, np.array(edges, dtype=np.int64).reshape(-1, 2))
    return linkage, net, beta, U


class TestExpit:
    def test_symmetry_point(self):
        assert expit(0.0) == 0.5

    def test_against_high_precision(self):
        for x in [10.0, -3.2, 0.7, 25.0, -40.0]:
            want = float(1 / (1 + mpmath.e ** (-mpmath.mpf(x))))
            assert expit(x) == pytest.approx(want, rel=1e-14)

    def test_reflection_identity(self):
        xs = np.linspace(-30, 30, 101)
        np.testing.assert_allclose(expit(-xs), 1 - expit(xs), atol=1e-15)

    def test_saturation(self):
        assert expit(700.0) == 1.0
        assert expit(-700.0) == pytest.approx(math.exp(-700.0), rel=1e-12)
        assert np.isfinite(expit(-745.0))


class TestEdgeLogit:
    def test_zero_distance(self):
        assert edge_logit(10.0, np.zeros(2), np.zeros(2)) == 10.0

    def test_three_four_five(self):
        assert edge_logit(10.0, np.array([3.0, 4.0]), np.zeros(2)) == pytest.approx(5.0)

    def test_distance_equal_intercept_gives_even_odds(self):
        eta = edge_logit(10.0, np.array([10.0, 0.0]), np.zeros(2))
        assert expit(eta) == 0.5

    def test_dimension_mismatch(self):
        with pytest.raises(ContractViolationError):
            edge_logit(0.0, np.zeros(2), np.zeros(3))


class TestNetworkLoglik:
    def test_single_edge_same_cluster(self):
        net = Network(2, np.array([[0, 1]]))
        linkage = LinkageState([1, 1])
        U = np.zeros((1, 2))
        want = math.log(expit(10.0))
        assert network_loglik(net, linkage, 10.0, U) == pytest.approx(want, rel=1e-12)

    def test_matches_naive_double_loop(self):
        rng = np.random.default_rng(7)
        for trial in range(20):
            linkage, net, beta, U = random_instance(rng, I=int(rng.integers(3, 11)))
            got = network_loglik(net, linkage, beta, U)
            want = naive_network_loglik(net.edges, linkage.xi, beta, U)
            assert got == pytest.approx(want, rel=1e-10)

    def test_invariant_under_cluster_relabeling(self):
        rng = np.random.default_rng(3)
        linkage, net, beta, U = random_instance(rng, I=9)
        perm = rng.permutation(linkage.n_clusters)
        xi2 = perm[linkage.xi - 1] + 1
        linkage2 = LinkageState(xi2)
        # realign rows of U with the new canonical labels
        U2 = np.empty_like(U)
        for old in range(linkage.n_clusters):
            new = linkage2.xi[np.nonzero(linkage.xi == old + 1)[0][0]] - 1
            U2[new] = U[old]
        assert network_loglik(net, linkage2, beta, U2) == pytest.approx(
            network_loglik(net, linkage, beta, U), rel=1e-12
        )

    def test_dimension_mismatch(self):
        net = Network(3, np.array([[0, 1]]))
        with pytest.raises(ContractViolationError):
            network_loglik(net, LinkageState([1, 2, 2]), 0.0, np.zeros((5, 2)))


class TestProfileLoglik:
    def test_all_undistorted_is_zero(self):
        tab = RecordTable(np.array([[0, 1], [2, 1]]), np.array([3, 2]))
        linkage = LinkageState([1, 2])
        Pi = tab.values.copy()
        W = np.zeros((2, 2), dtype=np.int8)
        thetas = [np.ones(3) / 3, np.ones(2) / 2]
        assert profile_loglik(tab, linkage, Pi, W, thetas) == 0.0

    def test_single_distorted_cell(self):
        tab = RecordTable(np.array([[5]]), np.array([12]))
        linkage = LinkageState([1])
        Pi = np.array([[3]])
        W = np.array([[1]])
        thetas = [np.ones(12) / 12]
        assert profile_loglik(tab, linkage, Pi, W, thetas) == pytest.approx(math.log(1 / 12))

    def test_support_violation_raises(self):
        tab = RecordTable(np.array([[5]]), np.array([12]))
        linkage = LinkageState([1])
        Pi = np.array([[3]])
        W = np.array([[0]])
        with pytest.raises(ContractViolationError):
            profile_loglik(tab, linkage, Pi, W, [np.ones(12) / 12])

    def test_matches_naive(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            I, L, M = 7, 3, 5
            xi = LinkageState(rng.integers(1, 5, size=I))
            Pi = rng.integers(0, M, size=(xi.n_clusters, L))
            W = rng.integers(0, 2, size=(I, L))
            P = np.where(W == 0, Pi[xi.xi - 1], rng.integers(0, M, size=(I, L)))
            tab = RecordTable(P, np.full(L, M))
            thetas = [rng.dirichlet(np.ones(M)) for _ in range(L)]
            got = profile_loglik(tab, xi, Pi, W, thetas)
            want = naive_profile_loglik(P, xi.xi, Pi, W, thetas)
            assert got == pytest.approx(want, rel=1e-10)


class TestMarginalFieldLik:
    def test_no_distortion_hit(self):
        assert marginal_record_field_lik(2, 2, 0.0, np.ones(4) / 4) == 1.0

    def test_no_distortion_miss(self):
        assert marginal_record_field_lik(2, 3, 0.0, np.ones(4) / 4) == 0.0

    def test_miss_with_distortion(self):
        assert marginal_record_field_lik(0, 1, 0.01, np.array([0.5, 0.5])) == pytest.approx(0.005)

    def test_sums_to_one_over_codes(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            M = int(rng.integers(2, 9))
            theta = rng.dirichlet(np.ones(M))
            psi = float(rng.random())
            pi_val = int(rng.integers(M))
            total = sum(marginal_record_field_lik(p, pi_val, psi, theta) for p in range(M))
            assert total == pytest.approx(1.0, abs=1e-12)


class TestElicitation:
    def test_a_sigma_constant(self):
        assert elicit_network_hypers(500, 2).a_sigma == 6.0
        assert elicit_network_hypers(30, 3).a_sigma == 6.0

    def test_b_sigma_rl500(self):
        h = elicit_network_hypers(500, 2)
        want = 5 * (math.sqrt(500) / (math.sqrt(500) - 2)) * math.pi * 500
        assert h.b_sigma == pytest.approx(want, rel=1e-12)
        assert h.b_sigma == pytest.approx(8625.4, abs=0.1)

    def test_profile_defaults(self):
        h = elicit_network_hypers(500, 2)
        assert (h.omega, h.alpha, h.a_dist, h.b_dist) == (100.0, 1.0, 1.0, 99.0)

    def test_small_I_rejected(self):
        with pytest.raises(ElicitationError):
            elicit_network_hypers(4, 2)


class TestTypes:
    def test_record_table_invariants(self):
        with pytest.raises(ContractViolationError):
            RecordTable(np.array([[0, 2]]), np.array([2, 2]))  # code out of range
        with pytest.raises(ContractViolationError):
            RecordTable(np.array([[0, 0]]), np.array([1, 2]))  # domain too small

    def test_network_invariants(self):
        with pytest.raises(ContractViolationError):
            Network(3, np.array([[1, 1]]))
        with pytest.raises(ContractViolationError):
            Network(3, np.array([[0, 1], [0, 1]]))
        with pytest.raises(ContractViolationError):
            Network(3, np.array([[0, 5]]))

    def test_canonicalization_idempotent_and_partition_preserving(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            raw = rng.integers(10, 60, size=12)
            a = LinkageState(raw)
            b = LinkageState(a.xi)
            assert np.array_equal(a.xi, b.xi)
            # same records grouped together before and after
            for i in range(12):
                for j in range(12):
                    assert (raw[i] == raw[j]) == (a.xi[i] == a.xi[j])

    def test_linkage_consistency_counts(self):
        s = LinkageState([4, 4, 9, 1, 1, 1])
        assert s.n_clusters == 3
        assert sorted(s.sizes.tolist()) == [1, 2, 3]
        assert s.allelic.tolist()[:3] == [1, 1, 1]
        assert int(np.sum(np.arange(1, s.I + 1) * s.allelic)) == s.I
        assert int(np.sum(s.allelic)) == s.n_clusters

    def test_hyperparams_positive(self):
        with pytest.raises(ContractViolationError):
            HyperParams(omega=-1)
