import itertools
import math

import networkx as nx
import numpy as np
import pytest

from microlink.analysis import (
    EvalReport,
    binder_loss,
    binder_point_estimate,
    microclustering_diagnostic,
    network_stats,
    pairwise_metrics,
    population_size_summary,
    similarity_matrix,
)
from microlink.errors import ContractViolationError
from microlink.model import LinkageState, Network
from microlink.priors import ABPSpec, EPPSpec
from .oracles import all_partitions


class TestSimilarity:
    def test_identical_samples(self):
        s = similarity_matrix([np.array([1, 1, 2])] * 5)
        want = np.array([[1, 1, 0], [1, 1, 0], [0, 0, 1]], dtype=float)
        np.testing.assert_array_equal(s.matrix, want)

    def test_half_and_half(self):
        s = similarity_matrix([np.array([1, 1]), np.array([1, 2])])
        assert s.matrix[0, 1] == 0.5

    def test_matches_recount_oracle(self):
        rng = np.random.default_rng(0)
        samples = [rng.integers(1, 5, size=10) for _ in range(100)]
        samples = [LinkageState(s).xi for s in samples]
        s = similarity_matrix(samples)
        for i, j in itertools.combinations(range(10), 2):
            want = np.mean([xi[i] == xi[j] for xi in samples])
            assert s.matrix[i, j] == pytest.approx(want, abs=1e-12)
            assert s.matrix[i, j] == s.matrix[j, i]
        assert np.all(np.diag(s.matrix) == 1)


class TestBinder:
    def test_no_affinity_gives_singletons(self):
        m = np.full((4, 4), 0.0)
        np.fill_diagonal(m, 1.0)
        est = binder_point_estimate(similarity_matrix_like(m))
        assert est.n_clusters == 4

    def test_three_record_example(self):
        m = np.array([[1.0, 0.9, 0.1], [0.9, 1.0, 0.1], [0.1, 0.1, 1.0]])
        est = binder_point_estimate(similarity_matrix_like(m))
        assert est.xi.tolist() == [1, 1, 2]

    def test_greedy_beats_sampled_partitions(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            I = 7
            samples = [LinkageState(rng.integers(1, 4, size=I)).xi for _ in range(40)]
            sim = similarity_matrix(samples)
            est = binder_point_estimate(sim)
            est_loss = binder_loss(est, sim)
            for xi in samples:
                assert est_loss <= binder_loss(LinkageState(xi), sim) + 1e-9

    def test_near_optimal_on_exhaustive_enumeration(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            I = 6
            samples = [LinkageState(rng.integers(1, 4, size=I)).xi for _ in range(30)]
            sim = similarity_matrix(samples)
            est_loss = binder_loss(binder_point_estimate(sim), sim)
            best = min(binder_loss(LinkageState(p), sim) for p in all_partitions(I))
            assert est_loss <= best + 0.35  # greedy is close to the exact minimizer

    def test_label_invariance(self):
        rng = np.random.default_rng(8)
        samples = [rng.integers(1, 4, size=8) for _ in range(25)]
        sim1 = similarity_matrix([LinkageState(s).xi for s in samples])
        sim2 = similarity_matrix([LinkageState(s + 10).xi for s in samples])
        a = binder_point_estimate(sim1)
        b = binder_point_estimate(sim2)
        assert np.array_equal(a.xi, b.xi)


def similarity_matrix_like(m):
    from microlink.analysis import PosteriorSimilarity

    return PosteriorSimilarity(m)


class TestPairwiseMetrics:
    def test_perfect(self):
        t = LinkageState([1, 1, 2, 3])
        r = pairwise_metrics(t, t)
        assert (r.recall, r.precision, r.f1) == (1.0, 1.0, 1.0)

    def test_spec_example(self):
        truth = LinkageState([1, 1, 2, 3])          # true pairs {(0,1)}
        est = LinkageState([1, 1, 2, 2])            # est pairs {(0,1),(2,3)}
        r = pairwise_metrics(est, truth)
        assert r.recall == 1.0
        assert r.precision == 0.5
        assert r.f1 == pytest.approx(2 / 3)

    def test_all_singletons_estimate(self):
        truth = LinkageState([1, 1, 2])
        est = LinkageState([1, 2, 3])
        r = pairwise_metrics(est, truth)
        assert r.recall == 0.0
        assert r.precision == 1.0  # empty estimate convention
        assert r.f1 == 0.0

    def test_record_permutation_invariance(self):
        rng = np.random.default_rng(1)
        t = rng.integers(1, 4, size=9)
        e = rng.integers(1, 5, size=9)
        perm = rng.permutation(9)
        r1 = pairwise_metrics(LinkageState(e), LinkageState(t))
        r2 = pairwise_metrics(LinkageState(e[perm]), LinkageState(t[perm]))
        assert r1 == r2

    def test_f1_is_harmonic_mean(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            e = LinkageState(rng.integers(1, 4, size=8))
            t = LinkageState(rng.integers(1, 4, size=8))
            r = pairwise_metrics(e, t)
            if r.precision + r.recall > 0:
                assert r.f1 == pytest.approx(
                    2 * r.precision * r.recall / (r.precision + r.recall)
                )

    def test_length_mismatch(self):
        with pytest.raises(ContractViolationError):
            pairwise_metrics(LinkageState([1, 2]), LinkageState([1, 2, 3]))


class TestPopulationSize:
    def test_constant(self):
        mean, sd = population_size_summary([LinkageState(np.arange(1, 451))] * 5)
        assert (mean, sd) == (450.0, 0.0)

    def test_two_values(self):
        mean, sd = population_size_summary(
            [LinkageState(np.arange(1, 441)), LinkageState(np.arange(1, 461))]
        )
        assert mean == 450.0
        assert sd == pytest.approx(math.sqrt(200), rel=1e-12)  # 14.142...


class TestNetworkStats:
    def test_triangle(self):
        net = Network(3, np.array([[0, 1], [0, 2], [1, 2]]))
        trans, assort, dens = network_stats(net)
        assert trans == 1.0
        assert math.isnan(assort)
        assert dens == 1.0

    def test_path(self):
        net = Network(3, np.array([[0, 1], [1, 2]]))
        trans, _, dens = network_stats(net)
        assert trans == 0.0
        assert dens == pytest.approx(2 / 3)

    def test_against_networkx(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            I = 30
            edges = [(i, j) for i in range(I) for j in range(i + 1, I) if rng.random() < 0.15]
            net = Network(I, np.array(edges))
            g = nx.Graph()
            g.add_nodes_from(range(I))
            g.add_edges_from(edges)
            trans, assort, dens = network_stats(net)
            assert trans == pytest.approx(nx.transitivity(g), rel=1e-10)
            assert assort == pytest.approx(
                nx.degree_assortativity_coefficient(g), rel=1e-8
            )
            assert dens == pytest.approx(nx.density(g), rel=1e-12)


class TestMicroclusteringDiagnostic:
    def test_abp_bound_and_halving(self):
        rng = np.random.default_rng(6)
        spec = ABPSpec(M=2, a_k=(3.0,), b_k=(12.0,))
        rows = microclustering_diagnostic(spec, [50, 100, 200], 150, rng)
        vals = dict(rows)
        for I, v in rows:
            assert v <= 2 / I + 1e-12
        assert vals[200] <= 0.6 * vals[100]

    def test_epp_does_not_vanish(self):
        rng = np.random.default_rng(7)
        spec = EPPSpec(a_theta=1.0, b_theta=1.0, theta=1.0)
        rows = microclustering_diagnostic(spec, [50, 100, 200], 150, rng)
        vals = dict(rows)
        assert vals[200] > 0.5 * vals[50]

    def test_grid_must_increase(self):
        with pytest.raises(ContractViolationError):
            microclustering_diagnostic(ABPSpec(M=2, a_k=(1.0,), b_k=(1.0,)), [100, 100], 5,
                                       np.random.default_rng(0))
