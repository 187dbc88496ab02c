import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import beta as beta_dist

from microlink.errors import ContractViolationError, ElicitationError
from microlink.model import LinkageState
from microlink.priors import (
    ABPSpec,
    AllelicVector,
    EPPSpec,
    GeometricN,
    NBDPSpec,
    NBNBPSpec,
    PointMassN,
    TruncNegBinom,
    UPSpec,
    abp_allelic_log_pmf,
    abp_conditional_log_pmf,
    abp_elicit,
    abp_joint_log_pmf,
    abp_m2_marginal_log_pmf,
    allelic_of,
    epp_log_pmf,
    joint_log_pmf,
    kpp_log_pmf,
    nbdp_size_predictive,
    nbnb_elicit,
    prior_sample,
    reassignment_log_weights,
    up_log_pmf,
)
from .oracles import all_partitions, normalized_pmf_over_partitions, partition_counts, total_variation

ALL_SPECS = {
    "UP": UPSpec(),
    "EPP": EPPSpec(theta=1.4),
    "NBNBP": NBNBPSpec(a=1.6, q=0.7, eta=1.3, theta=0.4),
    "NBDP": NBDPSpec(a=1.6, q=0.7, alpha=1.0, mu0_param=0.5),
    "ABP2": ABPSpec(M=2, a_k=(3.0,), b_k=(12.0,), theta_k=(0.3,)),
    "ABP3": ABPSpec(M=3, a_k=(3.0, 3.0), b_k=(12.0, 12.0), theta_k=(0.35, 0.15)),
}


class TestAllelic:
    def test_toy_examples(self):
        assert allelic_of(LinkageState([1, 1, 1])).counts.tolist() == [0, 0, 1]
        assert allelic_of(LinkageState([1, 2, 2])).counts.tolist() == [1, 1]
        assert allelic_of(LinkageState([1, 2, 3, 4, 5])).counts.tolist() == [5]

    def test_identities(self):
        v = allelic_of(LinkageState([1, 1, 2, 3, 3, 3]))
        assert v.n_records == 6
        assert v.n_clusters == 3
        assert v.max_size == 3


class TestEPP:
    def test_hand_enumeration_I3(self):
        assert epp_log_pmf(LinkageState([1, 1, 1]), 1.0) == pytest.approx(math.log(1 / 3))
        assert epp_log_pmf(LinkageState([1, 2, 2]), 1.0) == pytest.approx(math.log(1 / 6))

    @pytest.mark.parametrize("I,theta", [(4, 0.5), (6, 1.0), (6, 3.7)])
    def test_sums_to_one(self, I, theta):
        parts = all_partitions(I)
        total = sum(math.exp(epp_log_pmf(LinkageState(p), theta)) for p in parts)
        assert total == pytest.approx(1.0, abs=1e-10)


class TestKPP:
    def test_point_mass_kappa_forces_one_cluster(self):
        kappa, mu = PointMassN(1), GeometricN(0.5)
        one = kpp_log_pmf(LinkageState([1, 1, 1]), kappa, mu)
        assert np.isfinite(one)
        assert kpp_log_pmf(LinkageState([1, 2, 2]), kappa, mu) == -np.inf

    def test_singletons_only_when_mu_is_point_mass_at_one(self):
        kappa, mu = GeometricN(0.3), PointMassN(1)
        assert np.isfinite(kpp_log_pmf(LinkageState([1, 2, 3]), kappa, mu))
        assert kpp_log_pmf(LinkageState([1, 1, 2]), kappa, mu) == -np.inf

    @pytest.mark.parametrize("name", ["NBNBP", "NBDP"])
    def test_pmf_matches_generative_rejection_oracle(self, name):
        # fixed prior parameters so pmf and sampler target the same law
        spec = ALL_SPECS[name]
        if name == "NBNBP":
            spec = NBNBPSpec(a=1.6, q=0.7, a_eta=1, b_eta=1, a_theta=2, b_theta=2,
                             eta=1.3, theta=0.4)
            frozen = _FrozenHyper(spec)
        else:
            frozen = spec
        I, draws = 5, 30_000
        parts, probs = normalized_pmf_over_partitions(lambda lk: joint_log_pmf(spec, lk), I)
        rng = np.random.default_rng(123)
        samples = [prior_sample(frozen, I, rng) for _ in range(draws)]
        tv = total_variation(parts, probs, partition_counts(samples), draws)
        assert tv < 0.02


class _FrozenHyper(NBNBPSpec):
    """NBNBP with the size-distribution parameters pinned during sampling."""

    def __new__(cls, spec):
        return NBNBPSpec(
            a=spec.a, q=spec.q,
            a_eta=1e8, b_eta=1e8 / spec.eta,          # Gamma concentrated at eta
            a_theta=1e8 * spec.theta, b_theta=1e8 * (1 - spec.theta),
            eta=spec.eta, theta=spec.theta,
        )


class TestNBNB:
    def test_elicit_rl500(self):
        a, q = nbnb_elicit(500)
        assert q == pytest.approx(0.996)
        assert a == pytest.approx(500 / 498)

    def test_elicit_I4(self):
        a, q = nbnb_elicit(4)
        assert (a, q) == (2.0, 0.5)

    def test_untruncated_moments(self):
        a, q = nbnb_elicit(100)
        assert a * q / (1 - q) == pytest.approx(50.0)
        assert a * q / (1 - q) ** 2 == pytest.approx(2500.0)

    def test_small_I_rejected(self):
        with pytest.raises(ElicitationError):
            nbnb_elicit(2)


class TestNBDPPredictive:
    def test_base_case(self):
        mu0 = GeometricN(0.5)
        assert nbdp_size_predictive(2, [], 1.0, mu0) == pytest.approx(0.25)

    def test_large_alpha_limit(self):
        mu0 = GeometricN(0.5)
        got = nbdp_size_predictive(2, [2, 3, 2], 1e9, mu0)
        assert got == pytest.approx(0.25, abs=1e-6)

    def test_spec_worked_example(self):
        mu0 = GeometricN(0.5)
        assert nbdp_size_predictive(2, [2], 1.0, mu0) == pytest.approx(0.625)

    def test_predictive_sums_to_one(self):
        mu0 = GeometricN(0.4)
        total = sum(nbdp_size_predictive(s, [1, 1, 3], 0.7, mu0) for s in range(1, 4000))
        assert total == pytest.approx(1.0, abs=1e-9)


class TestABPConditional:
    def test_I3_mixed_class(self):
        lk = LinkageState([1, 2, 2])
        assert abp_conditional_log_pmf(lk) == pytest.approx(math.log(1 / 3))

    def test_singleton_class_is_certain(self):
        lk = LinkageState([1, 2, 3])
        assert abp_conditional_log_pmf(lk) == pytest.approx(0.0)

    def test_inconsistent_allelic_vector_raises(self):
        lk = LinkageState([1, 2, 2])
        with pytest.raises(ContractViolationError):
            abp_conditional_log_pmf(lk, AllelicVector(np.array([3, 0, 0])))

    @pytest.mark.parametrize("I", [4, 6, 8])
    def test_class_members_sum_to_one(self, I):
        groups = {}
        for p in all_partitions(I):
            lk = LinkageState(p)
            key = tuple(lk.allelic.tolist())
            groups.setdefault(key, []).append(lk)
        for members in groups.values():
            total = sum(math.exp(abp_conditional_log_pmf(m)) for m in members)
            assert total == pytest.approx(1.0, abs=1e-10)


class TestABPAllelic:
    def test_m2_I2(self):
        spec = ABPSpec(M=2, a_k=(1.0,), b_k=(1.0,), theta_k=(0.5,))
        assert abp_allelic_log_pmf(np.array([2, 0]), spec, 2) == pytest.approx(math.log(0.5))
        assert abp_allelic_log_pmf(np.array([0, 1]), spec, 2) == pytest.approx(math.log(0.5))

    def test_delta_constraint(self):
        spec = ABPSpec(M=2, a_k=(1.0,), b_k=(1.0,), theta_k=(0.5,))
        assert abp_allelic_log_pmf(np.array([1, 1]), spec, 2) == -np.inf

    @pytest.mark.parametrize("I,M", [(6, 2), (9, 3), (12, 3)])
    def test_chain_normalizes_over_allelic_vectors(self, I, M):
        spec = ABPSpec(M=M, a_k=(2.0,) * (M - 1), b_k=(5.0,) * (M - 1),
                       theta_k=tuple(0.2 + 0.1 * k for k in range(M - 1)))
        total = 0.0
        # enumerate all allelic vectors with max size <= M
        def rec(k, remaining, counts):
            nonlocal total
            if k == 1:
                counts[0] = remaining
                total += math.exp(abp_allelic_log_pmf(np.array(counts), spec, I))
                counts[0] = 0
                return
            for rk in range(remaining // k + 1):
                counts[k - 1] = rk
                rec(k - 1, remaining - k * rk, counts)
                counts[k - 1] = 0

        rec(M, I, [0] * M)
        assert total == pytest.approx(1.0, abs=1e-10)


class TestABPJoint:
    def test_I2_uniform_halves(self):
        # with theta_2 marginalized under Beta(1,1), both partitions get 1/2
        for lk in (LinkageState([1, 2]), LinkageState([1, 1])):
            assert abp_m2_marginal_log_pmf(lk, 1.0, 1.0) == pytest.approx(math.log(0.5))

    def test_cap_violation(self):
        spec = ABPSpec(M=2, a_k=(3.0,), b_k=(12.0,))
        assert abp_joint_log_pmf(LinkageState([1, 1, 1]), spec) == -np.inf
        assert abp_m2_marginal_log_pmf(LinkageState([1, 1, 1]), 3, 12) == -np.inf

    @pytest.mark.parametrize("I", [5, 7])
    def test_joint_sums_to_one(self, I):
        spec = ABPSpec(M=2, a_k=(3.0,), b_k=(12.0,), theta_k=(0.27,))
        total = sum(
            math.exp(abp_joint_log_pmf(LinkageState(p), spec)) for p in all_partitions(I)
        )
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_class_mass_cancellation(self):
        # total mass of an allelic class equals p(r|M) exactly
        I = 6
        spec = ABPSpec(M=3, a_k=(2.0, 2.0), b_k=(7.0, 7.0), theta_k=(0.3, 0.2))
        classes = {}
        for p in all_partitions(I):
            lk = LinkageState(p)
            if lk.sizes.max() > spec.M:
                continue
            key = tuple(lk.allelic.tolist())
            classes[key] = classes.get(key, 0.0) + math.exp(abp_joint_log_pmf(lk, spec))
        for key, mass in classes.items():
            want = math.exp(abp_allelic_log_pmf(np.array(key), spec, I))
            assert mass == pytest.approx(want, rel=1e-10)

    def test_marginal_matches_numerical_integration(self):
        a2, b2 = 3.0, 12.0
        lk = LinkageState([1, 1, 2, 3, 4, 4])
        def integrand(t):
            spec = ABPSpec(M=2, a_k=(a2,), b_k=(b2,), theta_k=(t,))
            return math.exp(abp_joint_log_pmf(lk, spec)) * beta_dist.pdf(t, a2, b2)
        want, _ = quad(integrand, 0, 1)
        got = math.exp(abp_m2_marginal_log_pmf(lk, a2, b2))
        assert got == pytest.approx(want, rel=1e-8)


class TestABPElicit:
    def test_paper_targets(self):
        a_k, b_k = abp_elicit(0.8, 0.5, M=2)
        assert a_k[0] == pytest.approx(3.0)
        assert b_k[0] == pytest.approx(12.0)
        # induced Beta has mean 0.2 and cv 0.5
        a, b = a_k[0], b_k[0]
        mean = a / (a + b)
        cv = math.sqrt(b / (a * (a + b + 1)))
        assert mean == pytest.approx(0.2)
        assert cv == pytest.approx(0.5)

    def test_printed_orientation_is_degenerate(self):
        from microlink.priors import _beta_params_from_rho

        a, _ = _beta_params_from_rho((1 - 0.8) / 0.8, 0.5)
        assert a == pytest.approx(0.0, abs=1e-12)

    def test_degenerate_combination_rejected(self):
        with pytest.raises(ElicitationError):
            abp_elicit(0.2, 0.5)

    def test_small_cv_concentrates(self):
        (a1,), _ = abp_elicit(0.8, 0.2)
        (a2,), _ = abp_elicit(0.8, 0.05)
        assert a2 > a1 > 0

    def test_prior_predictive_singleton_fraction(self):
        # resolves the elicitation orientation: with rho = pi/(1-pi) the
        # expected fraction of records left as singletons matches the target
        rng = np.random.default_rng(0)
        spec = ABPSpec.from_targets(0.8, 0.5, M=2)
        fracs = [prior_sample(spec, 500, rng).allelic[0] / 500 for _ in range(300)]
        assert abs(float(np.mean(fracs)) - 0.8) < 0.03


class TestUP:
    def test_values(self):
        assert up_log_pmf(LinkageState([1, 2, 3])) == 0.0
        assert up_log_pmf(LinkageState([1, 1, 2])) == 0.0
        assert up_log_pmf(LinkageState([1, 1, 1])) == -np.inf

    def test_uniform_after_normalization(self):
        parts, probs = normalized_pmf_over_partitions(
            lambda lk: up_log_pmf(lk), 5
        )
        support = probs[probs > 0]
        assert np.allclose(support, support[0])


class TestExchangeability:
    @pytest.mark.parametrize("name", list(ALL_SPECS))
    def test_pmf_invariant_under_record_relabeling(self, name):
        spec = ALL_SPECS[name]
        import itertools

        I = 5
        for p in all_partitions(I):
            base = joint_log_pmf(spec, LinkageState(p))
            for perm in itertools.permutations(range(I)):
                moved = LinkageState(np.asarray(p)[list(perm)])
                got = joint_log_pmf(spec, moved)
                if base == -np.inf:
                    assert got == -np.inf
                else:
                    assert got == pytest.approx(base, rel=1e-12)


class TestReassignmentWeights:
    @pytest.mark.parametrize("name", list(ALL_SPECS))
    def test_matches_bruteforce_ratios(self, name):
        spec = ALL_SPECS[name]
        rng = np.random.default_rng(42)
        for trial in range(12):
            I = int(rng.integers(3, 9))
            while True:
                xi = rng.integers(1, I + 1, size=I)
                lk = LinkageState(xi)
                if np.isfinite(joint_log_pmf(spec, lk)):
                    break
            i = int(rng.integers(I))
            got = reassignment_log_weights(spec, lk, i)
            base_lk = LinkageState(np.delete(lk.xi, i))
            cur = joint_log_pmf(spec, lk)
            for k in range(base_lk.n_clusters + 1):
                if k < base_lk.n_clusters:
                    dest_label = k + 1
                else:
                    dest_label = base_lk.n_clusters + 1
                cand = np.insert(base_lk.xi, i, dest_label)
                want = joint_log_pmf(spec, LinkageState(cand)) - cur
                if want == -np.inf:
                    assert got[k] == -np.inf
                else:
                    assert got[k] == pytest.approx(want, rel=1e-10, abs=1e-10)

    def test_identity_move_has_zero_log_ratio(self):
        for spec in ALL_SPECS.values():
            lk = LinkageState([1, 2, 2, 3])
            w = reassignment_log_weights(spec, lk, 0)  # record 0 is a singleton
            # fresh destination recreates the original partition
            assert w[-1] == pytest.approx(0.0, abs=1e-12)

    def test_up_cap(self):
        lk = LinkageState([1, 1, 2])
        w = reassignment_log_weights(UPSpec(), lk, 2)
        assert w[0] == -np.inf  # joining the pair would make a triple
        assert w[1] == 0.0


class TestPriorSampling:
    def test_abp_support_capped(self):
        rng = np.random.default_rng(1)
        spec = ABPSpec(M=2, a_k=(1.0,), b_k=(1.0,))
        for _ in range(200):
            assert prior_sample(spec, 11, rng).sizes.max() <= 2

    def test_epp_tiny_theta_one_cluster(self):
        rng = np.random.default_rng(2)
        spec = EPPSpec(a_theta=1e-6, b_theta=1.0)   # theta ~ 0 almost surely
        counts = [prior_sample(spec, 10, rng).n_clusters for _ in range(50)]
        assert np.mean(counts) < 1.2

    @pytest.mark.parametrize("name", ["UP", "EPP", "ABP2", "ABP3"])
    def test_generative_matches_pmf(self, name):
        # for EPP/ABP the hyperprior is part of the draw, so marginalize the
        # pmf numerically over the hyperparameter where needed
        I, draws = 5, 20_000
        rng = np.random.default_rng(9)
        if name == "UP":
            spec = UPSpec()
            parts, probs = normalized_pmf_over_partitions(lambda lk: up_log_pmf(lk), I)
        elif name == "EPP":
            spec = EPPSpec(a_theta=3.0, b_theta=2.0, theta=1.5)
            def log_marg(lk):
                val, _ = quad(
                    lambda t: math.exp(epp_log_pmf(lk, t))
                    * t ** 2 * math.exp(-2 * t) * 8 / 2.0,
                    0, 60,
                )
                return math.log(val)
            parts, probs = normalized_pmf_over_partitions(log_marg, I)
        else:
            spec = ALL_SPECS[name]
            def log_marg(lk, spec=spec):
                if lk.sizes.max() > spec.M:
                    return -np.inf
                return abp_conditional_log_pmf(lk) + _marginal_allelic(lk, spec)
            parts, probs = normalized_pmf_over_partitions(log_marg, I)
        samples = [prior_sample(spec, I, rng) for _ in range(draws)]
        tv = total_variation(parts, probs, partition_counts(samples), draws)
        assert tv < 0.025


def _marginal_allelic(lk, spec):
    """log p(r | M) with each theta_k integrated against its Beta prior."""
    from itertools import product

    def integrate(dim):
        def f(*ts):
            s = ABPSpec(M=spec.M, a_k=spec.a_k, b_k=spec.b_k, theta_k=ts)
            val = math.exp(abp_allelic_log_pmf(lk.allelic, s, lk.I))
            for t, a, b in zip(ts, spec.a_k, spec.b_k):
                val *= beta_dist.pdf(t, a, b)
            return val
        if dim == 1:
            v, _ = quad(lambda t: f(t), 0, 1)
        else:
            from scipy.integrate import dblquad
            v, _ = dblquad(lambda y, x: f(x, y), 0, 1, 0, 1)
        return math.log(v) if v > 0 else -np.inf

    return integrate(spec.M - 1)
