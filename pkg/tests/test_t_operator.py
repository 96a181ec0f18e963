from itertools import combinations

import numpy as np
import pytest
import sympy as sp

from subcb.errors import CapacityError, DomainError
from subcb.set_function import ModularModel
from subcb.t_operator import (compute_weights, exact_distribution, harmonic, sample_subset,
                              sample_subset_masks, t_value, tau_bound)
from subcb.testkit import random_submodular, submodularity_violations

p = sp.Symbol("p")


def symbolic_weight(s, t, convention):
    head = p ** (t - 1) if convention == "filmus-ward" else p ** (s - 1)
    return float(sp.integrate(sp.exp(p) / (sp.E - 1) * head * (1 - p) ** (s - t), (p, 0, 1)))


E = float(sp.E)

# closed forms from the antiderivatives, filmus-ward convention
FW_CLOSED = {(1, 1): 1.0, (2, 1): (E - 2) / (E - 1), (2, 2): 1 / (E - 1),
             (3, 1): (2 * E - 5) / (E - 1), (3, 2): (3 - E) / (E - 1), (3, 3): (E - 2) / (E - 1)}
# literal convention, p^(s-1) in place of p^(t-1)
LITERAL_CLOSED = {(1, 1): 1.0, (2, 1): (3 - E) / (E - 1), (2, 2): 1 / (E - 1)}


def modular(weights):
    u = ModularModel(weights, u_max=1.0)
    return lambda S, ctx=None: u.value(S)


class TestWeights:
    @pytest.mark.parametrize("convention", ["filmus-ward", "literal"])
    def test_against_symbolic_integral(self, convention):
        table = compute_weights(6, convention=convention)
        for s in range(1, 7):
            for t in range(1, s + 1):
                assert table.weight(s, t) == pytest.approx(
                    symbolic_weight(s, t, convention), abs=1e-10)

    @pytest.mark.parametrize("key", sorted(FW_CLOSED))
    def test_closed_forms(self, key):
        assert compute_weights(3).weight(*key) == pytest.approx(FW_CLOSED[key], abs=1e-10)

    @pytest.mark.parametrize("key", sorted(LITERAL_CLOSED))
    def test_literal_closed_forms(self, key):
        table = compute_weights(3, convention="literal")
        assert table.weight(*key) == pytest.approx(LITERAL_CLOSED[key], abs=1e-10)

    def test_literal_example_values(self):
        table = compute_weights(2, convention="literal")
        assert table.weight(2, 2) == pytest.approx(0.581977, abs=1e-6)
        assert table.weight(2, 1) == pytest.approx(0.163953, abs=1e-6)
        assert table.tau[2] == pytest.approx(0.909883, abs=1e-6)

    def test_tau_two(self):
        assert compute_weights(2).tau[2] == pytest.approx(1.418023, abs=1e-6)

    def test_tau_bound(self):
        table = compute_weights(20)
        assert table.tau[1] == pytest.approx(1.0, abs=1e-12)
        for s in range(1, 21):
            assert table.tau[s] <= tau_bound(s)
        assert np.all(table.w[1:, 1:][np.tril_indices(20)] > 0)

    def test_harmonic(self):
        assert harmonic(3) == pytest.approx(11 / 6)

    def test_csv(self):
        lines = compute_weights(2).to_csv().splitlines()
        assert lines[0] == "s,t,w,tau,tau_bound_ok"
        assert len(lines) == 4 and all(l.endswith("true") for l in lines[1:])

    def test_kmax_validation(self):
        with pytest.raises(DomainError):
            compute_weights(0)


class TestTValue:
    def test_singleton(self):
        table = compute_weights(3)
        assert t_value(modular([0.7]), {0}, None, table) == pytest.approx(0.7)

    def test_literal_pair_example(self):
        table = compute_weights(2, convention="literal")
        assert t_value(modular([0.2, 0.3]), {0, 1}, None, table) == \
            pytest.approx(0.372965, abs=1e-6)

    def test_pair_filmus_ward(self):
        table = compute_weights(2)
        expect = (1 / (E - 1)) * 0.5 + (E - 2) / (E - 1) * 0.5
        assert t_value(modular([0.2, 0.3]), {0, 1}, None, table) == pytest.approx(expect)

    def test_mc_agrees_with_exact(self, rng):
        table = compute_weights(5)
        v = random_submodular(5, rng, "coverage")
        f = lambda S, ctx: v.value(S)
        exact = t_value(f, range(5), None, table, mode="exact")
        est, se = t_value(f, range(5), None, table, mode="mc", draws=30_000, rng=rng)
        assert abs(est - exact) < 3 * se

    def test_budget(self):
        table = compute_weights(12)
        with pytest.raises(CapacityError):
            t_value(modular(np.ones(12)), range(12), None, table, mode="exact", budget=1024)

    def test_mc_needs_rng(self):
        with pytest.raises(DomainError):
            t_value(modular([1.0, 1.0]), {0, 1}, None, compute_weights(2), mode="mc")

    @pytest.mark.parametrize("size", range(1, 11))
    def test_expectation_identity(self, size, rng):
        table = compute_weights(10)
        v = random_submodular(size, rng, "coverage")
        f = lambda S, ctx: v.value(S)
        law = exact_distribution(table.distribution(range(size)))
        mean = sum(prob * f(T, None) for T, prob in law.items())
        assert t_value(f, range(size), None, table) == pytest.approx(
            table.tau[size] * mean, abs=1e-9)

    def test_preserves_submodularity(self, rng):
        table = compute_weights(6)
        for _ in range(10):
            v = random_submodular(6, rng)
            Tv = lambda S, ctx: t_value(lambda T, c: v.value(T), S, None, table)
            viol = submodularity_violations(Tv, 6, tol=1e-10)
            assert viol["monotone"] == 0 and viol["submodular"] == 0


class TestSampler:
    def test_singleton(self, rng):
        dist = compute_weights(1).distribution({4})
        assert all(sample_subset(dist, rng) == {4} for _ in range(20))

    def test_literal_pair_probabilities(self):
        dist = compute_weights(2, convention="literal").distribution({0, 1})
        assert dist.probability({0, 1}) == pytest.approx(0.639617, abs=1e-6)
        assert dist.probability({0}) == pytest.approx(0.180192, abs=1e-6)

    def test_filmus_ward_pair_probabilities(self):
        dist = compute_weights(2).distribution({0, 1})
        assert dist.probability({0, 1}) == pytest.approx(1 / (2 * E - 3), abs=1e-12)
        assert dist.probability({1}) == pytest.approx((E - 2) / (2 * E - 3), abs=1e-12)

    def test_empirical_pair_frequencies(self, rng):
        dist = compute_weights(2, convention="literal").distribution({0, 1})
        masks = sample_subset_masks(dist, rng, 1_000_000)
        freq = np.bincount(masks, minlength=4) / len(masks)
        assert freq[3] == pytest.approx(0.639617, abs=0.002)
        assert freq[1] == pytest.approx(0.180192, abs=0.002)
        assert freq[2] == pytest.approx(0.180192, abs=0.002)

    def test_scalar_and_vector_samplers_agree(self, rng):
        dist = compute_weights(3).distribution({2, 5, 7})
        n = 20_000
        scalar = np.zeros(8)
        for _ in range(n):
            T = sample_subset(dist, rng)
            scalar[sum(1 << dist.base.index(a) for a in T)] += 1
        vector = np.bincount(sample_subset_masks(dist, rng, n), minlength=8)
        assert 0.5 * np.abs(scalar - vector).sum() / n < 0.03

    def test_cardinality_law_sums_to_one(self):
        table = compute_weights(8)
        for s in range(1, 9):
            dist = table.distribution(range(s))
            assert dist.q.sum() == pytest.approx(1.0, abs=1e-12)
            law = exact_distribution(dist)
            assert sum(law.values()) == pytest.approx(1.0, abs=1e-12)
            for t in range(1, s + 1):
                probs = {law[frozenset(T)] for T in combinations(range(s), t)}
                assert max(probs) - min(probs) < 1e-15

    def test_empty_undefined(self):
        with pytest.raises(DomainError):
            compute_weights(2).distribution(set())
