from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subcb.errors import CapacityError, DomainError, PreconditionError
from subcb.matroid import Matroid, flatten_pair, unflatten
from subcb.testkit import check_matroid_axioms, random_matroid


def brute_swaps(m, S):
    S = frozenset(S)
    out = {S}
    for s in S:
        for a in m.ground:
            if a not in S and m.is_independent(S - {s} | {a}):
                out.add(S - {s} | {a})
    return out


def two_blocks():
    return Matroid.partition(4, [[0, 1], [2, 3]], [1, 1])


class TestIndependence:
    def test_uniform_within_rank(self):
        assert Matroid.uniform(3, 2).is_independent({0, 1})

    def test_partition_capacity_exceeded(self):
        m = Matroid.partition(2, [[0, 1]], [1])
        assert not m.is_independent({0, 1})

    def test_partition_outside_blocks_is_dependent(self):
        m = Matroid.partition(4, [[0, 1]], [1])
        assert not m.is_independent({2})

    def test_ranking_same_first_position(self):
        # (1,1) and (1,2) in 1-based pairs, both at the first position
        m = Matroid.ranking(2)
        S = {flatten_pair(0, 0, 2), flatten_pair(0, 1, 2)}
        assert not m.is_independent(S)

    def test_out_of_range_raises(self):
        with pytest.raises(DomainError):
            Matroid.uniform(3, 2).is_independent({3})

    def test_flatten_roundtrip(self):
        assert unflatten(flatten_pair(2, 1, 3), 3) == (2, 1)

    @pytest.mark.parametrize("blocks,caps", [
        ([[0, 1], [1, 2]], [1, 1]),
        ([[0, 1]], [3]),
        ([[0, 1]], [-1]),
    ])
    def test_bad_partition(self, blocks, caps):
        with pytest.raises(DomainError):
            Matroid.partition(3, blocks, caps)

    def test_laminar_rejects_crossing_sets(self):
        with pytest.raises(DomainError):
            Matroid.laminar(3, [[0, 1], [1, 2]], [1, 1])


class TestNeighborhoods:
    def test_uniform_swap(self):
        nb = Matroid.uniform(3, 2).swap_neighborhood({0, 1})
        assert nb.members[0] == frozenset({0, 1})
        assert set(nb.members) == {frozenset({0, 1}), frozenset({0, 2}), frozenset({1, 2})}
        # remove 0 first, then remove 1
        assert nb.members[1:] == (frozenset({1, 2}), frozenset({0, 2}))

    def test_partition_swap(self):
        nb = two_blocks().swap_neighborhood({0, 2})
        assert set(nb.members) == {frozenset({0, 2}), frozenset({1, 2}), frozenset({0, 3})}
        assert nb.members[0] == frozenset({0, 2})

    def test_empty_center(self):
        assert Matroid.uniform(3, 2).swap_neighborhood(set()).members == (frozenset(),)

    def test_swap_requires_independence(self):
        with pytest.raises(PreconditionError):
            Matroid.uniform(3, 1).swap_neighborhood({0, 1})

    def test_base_neighborhood_uniform(self):
        nb = Matroid.uniform(3, 2).base_neighborhood({0, 1})
        assert set(nb.members) == {frozenset({0, 1}), frozenset({0, 2}), frozenset({1, 2})}

    def test_unique_base(self):
        nb = Matroid.uniform(4, 4).base_neighborhood({0, 1, 2, 3})
        assert nb.members == (frozenset({0, 1, 2, 3}),)

    def test_base_neighborhood_partition(self):
        m = Matroid.partition(3, [[0, 1], [2]], [1, 1])
        assert set(m.base_neighborhood({0, 2}).members) == {frozenset({0, 2}), frozenset({1, 2})}

    def test_base_neighborhood_requires_base(self):
        with pytest.raises(PreconditionError):
            Matroid.uniform(3, 2).base_neighborhood({0})

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**31), A=st.integers(2, 8))
    def test_swap_matches_brute_force(self, seed, A):
        rng = np.random.default_rng(seed)
        m = random_matroid(A, rng, max_rank=min(5, A))
        bases = m.enumerate_bases()
        S = bases[int(rng.integers(len(bases)))]
        nb = m.swap_neighborhood(S)
        assert set(nb.members) == brute_swaps(m, S)
        assert len(nb) == len(set(nb.members))
        k = len(S)
        assert len(nb) <= k * (A - k) + 1

    def test_ordering_is_by_removed_then_added(self):
        nb = Matroid.uniform(4, 2).swap_neighborhood({1, 2})
        moves = [(min(nb.members[0] - T), min(T - nb.members[0])) for T in nb.members[1:]]
        assert moves == sorted(moves)


class TestBases:
    def test_counts(self):
        assert len(Matroid.uniform(3, 2).enumerate_bases()) == 3
        assert len(two_blocks().enumerate_bases()) == 4

    def test_ranking_bases_brute_force(self):
        m = Matroid.ranking(2)
        expect = [frozenset(c) for c in combinations(range(4), 2) if m.is_independent(c)]
        assert sorted(map(sorted, m.enumerate_bases())) == sorted(map(sorted, expect))
        assert m.rank == 2

    def test_budget(self):
        with pytest.raises(CapacityError, match="greedy"):
            Matroid.uniform(30, 15).enumerate_bases(budget=1000)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31), A=st.integers(1, 7))
    def test_axioms(self, seed, A):
        m = random_matroid(A, np.random.default_rng(seed), max_rank=A)
        assert check_matroid_axioms(m)
        assert all(len(B) == m.rank for B in m.enumerate_bases())

    @pytest.mark.parametrize("m", [Matroid.uniform(5, 3), two_blocks(),
                                   Matroid.laminar(5, [[0, 1], [0, 1, 2, 3, 4]], [1, 3]),
                                   Matroid.ranking(2)])
    def test_dict_roundtrip(self, m):
        assert Matroid.from_dict(m.ground_size, m.to_dict()) == m
