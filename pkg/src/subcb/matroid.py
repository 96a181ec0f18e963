"""Matroids over a dense ground set ``0..A-1``.

Three kinds are supported: uniform, partition and laminar. Sets of
elements are represented as ``frozenset`` of ints throughout the package.
Neighborhood enumeration is deterministic: the center comes first, then
single swaps ordered by removed element and then by added element.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Iterable, Sequence

from .errors import CapacityError, DomainError, PreconditionError

DEFAULT_ENUMERATION_BUDGET = 10**6

ElementSet = frozenset


def as_set(elements: Iterable[int]) -> frozenset:
    return frozenset(int(a) for a in elements)


@dataclass(frozen=True)
class SwapNeighborhood:
    center: frozenset
    members: tuple

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)


@dataclass(frozen=True)
class Matroid:
    """An immutable matroid on ``{0, ..., ground_size - 1}``.

    Use the :meth:`uniform`, :meth:`partition` and :meth:`laminar`
    constructors rather than the raw initializer.

    Parameters
    ----------
    ground_size : int
        Number of elements ``A``.
    kind : str
        One of ``"uniform"``, ``"partition"``, ``"laminar"``.
    blocks : tuple of frozenset
        Constrained element groups (partition blocks or laminar family
        members). Empty for the uniform kind.
    capacities : tuple of int
        Capacity of each block, or ``(k,)`` for the uniform kind.
    """

    ground_size: int
    kind: str
    blocks: tuple = ()
    capacities: tuple = ()
    _rank: int = field(default=-1, repr=False, compare=False)

    # -- constructors -------------------------------------------------

    @classmethod
    def uniform(cls, ground_size: int, k: int) -> "Matroid":
        _check_ground(ground_size)
        if k < 0:
            raise DomainError(f"uniform matroid rank must be nonnegative, got {k}")
        return cls._build(ground_size, "uniform", (), (int(k),))

    @classmethod
    def partition(cls, ground_size: int, blocks: Sequence[Iterable[int]],
                  capacities: Sequence[int]) -> "Matroid":
        _check_ground(ground_size)
        blocks = tuple(as_set(b) for b in blocks)
        capacities = tuple(int(c) for c in capacities)
        if len(blocks) != len(capacities):
            raise DomainError("partition needs one capacity per block")
        seen = set()
        for b, c in zip(blocks, capacities):
            _check_elements(b, ground_size)
            if seen & b:
                raise DomainError("partition blocks must be pairwise disjoint")
            seen |= b
            if not 0 <= c <= len(b):
                raise DomainError(f"capacity {c} outside [0, {len(b)}]")
        return cls._build(ground_size, "partition", blocks, capacities)

    @classmethod
    def laminar(cls, ground_size: int, family: Sequence[Iterable[int]],
                capacities: Sequence[int]) -> "Matroid":
        """Laminar matroid: ``|S & M| <= cap(M)`` for every family member ``M``.

        Members must be pairwise nested or disjoint. Elements outside every
        member are unconstrained.
        """
        _check_ground(ground_size)
        family = tuple(as_set(b) for b in family)
        capacities = tuple(int(c) for c in capacities)
        if len(family) != len(capacities):
            raise DomainError("laminar family needs one capacity per member")
        for b in family:
            _check_elements(b, ground_size)
        for b1, b2 in combinations(family, 2):
            if b1 & b2 and not (b1 <= b2 or b2 <= b1):
                raise DomainError("laminar family members must be nested or disjoint")
        if any(c < 0 for c in capacities):
            raise DomainError("laminar capacities must be nonnegative")
        return cls._build(ground_size, "laminar", family, capacities)

    @classmethod
    def ranking(cls, n_items: int) -> "Matroid":
        """Position/item placement matroid over ``[A] x [A]``.

        Element ``(i, j)`` (item ``j`` at position ``i``) is encoded as
        ``i * A + j``. The chain ``M_s = {(i, j): i < s}`` has capacity ``s``.
        """
        A = int(n_items)
        family = [range(s * A) for s in range(1, A + 1)]
        return cls.laminar(A * A, family, list(range(1, A + 1)))

    @classmethod
    def _build(cls, ground_size, kind, blocks, capacities):
        m = cls(int(ground_size), kind, blocks, capacities)
        object.__setattr__(m, "_rank", len(m._greedy_base()))
        return m

    # -- core queries ------------------------------------------------

    @property
    def rank(self) -> int:
        return self._rank

    @property
    def ground(self) -> range:
        return range(self.ground_size)

    def is_independent(self, S: Iterable[int]) -> bool:
        S = as_set(S)
        _check_elements(S, self.ground_size)
        return self._independent(S)

    def _independent(self, S: frozenset) -> bool:
        if self.kind == "uniform":
            return len(S) <= self.capacities[0]
        if self.kind == "partition":
            covered = 0
            for b, c in zip(self.blocks, self.capacities):
                n = len(S & b)
                if n > c:
                    return False
                covered += n
            # elements outside every block are not allowed
            return covered == len(S)
        for b, c in zip(self.blocks, self.capacities):
            if len(S & b) > c:
                return False
        return True

    def is_base(self, S: Iterable[int]) -> bool:
        S = as_set(S)
        return len(S) == self.rank and self.is_independent(S)

    def _greedy_base(self) -> frozenset:
        S = frozenset()
        for a in range(self.ground_size):
            if self._independent(S | {a}):
                S = S | {a}
        return S

    # -- neighborhoods -----------------------------------------------

    def swap_neighborhood(self, S: Iterable[int]) -> SwapNeighborhood:
        """All independent single swaps of ``S`` plus ``S`` itself."""
        S = as_set(S)
        if not self.is_independent(S):
            raise PreconditionError(f"{sorted(S)} is not independent")
        members = [S]
        outside = [b for b in range(self.ground_size) if b not in S]
        for a in sorted(S):
            rest = S - {a}
            for b in outside:
                cand = rest | {b}
                if self._independent(cand):
                    members.append(cand)
        return SwapNeighborhood(S, tuple(members))

    def base_neighborhood(self, S: Iterable[int]) -> SwapNeighborhood:
        S = as_set(S)
        if not self.is_base(S):
            raise PreconditionError(f"{sorted(S)} is not a base")
        # equal-cardinality swaps of a base that stay independent are bases
        return self.swap_neighborhood(S)

    # -- enumeration -------------------------------------------------

    def enumerate_bases(self, budget: int = DEFAULT_ENUMERATION_BUDGET) -> list:
        n = comb(self.ground_size, self.rank)
        if n > budget:
            raise CapacityError(
                f"C({self.ground_size}, {self.rank}) = {n} bases exceed budget "
                f"{budget}; use the greedy benchmark instead")
        return [frozenset(c) for c in combinations(range(self.ground_size), self.rank)
                if self._independent(frozenset(c))]

    def enumerate_independent(self, max_size: int | None = None,
                              budget: int = DEFAULT_ENUMERATION_BUDGET) -> list:
        top = self.rank if max_size is None else min(max_size, self.rank)
        total = sum(comb(self.ground_size, r) for r in range(top + 1))
        if total > budget:
            raise CapacityError(f"{total} candidate sets exceed budget {budget}")
        out = []
        for r in range(top + 1):
            out.extend(frozenset(c) for c in combinations(range(self.ground_size), r)
                       if self._independent(frozenset(c)))
        return out

    # -- serialization -----------------------------------------------

    def to_dict(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform", "k": self.capacities[0]}
        key = "blocks" if self.kind == "partition" else "family"
        return {"kind": self.kind,
                key: [sorted(b) for b in self.blocks],
                "capacities": list(self.capacities)}

    @classmethod
    def from_dict(cls, ground_size: int, spec: dict) -> "Matroid":
        kind = spec.get("kind")
        if kind == "uniform":
            return cls.uniform(ground_size, spec["k"])
        if kind == "partition":
            return cls.partition(ground_size, spec["blocks"], spec["capacities"])
        if kind == "laminar":
            return cls.laminar(ground_size, spec["family"], spec["capacities"])
        if kind == "ranking":
            A = int(spec["items"])
            if A * A != ground_size:
                raise DomainError(f"ranking over {A} items needs ground size {A * A}")
            return cls.ranking(A)
        raise DomainError(f"unknown matroid kind {kind!r}")


def _check_ground(A):
    if int(A) < 1:
        raise DomainError(f"ground set size must be >= 1, got {A}")


def _check_elements(S, A):
    for a in S:
        if not 0 <= a < A:
            raise DomainError(f"element {a} outside ground set of size {A}")


def flatten_pair(i: int, j: int, n_items: int) -> int:
    """Row-major code of element ``(i, j)`` in ``[A] x [A]`` (0-based)."""
    return i * n_items + j


def unflatten(e: int, n_items: int) -> tuple:
    return divmod(e, n_items)
