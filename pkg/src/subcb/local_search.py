"""Swap local search for set-function scores over a matroid."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .igw import ScoredActions
from .matroid import Matroid, SwapNeighborhood

Score = Callable[[frozenset], float]


@dataclass(frozen=True)
class LocalSearchResult:
    set: frozenset
    score: float
    iterations: int
    converged: bool
    improvement_tol: float


def greedy_base(score: Score, m: Matroid, size: int | None = None) -> frozenset:
    """Marginal-gain greedy up to ``size`` elements (default: a base).

    Elements are added even when the best gain is negative so that the
    result always has full cardinality. Ties go to the lowest element id.
    """
    target = m.rank if size is None else min(size, m.rank)
    S = frozenset()
    while len(S) < target:
        best, best_val = None, -np.inf
        for a in m.ground:
            if a in S:
                continue
            cand = S | {a}
            if not m._independent(cand):
                continue
            val = score(cand)
            if val > best_val:
                best, best_val = cand, val
        if best is None:
            break
        S = best
    return S


def local_optimum(score: Score, m: Matroid, mode: str = "swap", rng=None,
                  tol: float = 1e-9, max_iters: int = 1000,
                  size: int | None = None) -> LocalSearchResult:
    """Best-improvement swap search started from the greedy set.

    ``mode="swap"`` moves within the swap neighborhood of independent sets
    of the start's cardinality; ``mode="base"`` within the base
    neighborhood (the start is then a base). A move is taken only when it
    improves on the incumbent by more than ``tol``.

    ``rng`` is accepted for interface symmetry; the search is deterministic.
    """
    if mode not in ("swap", "base"):
        raise ValueError(f"unknown neighborhood mode {mode!r}")
    if m.rank == 0:
        return LocalSearchResult(frozenset(), float(score(frozenset())), 0, True, tol)
    S = greedy_base(score, m, None if mode == "base" else size)
    cur = float(score(S))
    neighborhood = m.base_neighborhood if mode == "base" else m.swap_neighborhood
    for it in range(max_iters):
        best, best_val = S, cur
        for T in neighborhood(S).members[1:]:
            val = float(score(T))
            if val > best_val:
                best, best_val = T, val
        if best_val <= cur + tol:
            return LocalSearchResult(S, cur, it, True, tol)
        S, cur = best, best_val
    return LocalSearchResult(S, cur, max_iters, False, tol)


def neighborhood_scores(score: Score, nb: SwapNeighborhood, gamma: float = 1.0,
                        mu: float = 1.0, clamp: bool = True) -> ScoredActions:
    vals = np.array([float(score(T)) for T in nb.members])
    if clamp:
        vals = np.clip(vals, 0.0, 1.0)
    return ScoredActions(nb.members, vals, gamma, mu)
