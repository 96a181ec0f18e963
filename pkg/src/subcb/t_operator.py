"""Non-oblivious potential ``T v`` and its subset distribution ``D_S``.

``T v(S) = sum_{T <= S, T nonempty} w[|S|][|T|] v(T) = tau(|S|) E_{T ~ D_S} v(T)``.

Two weight conventions are available:

``"filmus-ward"`` (default)
    ``w[s][t] = int_0^1 e^p / (e - 1) p^(t-1) (1 - p)^(s-t) dp``. Local optima
    of ``T v`` over bases are ``1 - 1/e`` approximate.
``"literal"``
    ``w[s][t] = int_0^1 e^p / (e - 1) p^(s-1) (1 - p)^(s-t) dp``. Kept for
    comparison; the ``1 - 1/e`` exchange inequality does not hold for it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .errors import CapacityError, DomainError

E = math.e
CONVENTIONS = ("filmus-ward", "literal")
EXACT_MAX_SIZE = 15


@dataclass(frozen=True)
class WeightTable:
    """Weights ``w[s][t]`` for ``1 <= t <= s <= k_max`` (index 0 unused)."""

    w: np.ndarray
    tau: np.ndarray
    convention: str = "filmus-ward"

    @property
    def k_max(self) -> int:
        return self.w.shape[0] - 1

    def weight(self, s: int, t: int) -> float:
        return float(self.w[s, t])

    def distribution(self, S) -> "SubsetDistribution":
        S = frozenset(S)
        s = len(S)
        if s == 0:
            raise DomainError("D_S is undefined for the empty set")
        if s > self.k_max:
            raise DomainError(f"|S| = {s} exceeds table k_max = {self.k_max}")
        t = np.arange(1, s + 1)
        q = np.array([comb(s, int(ti)) for ti in t]) * self.w[s, 1:s + 1] / self.tau[s]
        return SubsetDistribution(tuple(sorted(S)), q / q.sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["s", "t", "w", "tau", "tau_bound_ok"])
        for s in range(1, self.k_max + 1):
            ok = self.tau[s] <= tau_bound(s)
            for t in range(1, s + 1):
                writer.writerow([s, t, repr(float(self.w[s, t])),
                                 repr(float(self.tau[s])), str(bool(ok)).lower()])
        return buf.getvalue()


def harmonic(s: int) -> float:
    return sum(1.0 / i for i in range(1, s + 1))


def tau_bound(s: int) -> float:
    """``e/(e-1) H_s``."""
    return E / (E - 1.0) * harmonic(s)


def compute_weights(k_max: int, quad_points: int = 64,
                    convention: str = "filmus-ward") -> WeightTable:
    """Tabulate ``w[s][t]`` by fixed-order Gauss-Legendre quadrature on [0, 1]."""
    if k_max < 1:
        raise DomainError("k_max must be at least 1")
    if convention not in CONVENTIONS:
        raise DomainError(f"unknown weight convention {convention!r}")
    nodes, qw = np.polynomial.legendre.leggauss(quad_points)
    p = 0.5 * (nodes + 1.0)
    qw = 0.5 * qw * np.exp(p) / (E - 1.0)
    w = np.zeros((k_max + 1, k_max + 1))
    tau = np.zeros(k_max + 1)
    for s in range(1, k_max + 1):
        for t in range(1, s + 1):
            head = p ** (t - 1) if convention == "filmus-ward" else p ** (s - 1)
            w[s, t] = float(np.dot(qw, head * (1.0 - p) ** (s - t)))
        tau[s] = sum(comb(s, t) * w[s, t] for t in range(1, s + 1))
    w.setflags(write=False)
    tau.setflags(write=False)
    return WeightTable(w, tau, convention)


@dataclass(frozen=True)
class SubsetDistribution:
    """``D_S``: cardinality ``t`` with probability ``q[t-1]``, then a uniform t-subset."""

    base: tuple
    q: np.ndarray

    def probability(self, T) -> float:
        T = frozenset(T)
        if not T or not T <= frozenset(self.base):
            return 0.0
        t = len(T)
        return float(self.q[t - 1]) / comb(len(self.base), t)


def sample_subset(dist: SubsetDistribution, rng: np.random.Generator) -> frozenset:
    s = len(dist.base)
    if s == 1:
        return frozenset(dist.base)
    t = int(rng.choice(s, p=dist.q)) + 1
    idx = rng.choice(s, size=t, replace=False)
    return frozenset(dist.base[i] for i in idx)


def sample_subset_masks(dist: SubsetDistribution, rng: np.random.Generator,
                        size: int) -> np.ndarray:
    """``size`` independent draws from ``D_S`` as bitmasks over ``dist.base`` positions.

    Same two-stage law as :func:`sample_subset`: the cardinality from ``q``,
    then the ``t`` positions with the smallest uniform keys.
    """
    s = len(dist.base)
    t = rng.choice(s, size=size, p=dist.q) + 1
    ranks = np.argsort(np.argsort(rng.random((size, s)), axis=1), axis=1)
    chosen = ranks < t[:, None]
    return (chosen * (1 << np.arange(s))).sum(axis=1)


def t_value(v, S, ctx, table: WeightTable, *, mode: str = "auto",
            draws: int = 10_000, rng: np.random.Generator | None = None,
            budget: int = 2**EXACT_MAX_SIZE):
    """Evaluate ``T v(S)``.

    ``v`` is any callable ``(frozenset, ctx) -> float``. Exact mode sums over
    all nonempty subsets; Monte Carlo mode averages ``draws`` samples from
    ``D_S`` and returns ``(estimate, standard_error)``. ``mode="auto"`` is exact
    when ``2^|S| <= budget`` and Monte Carlo otherwise. Exact evaluation
    returns a bare float.
    """
    S = frozenset(S)
    s = len(S)
    if s == 0:
        return 0.0
    if s > table.k_max:
        raise DomainError(f"|S| = {s} exceeds table k_max = {table.k_max}")
    exact_ok = 2**s <= budget
    if mode == "exact" or (mode == "auto" and exact_ok):
        if not exact_ok:
            raise CapacityError(f"2^{s} subsets exceed enumeration budget {budget}")
        if s == 1:
            return float(table.w[1, 1] * v(S, ctx))
        items = sorted(S)
        total = 0.0
        for t in range(1, s + 1):
            wt = table.w[s, t]
            total += wt * sum(v(frozenset(T), ctx) for T in combinations(items, t))
        return float(total)
    if mode not in ("auto", "mc"):
        raise DomainError(f"unknown mode {mode!r}")
    if rng is None:
        raise DomainError("Monte Carlo evaluation needs a random generator")
    dist = table.distribution(S)
    vals = np.array([v(sample_subset(dist, rng), ctx) for _ in range(draws)])
    tau = table.tau[s]
    return float(tau * vals.mean()), float(tau * vals.std(ddof=1) / math.sqrt(draws))


def exact_distribution(dist: SubsetDistribution) -> dict:
    """Probability of every nonempty subset of the base set."""
    out = {}
    for t in range(1, len(dist.base) + 1):
        for T in combinations(dist.base, t):
            out[frozenset(T)] = dist.probability(T)
    return out
