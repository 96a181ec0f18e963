"""Brute-force oracles and randomized batteries for small instances.

Everything here enumerates exhaustively and is only meant for ground sets
of at most a handful of elements.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from itertools import combinations, permutations
from typing import Callable, Sequence

import numpy as np

from .errors import CapacityError, PreconditionError
from .igw import igw_lemma_lhs, igw_probabilities
from .matroid import DEFAULT_ENUMERATION_BUDGET, Matroid
from .set_function import ConcaveModularModel, CoverageModel, WidthModel
from .t_operator import WeightTable, compute_weights, t_value

C_1ME = 1.0 - math.exp(-1.0)
SLACK_TOL = -1e-9
GENERATOR_KINDS = ("coverage", "width", "concave_modular")


@dataclass
class VerifyReport:
    name: str
    instances: int
    checks: int
    min_slack: float
    elapsed: float = 0.0
    tol: float = SLACK_TOL
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.min_slack >= self.tol

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name:<14} instances={self.instances:<6} "
                f"checks={self.checks:<8} min_slack={self.min_slack:+.3e} "
                f"({self.elapsed:.1f}s)")


# -- random instances ---------------------------------------------------------

def random_submodular(A: int, rng: np.random.Generator, kind: str | None = None):
    """A random normalized monotone submodular function on ``A`` elements."""
    if kind is None:
        kind = GENERATOR_KINDS[int(rng.integers(len(GENERATOR_KINDS)))]
    if kind == "coverage":
        m = int(rng.integers(A, 2 * A + 3))
        covers = rng.random((A, m)) < rng.uniform(0.15, 0.5)
        return CoverageModel(covers, item_weights=rng.random(m) + 1e-3)
    if kind == "width":
        d = int(rng.integers(2, 5))
        return WidthModel(rng.standard_normal((A, d)), k_mc=64,
                          seed=int(rng.integers(2**31)))
    if kind == "concave_modular":
        phi = "sqrt" if rng.random() < 0.5 else "min1"
        w = rng.random(A) * (0.6 if phi == "min1" else 1.0)
        return ConcaveModularModel(w, phi)
    raise ValueError(f"unknown generator kind {kind!r}")


def context_coverage_family(A: int, count: int, rng: np.random.Generator,
                            n_items: int | None = None, dim: int = 3,
                            scale: float = 6.0, bias: float = -3.0,
                            density: float = 0.25) -> list:
    """``count`` coverage models sharing one cover matrix, differing in item weights.

    Element ``a`` always covers item ``a mod n_items`` plus random extras.
    Member ``j`` weights item ``i`` by ``logistic(scale <theta_ji, x> + bias)``
    with ``theta_ji`` uniform on the unit sphere.
    """
    n_items = A if n_items is None else n_items
    covers = rng.random((A, n_items)) < density
    covers[np.arange(A), np.arange(A) % n_items] = True
    family = []
    for _ in range(count):
        th = sphere_points(n_items, dim, rng) * scale
        family.append(CoverageModel(covers, item_thetas=th,
                                    item_bias=np.full(n_items, bias)))
    return family


def sphere_points(count: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((count, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def random_matroid(A: int, rng: np.random.Generator, max_rank: int = 3,
                   kind: str | None = None) -> Matroid:
    """A random uniform, partition or laminar matroid with ``1 <= rank <= max_rank``."""
    kinds = ("uniform", "partition", "laminar")
    if kind is None:
        kind = kinds[int(rng.integers(3))]
    if A == 1:
        kind = "uniform"
    top = min(max_rank, A)
    while True:
        if kind == "uniform":
            return Matroid.uniform(A, int(rng.integers(1, top + 1)))
        if kind == "partition":
            perm = [int(a) for a in rng.permutation(A)]
            used = perm[:int(rng.integers(max(1, A - 2), A + 1))]
            n_blocks = int(rng.integers(1, min(3, len(used)) + 1))
            cuts = sorted(rng.choice(np.arange(1, len(used)), n_blocks - 1, replace=False)) \
                if n_blocks > 1 else []
            blocks = np.split(np.array(used), cuts)
            caps = [int(rng.integers(1, len(b) + 1)) for b in blocks]
            m = Matroid.partition(A, [b.tolist() for b in blocks], caps)
        else:
            perm = [int(a) for a in rng.permutation(A)]
            sizes = sorted(set(int(s) for s in rng.integers(1, A, size=2)))
            family = [perm[:s] for s in sizes] + [perm]
            caps = sorted(int(c) for c in rng.integers(1, top + 1, size=len(family)))
            caps = [min(c, len(f)) for c, f in zip(caps, family)]
            m = Matroid.laminar(A, family, caps)
        if 1 <= m.rank <= top:
            return m


def value_table(u: Callable, A: int, ctx=None) -> np.ndarray:
    """``u`` on every subset, indexed by bitmask."""
    vals = np.empty(1 << A)
    for mask in range(1 << A):
        vals[mask] = u(frozenset(a for a in range(A) if mask >> a & 1), ctx)
    return vals


def submodularity_violations(u: Callable, A: int, ctx=None, tol: float = 1e-12) -> dict:
    """Count monotonicity and diminishing-returns violations over all triples."""
    vals = value_table(u, A, ctx)
    mono = sub = 0
    worst = 0.0
    for mask in range(1 << A):
        for a in range(A):
            if mask >> a & 1:
                continue
            ma = mask | 1 << a
            if vals[ma] < vals[mask] - tol:
                mono += 1
            gain = vals[ma] - vals[mask]
            for b in range(A):
                if b == a or mask >> b & 1:
                    continue
                mb = mask | 1 << b
                later = vals[mb | 1 << a] - vals[mb]
                if gain < later - tol:
                    sub += 1
                    worst = max(worst, later - gain)
    return {"monotone": mono, "submodular": sub, "worst": worst}


def check_matroid_axioms(m: Matroid) -> bool:
    """Downward closure, exchange axiom and equal base sizes, by enumeration."""
    A = m.ground_size
    indep = {frozenset(c) for r in range(A + 1) for c in combinations(range(A), r)
             if m.is_independent(c)}
    for I in indep:
        for a in I:
            if I - {a} not in indep:
                return False
    for I in indep:
        for J in indep:
            if len(I) < len(J) and not any(I | {b} in indep for b in J - I):
                return False
    sizes = {len(I) for I in indep if not any(I | {a} in indep for a in range(A) if a not in I)}
    return sizes == {m.rank}


# -- exhaustive oracles ----------------------------------------------------------

def exhaustive_max(u: Callable, m: Matroid, ctx=None,
                   budget: int = DEFAULT_ENUMERATION_BUDGET) -> tuple:
    """True maximum of ``u`` over all independent sets (ties: first found)."""
    best, best_val = frozenset(), -np.inf
    for S in m.enumerate_independent(budget=budget):
        v = float(u(S, ctx))
        if v > best_val:
            best, best_val = S, v
    return best, best_val


def find_exchange_bijection(m: Matroid, S, T) -> dict | None:
    """Map ``t -> s`` from ``T - S`` onto ``S - T`` with ``S - s + t`` independent.

    Exhaustive over matchings; the first one in lexicographic order of
    ``S - T`` assignments is returned. ``None`` means no bijection exists,
    which for a valid matroid indicates a bug.
    """
    S, T = frozenset(S), frozenset(T)
    if not (m.is_base(S) and m.is_base(T)):
        raise PreconditionError("exchange bijection needs two bases")
    t_side = sorted(T - S)
    s_side = sorted(S - T)
    for perm in permutations(s_side):
        if all(m.is_independent((S - {s}) | {t}) for t, s in zip(t_side, perm)):
            return dict(zip(t_side, perm))
    return None


# -- lemma verification --------------------------------------------------------------

def _memo(u, ctx=None):
    cache = {}

    def f(S):
        v = cache.get(S)
        if v is None:
            v = cache[S] = float(u(S, ctx))
        return v
    return f


def _min_joint_slack(cands: list, opt_sum: float, n: int, eps: float, ratio: float,
                     k_eps: float) -> tuple:
    """Minimize the lemma slack over tuples with total local gap <= n * eps.

    ``cands[j]`` lists ``(gap, value)`` for the candidate sets of instance j,
    each with ``gap <= n * eps``. Returns ``(min_slack, tuples_checked)``.
    """
    budget = n * eps + 1e-12
    order = [sorted(c) for c in cands]
    min_gap_rest = [0.0] * (len(order) + 1)
    for j in range(len(order) - 1, -1, -1):
        min_gap_rest[j] = min_gap_rest[j + 1] + order[j][0][0]
    rhs = ratio * (opt_sum - k_eps)
    best = [np.inf, 0]

    def dfs(j, gap_sum, val_sum):
        if j == len(order):
            best[1] += 1
            best[0] = min(best[0], val_sum - rhs)
            return
        for gap, val in order[j]:
            if gap_sum + gap + min_gap_rest[j + 1] > budget:
                break
            dfs(j + 1, gap_sum + gap, val_sum + val)

    dfs(0, 0.0, 0.0)
    return best[0], best[1]


def verify_lemma1(instances: Sequence[tuple], eps: float) -> tuple:
    """Check the 1/2 guarantee for every joint eps-local optimum.

    ``instances`` is a sequence of ``(u_j, m_j)``; every ``m_j`` must have the
    same rank ``k``. Candidates ``S_j`` are the rank-``k`` independent sets;
    the swap gap is ``max_{T in I_j(S_j)} u_j(T) - u_j(S_j)``. Returns
    ``(min_slack, checks)``; the slack also includes the left inequality.
    """
    n = len(instances)
    k = instances[0][1].rank
    cands, opt_sum = [], 0.0
    for u, m in instances:
        f = _memo(u)
        bases = m.enumerate_bases()
        opt_sum += max(f(S) for S in m.enumerate_independent(max_size=k))
        c = []
        for S in bases:
            best_nb = max(f(T) for T in m.swap_neighborhood(S).members)
            gap = best_nb - f(S)
            if gap <= n * eps + 1e-12:
                c.append((gap, f(S)))
        cands.append(c)
    slack, checks = _min_joint_slack(cands, opt_sum, n, eps, 0.5, n * k * eps)
    return slack, checks


def verify_lemma2(instances: Sequence[tuple], eps: float, table: WeightTable) -> tuple:
    """Check the ``1 - 1/e`` guarantee for joint eps-local optima of ``T u_j`` over bases."""
    n = len(instances)
    k = instances[0][1].rank
    cands, opt_sum = [], 0.0
    for u, m in instances:
        f = _memo(u)
        g = {}
        bases = m.enumerate_bases()
        for B in bases:
            g[B] = t_value(lambda T, _c: f(T), B, None, table, mode="exact")
        opt_sum += max(f(B) for B in bases)
        c = []
        for S in bases:
            gap = max(g[T] for T in m.base_neighborhood(S).members) - g[S]
            if gap <= n * eps + 1e-12:
                c.append((gap, f(S)))
        cands.append(c)
    return _min_joint_slack(cands, opt_sum, n, eps, C_1ME, n * k * eps)


def filmus_ward_slack(u: Callable, m: Matroid, S, T, table: WeightTable, ctx=None) -> float:
    """``u(S) - (1-1/e) u(T) - (1-1/e) sum_i [Tu(S) - Tu(S - s_i + t_i)]``."""
    S, T = frozenset(S), frozenset(T)
    pi = find_exchange_bijection(m, S, T)
    if pi is None:
        raise AssertionError(f"no exchange bijection between {sorted(S)} and {sorted(T)}")
    f = _memo(u, ctx)
    tv = lambda X: t_value(lambda Y, _c: f(Y), X, None, table, mode="exact")
    TS = tv(S)
    # elements of S & T pair with themselves and contribute zero
    gaps = sum(TS - tv((S - {s}) | {t}) for t, s in pi.items())
    return f(S) - C_1ME * f(T) - C_1ME * gaps


def verify_filmus_ward(u: Callable, m: Matroid, table: WeightTable, trials: int,
                       rng: np.random.Generator, ctx=None) -> tuple:
    bases = m.enumerate_bases()
    worst = np.inf
    for _ in range(trials):
        S = bases[int(rng.integers(len(bases)))]
        T = bases[int(rng.integers(len(bases)))]
        worst = min(worst, filmus_ward_slack(u, m, S, T, table, ctx))
    return worst, trials


# -- batteries ---------------------------------------------------------------------------

def _instance_sequence(rng, max_A=6, max_k=3, max_n=5):
    A = int(rng.integers(3, max_A + 1))
    m0 = random_matroid(A, rng, max_rank=max_k)
    k = m0.rank
    n = int(rng.integers(1, max_n + 1))
    seq = [(random_submodular(A, rng), m0)]
    while len(seq) < n:
        m = random_matroid(A, rng, max_rank=max_k)
        if m.rank == k:
            seq.append((random_submodular(A, rng), m))
    return seq


def _eps(rng):
    return 0.0 if rng.random() < 0.3 else float(rng.uniform(0.0, 0.02))


def lemma1_battery(instances: int = 1000, seed: int = 0) -> VerifyReport:
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst, checks = np.inf, 0
    for _ in range(instances):
        slack, c = verify_lemma1(_instance_sequence(rng), _eps(rng))
        worst, checks = min(worst, slack), checks + c
    return VerifyReport("lemma1", instances, checks, worst, time.perf_counter() - start)


def lemma2_battery(instances: int = 1000, seed: int = 1,
                   table: WeightTable | None = None) -> VerifyReport:
    rng = np.random.default_rng(seed)
    table = table or compute_weights(3)
    start = time.perf_counter()
    worst, checks = np.inf, 0
    for _ in range(instances):
        slack, c = verify_lemma2(_instance_sequence(rng), _eps(rng), table)
        worst, checks = min(worst, slack), checks + c
    return VerifyReport("lemma2", instances, checks, worst, time.perf_counter() - start,
                        notes={"convention": table.convention})


def filmus_ward_battery(instances: int = 1000, seed: int = 2, trials: int = 5,
                        table: WeightTable | None = None) -> VerifyReport:
    rng = np.random.default_rng(seed)
    table = table or compute_weights(3)
    start = time.perf_counter()
    worst, checks = np.inf, 0
    for _ in range(instances):
        A = int(rng.integers(3, 7))
        m = random_matroid(A, rng, max_rank=3)
        u = random_submodular(A, rng)
        slack, c = verify_filmus_ward(u, m, table, trials, rng)
        worst, checks = min(worst, slack), checks + c
    return VerifyReport("filmus_ward", instances, checks, worst, time.perf_counter() - start,
                        notes={"convention": table.convention})


def igw_battery(instances: int = 10_000, seed: int = 3) -> VerifyReport:
    """Per-round IGW inequality ``lhs <= 2K/gamma`` and greedy mass ``>= 1/2``."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst = np.inf
    greedy_ok = True
    for _ in range(instances):
        K = int(rng.integers(2, 51))
        gamma = float(10 ** rng.uniform(0, 4))
        y = rng.random(K)
        f = rng.random(K)
        p = igw_probabilities(y, gamma)
        worst = min(worst, 2 * K / gamma - igw_lemma_lhs(p, y, f, gamma))
        greedy_ok &= bool(p[int(np.argmax(y))] >= 0.5)
    rep = VerifyReport("igw", instances, instances, worst, time.perf_counter() - start,
                       notes={"greedy_mass_ok": greedy_ok})
    if not greedy_ok:
        rep.min_slack = -np.inf
    return rep


def weights_battery(k_max: int = 20) -> VerifyReport:
    """``tau(s) <= e/(e-1) H_s`` and ``w[1][1] = 1``."""
    from .t_operator import tau_bound
    start = time.perf_counter()
    table = compute_weights(k_max)
    slack = min(tau_bound(s) - table.tau[s] for s in range(1, k_max + 1))
    slack = min(slack, 1e-10 - abs(table.w[1, 1] - 1.0))
    return VerifyReport("weights", k_max, k_max + 1, float(slack), time.perf_counter() - start)


def width_battery(instances: int = 50, seed: int = 4) -> VerifyReport:
    """Shared-noise width estimates: exhaustive monotone-submodular check."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    bad = 0
    checks = 0
    worst = 0.0
    for _ in range(instances):
        A = int(rng.integers(2, 7))
        u = random_submodular(A, rng, "width")
        v = submodularity_violations(u, A, tol=1e-12)
        bad += v["monotone"] + v["submodular"]
        worst = max(worst, v["worst"])
        checks += (1 << A) * A * A
    return VerifyReport("width", instances, checks, -worst if bad else 0.0,
                        time.perf_counter() - start, tol=0.0, notes={"violations": bad})


def exchange_battery(instances: int = 200, seed: int = 5) -> VerifyReport:
    """Matroid axioms hold and exchange bijections exist for all base pairs."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    failures = 0
    checks = 0
    for _ in range(instances):
        m = random_matroid(int(rng.integers(2, 8)), rng, max_rank=4)
        if not check_matroid_axioms(m):
            failures += 1
        bases = m.enumerate_bases()
        for S in bases:
            for T in bases:
                checks += 1
                if find_exchange_bijection(m, S, T) is None:
                    failures += 1
    return VerifyReport("exchange", instances, checks, -float(failures),
                        time.perf_counter() - start, tol=0.0)


BATTERIES = {
    "igw": igw_battery,
    "weights": weights_battery,
    "lemma1": lemma1_battery,
    "lemma2": lemma2_battery,
    "filmus_ward": filmus_ward_battery,
    "width": width_battery,
    "exchange": exchange_battery,
}
