"""Simulation environment, the two bandit algorithms, baselines and regret accounting."""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import CapacityError, ConfigError, DomainError
from .igw import igw_probabilities
from .local_search import local_optimum, neighborhood_scores
from .matroid import DEFAULT_ENUMERATION_BUDGET, Matroid
from .oracle import RegressionOracle
from .set_function import Context, SetFunctionModel
from .t_operator import EXACT_MAX_SIZE, WeightTable, compute_weights, sample_subset, t_value

C_HALF = 0.5
C_1ME = 1.0 - math.exp(-1.0)
STREAM_ROLES = ("contexts", "matroids", "rewards", "algorithm", "oracle")

log = logging.getLogger("subcb")


def make_streams(seed: int) -> dict:
    """One independent generator per role, keyed on ``(seed, role index)``."""
    return {role: np.random.default_rng(np.random.SeedSequence([int(seed), i]))
            for i, role in enumerate(STREAM_ROLES)}


# -- context and matroid sources ------------------------------------------

class FixedContexts:
    """Draw from a fixed list, i.i.d. uniformly or cycling in order."""

    def __init__(self, vectors, order: str = "iid"):
        V = np.asarray(vectors, dtype=float)
        if V.ndim != 2 or len(V) == 0:
            raise DomainError("context list must be a nonempty (n, d) matrix")
        if order not in ("iid", "cycle"):
            raise DomainError(f"unknown context order {order!r}")
        self.contexts = [Context(v, i) for i, v in enumerate(V)]
        self.order = order
        self.dim = V.shape[1]

    def next(self, t: int, rng, history=None) -> Context:
        if self.order == "cycle":
            return self.contexts[t % len(self.contexts)]
        return self.contexts[int(rng.integers(len(self.contexts)))]


class BallContexts:
    """I.i.d. contexts uniform in the unit ball (``sphere=True``: on the sphere).

    Both laws are symmetric, ``x`` and ``-x`` equally likely.
    """

    def __init__(self, dim: int, sphere: bool = False):
        self.dim = int(dim)
        self.sphere = sphere

    def next(self, t, rng, history=None) -> Context:
        z = rng.standard_normal(self.dim)
        z /= max(np.linalg.norm(z), 1e-300)
        if not self.sphere:
            z *= rng.random() ** (1.0 / self.dim)
        return Context(z, None)


class ScriptedContexts:
    """Adversarial script: ``fn(t, history) -> vector or Context``."""

    def __init__(self, fn: Callable):
        self.fn = fn

    def next(self, t, rng, history=None) -> Context:
        out = self.fn(t, history)
        return out if isinstance(out, Context) else Context(np.asarray(out, float), None)


class MatroidSchedule:
    """Matroid per round from a list: fixed (one entry), cycled, i.i.d. or scripted."""

    def __init__(self, matroids: Sequence[Matroid], order: str = "cycle",
                 script: Callable | None = None):
        if not matroids:
            raise ConfigError("matroid schedule is empty")
        if order not in ("cycle", "iid", "script"):
            raise ConfigError(f"unknown matroid order {order!r}")
        self.matroids = list(matroids)
        self.order = order
        self.script = script

    def next(self, t: int, rng, history=None) -> tuple:
        if self.order == "script":
            i = int(self.script(t, history))
        elif self.order == "iid" and len(self.matroids) > 1:
            i = int(rng.integers(len(self.matroids)))
        else:
            i = t % len(self.matroids)
        return i, self.matroids[i]


# -- benchmark ---------------------------------------------------------------

def lazy_greedy(u: Callable, m: Matroid) -> frozenset:
    """Marginal-gain greedy over the matroid with lazily refreshed gains."""
    S = frozenset()
    base = u(S)
    heap = [(-(u(frozenset([a])) - base), a) for a in m.ground]
    heapq.heapify(heap)
    current = base
    while heap and len(S) < m.rank:
        neg_gain, a = heapq.heappop(heap)
        if not m._independent(S | {a}):
            continue
        fresh = u(S | {a}) - current
        if heap and fresh < -heap[0][0] - 1e-15:
            heapq.heappush(heap, (-fresh, a))
            continue
        S = S | {a}
        current += fresh
    return S


def benchmark_value(u: Callable, m: Matroid, ctx=None,
                    budget: int = DEFAULT_ENUMERATION_BUDGET) -> tuple:
    """``(max_{S in I} u(S, ctx), method)``; exact within budget, greedy otherwise."""
    f = lambda S: u(S, ctx)
    try:
        bases = m.enumerate_bases(budget)
    except CapacityError:
        return float(f(lazy_greedy(f, m))), "greedy-(1-1/e)"
    return max(float(f(B)) for B in bases), "exact"


# -- environment --------------------------------------------------------------

class Environment:
    """True model, context source, matroid schedule and reward law.

    Rewards are Bernoulli(u*) or ``clip(u* + noise_sd * N(0,1), 0, 1)``.
    Mean rewards and benchmarks are memoized for contexts carrying an id.
    """

    def __init__(self, model: SetFunctionModel, contexts, matroids: MatroidSchedule,
                 reward: str = "bernoulli", noise_sd: float = 0.1,
                 budget: int = DEFAULT_ENUMERATION_BUDGET):
        if reward not in ("bernoulli", "gaussian"):
            raise ConfigError(f"unknown reward law {reward!r}")
        self.model = model
        self.contexts = contexts
        self.matroids = matroids
        self.reward = reward
        self.noise_sd = float(noise_sd)
        self.budget = budget
        self._mean_cache = {}
        self._bench_cache = {}
        self._warned = False

    def observe(self, t: int, streams: dict, history=None) -> tuple:
        ctx = self.contexts.next(t, streams["contexts"], history)
        mid, m = self.matroids.next(t, streams["matroids"], history)
        return ctx, mid, m

    def mean(self, S: frozenset, ctx: Context) -> float:
        if ctx is not None and ctx.id is not None:
            key = (ctx.id, S)
            hit = self._mean_cache.get(key)
            if hit is None:
                hit = self._mean_cache[key] = float(self.model.value(S, ctx))
            return hit
        return float(self.model.value(S, ctx))

    def draw_reward(self, S: frozenset, ctx: Context, rng) -> float:
        mu = self.mean(S, ctx)
        if self.reward == "bernoulli":
            return float(rng.random() < mu)
        return float(min(max(mu + self.noise_sd * rng.standard_normal(), 0.0), 1.0))

    def benchmark(self, ctx: Context, mid: int, m: Matroid) -> tuple:
        key = None if ctx is None or ctx.id is None else (ctx.id, mid)
        if key is not None and key in self._bench_cache:
            return self._bench_cache[key]
        out = benchmark_value(self.mean, m, ctx, self.budget)
        if out[1] != "exact" and not self._warned:
            log.warning("matroid %d exceeds the enumeration budget %d; benchmark falls "
                        "back to lazy greedy", mid, self.budget)
            self._warned = True
        if key is not None:
            self._bench_cache[key] = out
        return out


# -- schedules -------------------------------------------------------------------

@dataclass
class Schedules:
    """Exploration parameters.

    ``gamma = c_gamma sqrt(n k (A - k) / reg_sq)``;
    ``rho = clip(c_rho n^(-1/3) (2 (1 - 1/e) k B tau(k))^(2/3)
    (4 reg_sq + 32 ln(2/delta))^(1/3), rho_min, 1/2 - 1e-6)`` with
    ``B = k (A - k) + 1``.
    """

    c_gamma: float = 1.0
    c_rho: float = 1.0
    mu: float = 1.0
    delta: float = 0.05
    reg_sq: float | None = None
    rho_min: float = 0.01

    def gamma(self, n: int, A: int, k: int, reg_sq: float) -> float:
        return self.c_gamma * math.sqrt(n * max(k * (A - k), 1) / reg_sq)

    def rho(self, n: int, A: int, k: int, reg_sq: float, tau_k: float) -> float:
        B = k * (A - k) + 1
        raw = (self.c_rho * n ** (-1.0 / 3.0)
               * (2.0 * C_1ME * k * B * tau_k) ** (2.0 / 3.0)
               * (4.0 * reg_sq + 32.0 * math.log(2.0 / self.delta)) ** (1.0 / 3.0))
        return min(max(raw, self.rho_min), 0.5 - 1e-6)


# -- records -------------------------------------------------------------------------

@dataclass
class RoundRecord:
    t: int
    context_id: int
    matroid_id: int
    benchmark: float
    benchmark_method: str
    local_opt: frozenset
    chosen: frozenset
    reward: float
    mean_reward: float
    pred: float
    inst_regret_half: float
    inst_regret_1me: float
    cum_regret_half: float
    cum_regret_1me: float
    converged: bool = True
    explored: bool = False


class _Recorder:
    def __init__(self):
        self.records = []
        self.cum_half = 0.0
        self.cum_1me = 0.0

    def log(self, t, ctx, mid, bench, method, local_opt, chosen, r, mean, pred,
            converged=True, explored=False):
        ih = C_HALF * bench - mean
        i1 = C_1ME * bench - mean
        self.cum_half += ih
        self.cum_1me += i1
        cid = ctx.id if ctx is not None and ctx.id is not None else t
        rec = RoundRecord(t, cid, mid, bench, method, local_opt, chosen, r, mean, pred,
                          ih, i1, self.cum_half, self.cum_1me, converged, explored)
        self.records.append(rec)
        return rec


def _check_rank(m: Matroid, k: int, t: int):
    if m.rank != k:
        raise ConfigError(f"round {t}: matroid rank {m.rank} differs from k = {k}")


def _assert_feasible(m: Matroid, S: frozenset, t: int):
    if not m.is_independent(S):
        raise AssertionError(f"round {t}: played set {sorted(S)} is not independent")


def _clamped(oracle: RegressionOracle, ctx):
    def score(S, _ctx=None):
        z = oracle.predict(S, ctx)
        return 0.0 if z < 0.0 else (1.0 if z > 1.0 else z)
    return score


# -- algorithms --------------------------------------------------------------------------

def run_squarecb(env: Environment, oracle: RegressionOracle, sched: Schedules, n: int,
                 k: int, seed: int = 0, reg_sq: float = 1.0, streams: dict | None = None,
                 ls_tol: float = 1e-9, max_iters: int = 1000) -> list:
    """Local optimum of the oracle's estimate, IGW over its swap neighborhood."""
    streams = streams or make_streams(seed)
    rng = streams["algorithm"]
    rec = _Recorder()
    gamma = None
    for t in range(n):
        ctx, mid, m = env.observe(t, streams, rec.records)
        _check_rank(m, k, t)
        if gamma is None:
            gamma = sched.gamma(n, m.ground_size, k, reg_sq)
        score = _clamped(oracle, ctx)
        res = local_optimum(score, m, "swap", tol=ls_tol, max_iters=max_iters)
        nb = m.swap_neighborhood(res.set)
        sa = neighborhood_scores(score, nb, gamma, sched.mu)
        p = igw_probabilities(sa.scores, gamma, sched.mu)
        idx = 0 if len(p) == 1 else int(rng.choice(len(p), p=p))
        S = nb.members[idx]
        _assert_feasible(m, S, t)
        pred = float(sa.scores[idx])
        r = env.draw_reward(S, ctx, streams["rewards"])
        oracle.update(S, ctx, r)
        bench, method = env.benchmark(ctx, mid, m)
        rec.log(t, ctx, mid, bench, method, res.set, S, r, env.mean(S, ctx), pred,
                res.converged)
    return rec.records


def run_epsgreedy(env: Environment, oracle: RegressionOracle, sched: Schedules, n: int,
                  k: int, table: WeightTable | None = None, seed: int = 0,
                  reg_sq: float = 1.0, streams: dict | None = None,
                  ls_tol: float = 1e-9, max_iters: int = 1000, mc_draws: int = 2000) -> list:
    """Local optimum of ``T u_hat`` over bases; explore via ``D_{S'}`` with probability rho."""
    streams = streams or make_streams(seed)
    rng = streams["algorithm"]
    table = table or compute_weights(max(k, 1))
    rec = _Recorder()
    rho = None
    for t in range(n):
        ctx, mid, m = env.observe(t, streams, rec.records)
        _check_rank(m, k, t)
        if rho is None:
            rho = sched.rho(n, m.ground_size, k, reg_sq, float(table.tau[k]) if k else 0.0)
        score = _clamped(oracle, ctx)
        if k <= EXACT_MAX_SIZE:
            potential = lambda S: t_value(score, S, ctx, table, mode="exact")
        else:
            potential = lambda S: t_value(score, S, ctx, table, mode="mc", draws=mc_draws,
                                          rng=rng)[0]
        res = local_optimum(potential, m, "base", tol=ls_tol, max_iters=max_iters)
        S_hat = res.set
        explored = k > 0 and rng.random() < rho
        if not explored:
            S = S_hat
        else:
            nb = m.base_neighborhood(S_hat)
            S_prime = nb.members[int(rng.integers(len(nb)))]
            S = sample_subset(table.distribution(S_prime), rng)
        _assert_feasible(m, S, t)
        pred = score(S)
        r = env.draw_reward(S, ctx, streams["rewards"])
        oracle.update(S, ctx, r)
        bench, method = env.benchmark(ctx, mid, m)
        rec.log(t, ctx, mid, bench, method, S_hat, S, r, env.mean(S, ctx), pred,
                res.converged, explored)
    return rec.records


def run_uniform(env: Environment, n: int, k: int, seed: int = 0,
                streams: dict | None = None) -> list:
    """Baseline: a uniformly random base every round.

    Beyond the enumeration budget a random-order greedy base is used instead
    (not exactly uniform).
    """
    streams = streams or make_streams(seed)
    rng = streams["algorithm"]
    rec = _Recorder()
    bases_cache = {}
    for t in range(n):
        ctx, mid, m = env.observe(t, streams, rec.records)
        _check_rank(m, k, t)
        if mid not in bases_cache:
            try:
                bases_cache[mid] = m.enumerate_bases(env.budget)
            except CapacityError:
                bases_cache[mid] = None
        bases = bases_cache[mid]
        if bases is not None:
            S = bases[int(rng.integers(len(bases)))]
        else:
            S = frozenset()
            for a in rng.permutation(m.ground_size):
                if m._independent(S | {int(a)}):
                    S = S | {int(a)}
        _assert_feasible(m, S, t)
        r = env.draw_reward(S, ctx, streams["rewards"])
        bench, method = env.benchmark(ctx, mid, m)
        rec.log(t, ctx, mid, bench, method, S, S, r, env.mean(S, ctx), float("nan"))
    return rec.records


def run_truth_baseline(env: Environment, n: int, k: int, seed: int = 0,
                       streams: dict | None = None, ls_tol: float = 1e-9) -> list:
    """Baseline: play the swap-local optimum of the true model, no exploration."""
    streams = streams or make_streams(seed)
    rec = _Recorder()
    for t in range(n):
        ctx, mid, m = env.observe(t, streams, rec.records)
        _check_rank(m, k, t)
        score = lambda S: env.mean(S, ctx)
        res = local_optimum(score, m, "swap", tol=ls_tol)
        S = res.set
        _assert_feasible(m, S, t)
        r = env.draw_reward(S, ctx, streams["rewards"])
        bench, method = env.benchmark(ctx, mid, m)
        mean = env.mean(S, ctx)
        rec.log(t, ctx, mid, bench, method, S, S, r, mean, mean, res.converged)
    return rec.records


# -- reporting ---------------------------------------------------------------------------------

@dataclass
class RegretSummary:
    c: float
    total: float
    curve: np.ndarray = field(repr=False)
    slope: float
    avg_reward: float
    avg_benchmark: float


def loglog_slope(curve: np.ndarray, floor: float = 1.0, start_frac: float = 0.01,
                 points: int = 50) -> float:
    """Least-squares slope of ``log max(R_t, floor)`` against ``log t``.

    Fitted on a geometric grid of ``t`` from ``max(10, start_frac * n)`` to
    ``n``; regret that stays below ``floor`` has slope 0.
    """
    n = len(curve)
    if n < 3:
        return float("nan")
    lo = min(max(10, int(start_frac * n)), n // 2)
    ts = np.unique(np.geomspace(max(lo, 1), n, points).astype(int))
    y = np.log(np.maximum(curve[ts - 1], floor))
    x = np.log(ts)
    return float(np.polyfit(x, y, 1)[0])


def regret_report(records: Sequence[RoundRecord], c: float = C_HALF) -> RegretSummary:
    bench = np.array([r.benchmark for r in records])
    mean = np.array([r.mean_reward for r in records])
    curve = np.cumsum(c * bench - mean)
    total = float(curve[-1]) if len(curve) else 0.0
    return RegretSummary(c, total, curve, loglog_slope(curve),
                         float(mean.mean()) if len(mean) else float("nan"),
                         float(bench.mean()) if len(bench) else float("nan"))


# -- oracle-only benchmark -------------------------------------------------------------

@dataclass
class OracleBenchResult:
    n: int
    cum_sq_error: float
    excess_loss: float
    min_eigenvalue: float | None = None


def run_oracle_bench(model: SetFunctionModel, oracle: RegressionOracle, contexts, A: int,
                     k: int, n: int, seed: int = 0, sizes: str = "exact",
                     reward: str = "bernoulli", noise_sd: float = 0.1) -> OracleBenchResult:
    """Feed ``n`` random ``(S, x, r)`` triples to an oracle and score it.

    ``S`` is a uniform ``k``-subset (``sizes="exact"``) or a uniform subset
    of uniform size ``1..k`` (``sizes="upto"``). Reports the cumulative
    estimation error ``sum (r_hat - u*(S, x))^2`` with ``r_hat`` taken before
    the update, and the excess square loss over the true model.
    """
    if sizes not in ("exact", "upto"):
        raise ConfigError(f"unknown set-size law {sizes!r}")
    streams = make_streams(seed)
    env = Environment(model, contexts, MatroidSchedule([_free(A)]), reward, noise_sd)
    rng = streams["algorithm"]
    err = excess = 0.0
    for t in range(n):
        ctx = contexts.next(t, streams["contexts"])
        size = k if sizes == "exact" else int(rng.integers(1, k + 1))
        S = frozenset(int(a) for a in rng.choice(A, size, replace=False))
        pred = oracle.predict(S, ctx)
        mu = env.mean(S, ctx)
        r = env.draw_reward(S, ctx, streams["rewards"])
        oracle.update(S, ctx, r)
        err += (pred - mu) ** 2
        excess += (pred - r) ** 2 - (mu - r) ** 2
    eig = oracle.signal_min_eigenvalue() if hasattr(oracle, "signal_min_eigenvalue") else None
    return OracleBenchResult(n, err, excess, eig)


def _free(A: int) -> Matroid:
    return Matroid.uniform(A, A)
