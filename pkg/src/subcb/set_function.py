"""Nonnegative monotone submodular utility models ``u(S, x)``.

Every model returns values normalized into ``[0, 1]``: the raw utility is
divided by the model's declared ``u_max``. Contexts are passed as
:class:`Context` objects (or ``None`` for context-free models); the
context ``id`` lets callers memoize evaluations over a finite context set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError


@dataclass(frozen=True, eq=False)
class Context:
    x: np.ndarray
    id: int | None = None

    @property
    def dim(self) -> int:
        return int(self.x.shape[0])


def as_context(x, id=None) -> Context | None:
    if x is None or isinstance(x, Context):
        return x
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise DomainError("context must be a finite 1-d vector")
    return Context(arr, id)


# -- link functions ----------------------------------------------------

def logistic(a):
    return 1.0 / (1.0 + math.exp(-a)) if a >= 0 else math.exp(a) / (1.0 + math.exp(a))


def clipped_linear(a):
    return min(max(a, 0.0), 1.0)


def relu(a):
    return a if a > 0.0 else 0.0


def relu_grad(a):
    return 1.0 if a > 0.0 else 0.0


LINKS = {"logistic": logistic, "clipped_linear": clipped_linear, "relu": relu}


def get_link(name: str) -> Callable[[float], float]:
    try:
        return LINKS[name]
    except KeyError:
        raise DomainError(f"unknown link {name!r}; choose from {sorted(LINKS)}") from None


# -- base class ---------------------------------------------------------

class SetFunctionModel:
    """Base class: ``value(S, ctx) = raw(S, ctx) / u_max``.

    Subclasses implement :meth:`raw` and set ``u_max``. ``exact`` is False
    for Monte Carlo estimates.
    """

    u_max: float = 1.0
    exact: bool = True
    context_free: bool = True

    def raw(self, S: frozenset, ctx: Context | None) -> float:
        raise NotImplementedError

    def value(self, S: Iterable[int], ctx: Context | None = None) -> float:
        if not isinstance(S, frozenset):
            S = frozenset(S)
        return self.raw(S, ctx) / self.u_max

    __call__ = value


def modular_value(weights, S: Iterable[int]) -> float:
    return float(sum(weights[a] for a in S))


class ModularModel(SetFunctionModel):
    """Additive utility ``sum_{a in S} w_a`` with nonnegative weights."""

    def __init__(self, weights: Sequence[float], u_max: float | None = None):
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0):
            raise DomainError("modular weights must be nonnegative")
        self.weights = w
        self.u_max = float(u_max) if u_max is not None else max(float(w.sum()), 1e-300)

    def raw(self, S, ctx):
        return modular_value(self.weights, S)


class ConcaveModularModel(SetFunctionModel):
    """``phi(sum_{a in S} w_a)`` for a concave nondecreasing ``phi``."""

    PHIS = {"sqrt": math.sqrt, "min1": lambda z: min(z, 1.0)}

    def __init__(self, weights: Sequence[float], phi: str = "sqrt"):
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0):
            raise DomainError("weights must be nonnegative")
        if phi not in self.PHIS:
            raise DomainError(f"unknown concave transform {phi!r}")
        self.weights = w
        self.phi_name = phi
        self._phi = self.PHIS[phi]
        self.u_max = max(self._phi(float(w.sum())), 1e-300)

    def raw(self, S, ctx):
        return self._phi(modular_value(self.weights, S))


class CoverageModel(SetFunctionModel):
    """Weighted coverage: total weight of items covered by ``S``.

    Item weights are constant (``item_weights``) or context dependent,
    ``item_weights[i] * logistic(<theta_i, x> + bias_i)`` with one row of
    ``item_thetas`` per item.
    """

    def __init__(self, covers, item_weights=None, item_thetas=None, item_bias=None):
        cov = np.asarray(covers, dtype=bool)
        if cov.ndim != 2:
            raise DomainError("covers must be an (A, items) boolean matrix")
        self.covers = cov
        n_items = cov.shape[1]
        if item_thetas is not None:
            self.item_thetas = np.asarray(item_thetas, dtype=float)
            if self.item_thetas.shape[0] != n_items:
                raise DomainError("item_thetas needs one row per item")
            self.context_free = False
        else:
            self.item_thetas = None
        self.item_bias = np.zeros(n_items) if item_bias is None else np.asarray(item_bias, float)
        scale = np.ones(n_items) if item_weights is None else np.asarray(item_weights, float)
        if scale.shape != (n_items,) or np.any(scale < 0):
            raise DomainError("item_weights must be nonnegative, one per item")
        self.item_weights = scale
        self.u_max = max(float(scale.sum()), 1e-300)

    def weights_at(self, ctx: Context | None) -> np.ndarray:
        if self.item_thetas is None:
            return self.item_weights
        z = self.item_thetas @ ctx.x + self.item_bias
        return self.item_weights / (1.0 + np.exp(-z))

    def raw(self, S, ctx):
        if not S:
            return 0.0
        covered = self.covers[sorted(S)].any(axis=0)
        return float(self.weights_at(ctx)[covered].sum())


class WidthModel(SetFunctionModel):
    """Monte Carlo Gaussian width over a fixed panel of noise draws.

    The estimate is ``(1/k_mc) sum_j max_{s in S} <s, Sigma eta_j>`` with the
    ``eta_j`` drawn once at construction, so the estimated function itself
    is a fixed set function.

    With ``baseline=True`` (default) the origin is an implicit member of
    every set, i.e. each draw contributes ``max(0, max_s <s, Sigma eta_j>)``.
    That makes every realization exactly nonnegative, monotone and
    submodular over all of ``2^[A]`` with ``value(empty) = 0``. With
    ``baseline=False`` the plain estimator is used and the final value is
    clamped at 0; its expectation is the Gaussian width itself, but it is
    only submodular on nonempty sets.
    """

    exact = False

    def __init__(self, vectors, k_mc: int = 400, seed: int = 0, sigma=None,
                 baseline: bool = True, noise=None, u_max: float | None = None):
        V = np.asarray(vectors, dtype=float)
        if V.ndim != 2:
            raise DomainError("width vectors must be an (A, d) matrix")
        self.vectors = V
        d = V.shape[1]
        if noise is None:
            if k_mc < 1:
                raise DomainError("k_mc must be positive")
            noise = np.random.default_rng(seed).standard_normal((k_mc, d))
        self.noise = np.asarray(noise, dtype=float)
        self.k_mc = self.noise.shape[0]
        self.seed = seed
        self.sigma = None if sigma is None else np.asarray(sigma, dtype=float)
        directions = self.noise if self.sigma is None else self.noise @ self.sigma.T
        # projections[a, j] = <s_a, Sigma eta_j>
        self.projections = V @ directions.T
        self.baseline = baseline
        if u_max is None:
            u_max = self._estimate(frozenset(range(V.shape[0])))
        self.u_max = max(float(u_max), 1e-300)

    def _estimate(self, S: frozenset) -> float:
        if not S:
            return 0.0
        m = self.projections[sorted(S)].max(axis=0)
        if self.baseline:
            m = np.maximum(m, 0.0)
        return max(float(m.mean()), 0.0)

    def raw(self, S, ctx):
        for a in S:
            if not 0 <= a < self.vectors.shape[0]:
                raise DomainError(f"no vector for element {a}")
        return self._estimate(S)


def width_value(model: WidthModel, S: Iterable[int]) -> float:
    """Unnormalized width estimate of ``S`` (0 for the empty set)."""
    return model.raw(frozenset(S), None)


def width_error_bound(diam: float, k_mc: int, delta: float) -> float:
    """Deviation bound ``diam * sqrt(2 log(2/delta) / k_mc)``."""
    return diam * math.sqrt(2.0 * math.log(2.0 / delta) / k_mc)


class RestrictedModel(SetFunctionModel):
    """``v(S & C)`` for a fixed category ``C``."""

    def __init__(self, base: SetFunctionModel, subset: Iterable[int]):
        self.base = base
        self.subset = frozenset(subset)
        self.u_max = 1.0
        self.exact = base.exact
        self.context_free = base.context_free

    def raw(self, S, ctx):
        return self.base.value(S & self.subset, ctx)


class GlmModel(SetFunctionModel):
    """``v(S, x) * link(<theta, x>)`` with ``||theta|| <= 1``."""

    context_free = False

    def __init__(self, base: SetFunctionModel, theta, link: str = "logistic"):
        theta = np.asarray(theta, dtype=float)
        if np.linalg.norm(theta) > 1.0 + 1e-12:
            raise DomainError(f"||theta|| = {np.linalg.norm(theta):.6g} exceeds 1")
        self.base = base
        self.theta = theta
        self.link_name = link
        self.link = get_link(link)
        self.exact = base.exact
        self.u_max = 1.0

    def raw(self, S, ctx):
        return self.base.value(S, ctx) * self.link(float(self.theta @ ctx.x))


def glm_value(v: SetFunctionModel, theta, link, S, ctx) -> float:
    return GlmModel(v, theta, link).value(S, as_context(ctx))


class SumGlmModel(SetFunctionModel):
    """``sum_i v_i(S, x) * link(theta^T P_i x)``.

    ``u_max`` defaults to 1; with disjoint block-selector ``P_i`` and ``||x|| <= 1`` the
    ReLU sum stays in ``[0, 1]`` by Cauchy-Schwarz.
    """

    context_free = False

    def __init__(self, bases: Sequence[SetFunctionModel], P, theta, link: str = "relu",
                 u_max: float = 1.0):
        theta = np.asarray(theta, dtype=float)
        if np.linalg.norm(theta) > 1.0 + 1e-12:
            raise DomainError(f"||theta|| = {np.linalg.norm(theta):.6g} exceeds 1")
        P = np.asarray(P, dtype=float)
        if P.ndim != 3 or P.shape[0] != len(bases):
            raise DomainError("P must stack one (d, d) matrix per base model")
        self.bases = list(bases)
        self.P = P
        self.theta = theta
        self.link_name = link
        self.link = get_link(link)
        self.exact = all(b.exact for b in bases)
        self.u_max = float(u_max)

    def raw(self, S, ctx):
        z = (self.P @ ctx.x) @ self.theta
        return float(sum(b.value(S, ctx) * self.link(zi) for b, zi in zip(self.bases, z)))


def block_selectors(dim: int, blocks: Sequence[Sequence[int]]) -> np.ndarray:
    """Diagonal 0/1 matrices selecting each coordinate block."""
    P = np.zeros((len(blocks), dim, dim))
    for i, blk in enumerate(blocks):
        for c in blk:
            P[i, c, c] = 1.0
    return P


class RankingModel(SetFunctionModel):
    """Position-weighted engagement utility over placements ``[A] x [A]``.

    Element ``i * A + j`` places item ``j`` at position ``i``. With
    ``T_i`` the items placed at positions ``<= i``, the utility is
    ``sum_i lambda_i(x) f_i(T_i, x)``, normalized by ``sum_i lambda_max_i``.

    ``lambdas`` is either a fixed nonnegative vector or a callable
    ``ctx -> vector``; in the latter case ``lambda_max`` must be given.
    """

    def __init__(self, n_items: int, f: Sequence[SetFunctionModel], lambdas,
                 lambda_max=None):
        self.n_items = int(n_items)
        if len(f) != self.n_items:
            raise DomainError("need one item utility f_i per position")
        self.f = list(f)
        if callable(lambdas):
            if lambda_max is None:
                raise DomainError("lambda_max is required with context-dependent lambdas")
            self._lambdas = lambdas
            self.context_free = False
            lam_max = np.asarray(lambda_max, dtype=float)
        else:
            lam = np.asarray(lambdas, dtype=float)
            if lam.shape != (self.n_items,) or np.any(lam < 0):
                raise DomainError("lambdas must be nonnegative, one per position")
            self._lambdas = lambda ctx: lam
            lam_max = lam if lambda_max is None else np.asarray(lambda_max, dtype=float)
            self.context_free = all(fi.context_free for fi in f)
        self.exact = all(fi.exact for fi in f)
        self.u_max = max(float(lam_max.sum()), 1e-300)

    def prefixes(self, S: Iterable[int]) -> list:
        """``T_i`` for each position ``i`` (0-based)."""
        A = self.n_items
        by_pos = [set() for _ in range(A)]
        for e in S:
            i, j = divmod(int(e), A)
            by_pos[i].add(j)
        out, acc = [], set()
        for i in range(A):
            acc |= by_pos[i]
            out.append(frozenset(acc))
        return out

    def raw(self, S, ctx):
        lam = self._lambdas(ctx)
        return float(sum(l * fi.value(T, ctx)
                         for l, fi, T in zip(lam, self.f, self.prefixes(S)) if l))


def ranking_value(model: RankingModel, S, ctx=None) -> float:
    return model.value(frozenset(S), ctx)
