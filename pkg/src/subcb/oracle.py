"""Online regression oracles for set-valued actions.

All oracles share the ``predict(S, ctx)`` / ``update(S, ctx, r)`` interface.
Predictions are clamped to ``[0, 1]`` and do not change between updates.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError
from .set_function import Context, SetFunctionModel, get_link, relu

RENORM_EVERY = 64


class RegressionOracle:
    """Interface for online square-loss regression over ``(S, x)`` pairs."""

    def predict(self, S: frozenset, ctx: Context | None) -> float:
        raise NotImplementedError

    def update(self, S: frozenset, ctx: Context | None, r: float) -> None:
        raise NotImplementedError

    def as_model(self) -> Callable[[frozenset, Context | None], float]:
        return self.predict


def _clamp01(z: float) -> float:
    return 0.0 if z < 0.0 else (1.0 if z > 1.0 else z)


class FiniteClassOracle(RegressionOracle):
    """Exponentially weighted average over a finite list of models.

    The square loss on ``[0, 1]`` is 1/2-exp-concave, so with
    ``eta_agg = 1/2`` the mixture's cumulative loss exceeds the best expert's
    by at most ``2 ln |F|``.

    Expert values are memoized per ``(ctx.id, S)`` when the context carries
    an id, which keeps finite-context simulations cheap.
    """

    def __init__(self, experts: Sequence[SetFunctionModel], eta_agg: float = 0.5,
                 cache: bool = True):
        if not experts:
            raise ConfigError("finite-class oracle needs at least one expert")
        self.experts = list(experts)
        self.eta_agg = float(eta_agg)
        self.log_weights = np.zeros(len(self.experts))
        self._weights = np.full(len(self.experts), 1.0 / len(self.experts))
        self._cache = {} if cache else None
        self._n_updates = 0

    @property
    def weights(self) -> np.ndarray:
        return self._weights.copy()

    def expert_values(self, S: frozenset, ctx: Context | None) -> np.ndarray:
        key = None
        if self._cache is not None and (ctx is None or ctx.id is not None):
            key = (None if ctx is None else ctx.id, S)
            hit = self._cache.get(key)
            if hit is not None:
                return hit
        vals = np.array([e.value(S, ctx) for e in self.experts])
        if key is not None:
            self._cache[key] = vals
        return vals

    def predict(self, S, ctx):
        return _clamp01(float(self._weights @ self.expert_values(S, ctx)))

    def update(self, S, ctx, r):
        vals = self.expert_values(S, ctx)
        self.log_weights -= self.eta_agg * (vals - r) ** 2
        self._n_updates += 1
        if self._n_updates % RENORM_EVERY == 0:
            self.log_weights -= self.log_weights.max()
        w = np.exp(self.log_weights - self.log_weights.max())
        self._weights = w / w.sum()


class GlmOracle(RegressionOracle):
    """Projected modified-gradient learner for ``v(S, x) link(<theta, x>)``.

    ``theta`` starts at 0 and after each step is projected onto the unit
    ball. The step direction is ``v (v link(<theta, x>) - r) x``.
    """

    def __init__(self, base: SetFunctionModel, dim: int, eta: float,
                 link: str = "logistic"):
        self.base = base
        self.link_name = link
        self.link = get_link(link)
        self.eta = float(eta)
        self.theta = np.zeros(int(dim))

    def raw_predict(self, S, ctx) -> float:
        return self.base.value(S, ctx) * self.link(float(self.theta @ ctx.x))

    def predict(self, S, ctx):
        return _clamp01(self.raw_predict(S, ctx))

    def gradient(self, S, ctx, r) -> np.ndarray:
        v = self.base.value(S, ctx)
        return v * (v * self.link(float(self.theta @ ctx.x)) - r) * ctx.x

    def update(self, S, ctx, r):
        self.theta = project_unit_ball(self.theta - self.eta * self.gradient(S, ctx, r))


class MultiGlmOracle(RegressionOracle):
    """Projected learner for ``sum_i v_i(S, x) relu(theta^T P_i x)``.

    Step direction ``(sum_i v_i relu(theta^T P_i x) - r) (sum_j v_j P_j) x``.
    Also accumulates ``(1/n) sum_t M_t M_t^T`` with ``M_t = sum_i v_i P_i x_t``
    so the signal-strength condition can be monitored.
    """

    def __init__(self, bases: Sequence[SetFunctionModel], P, eta: float):
        P = np.asarray(P, dtype=float)
        if P.ndim != 3 or P.shape[0] != len(bases):
            raise ConfigError("multiglm needs one (d, d) matrix per base model")
        self.bases = list(bases)
        self.P = P
        self.eta = float(eta)
        d = P.shape[1]
        self.theta = np.zeros(d)
        self._signal = np.zeros((d, d))
        self._n = 0

    def _terms(self, S, ctx):
        v = np.array([b.value(S, ctx) for b in self.bases])
        Px = self.P @ ctx.x  # (k, d)
        return v, Px

    def raw_predict(self, S, ctx) -> float:
        v, Px = self._terms(S, ctx)
        return float(sum(vi * relu(z) for vi, z in zip(v, Px @ self.theta)))

    def predict(self, S, ctx):
        return _clamp01(self.raw_predict(S, ctx))

    def gradient(self, S, ctx, r) -> np.ndarray:
        v, Px = self._terms(S, ctx)
        pred = float(sum(vi * relu(z) for vi, z in zip(v, Px @ self.theta)))
        return (pred - r) * (v @ Px)

    def update(self, S, ctx, r):
        v, Px = self._terms(S, ctx)
        M = v @ Px
        self._signal += np.outer(M, M)
        self._n += 1
        pred = float(sum(vi * relu(z) for vi, z in zip(v, Px @ self.theta)))
        self.theta = project_unit_ball(self.theta - self.eta * (pred - r) * M)

    def signal_min_eigenvalue(self) -> float:
        if self._n == 0:
            return 0.0
        return float(np.linalg.eigvalsh(self._signal / self._n)[0])

    def signal_flagged(self, threshold: float = 1e-3) -> bool:
        return self.signal_min_eigenvalue() < threshold


class DoublingOracle(RegressionOracle):
    """Restart ``factory(horizon)`` on epochs of length 1, 2, 4, ... for unknown n."""

    def __init__(self, factory: Callable[[int], RegressionOracle]):
        self.factory = factory
        self.epoch_len = 1
        self._steps = 0
        self.inner = factory(self.epoch_len)

    def predict(self, S, ctx):
        return self.inner.predict(S, ctx)

    def update(self, S, ctx, r):
        self.inner.update(S, ctx, r)
        self._steps += 1
        if self._steps == self.epoch_len:
            self.epoch_len *= 2
            self._steps = 0
            self.inner = self.factory(self.epoch_len)


class TruthOracle(RegressionOracle):
    """Wraps the true model; ``update`` is a no-op."""

    def __init__(self, model: SetFunctionModel):
        self.model = model

    def predict(self, S, ctx):
        return _clamp01(self.model.value(S, ctx))

    def update(self, S, ctx, r):
        pass


def project_unit_ball(theta: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(theta))
    return theta / n if n > 1.0 else theta


def default_eta(n: int) -> float:
    return 1.0 / math.sqrt(n)


def agg_predict(state: FiniteClassOracle, S, ctx) -> float:
    return state.predict(S, ctx)


def agg_update(state: FiniteClassOracle, S, ctx, r) -> FiniteClassOracle:
    state.update(S, ctx, r)
    return state


def glm_step(state: GlmOracle, S, ctx, r) -> GlmOracle:
    state.update(S, ctx, r)
    return state


def multiglm_step(state: MultiGlmOracle, S, ctx, r) -> MultiGlmOracle:
    state.update(S, ctx, r)
    return state
