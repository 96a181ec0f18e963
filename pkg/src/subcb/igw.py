"""Inverse Gap Weighting over a finite list of scored actions.

Non-greedy actions get ``1 / (mu * 2K + gamma * gap)``; the greedy action
takes the remaining mass, which is at least 1/2 for ``mu >= 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class ScoredActions:
    actions: tuple
    scores: np.ndarray
    gamma: float
    mu: float = 1.0

    def __post_init__(self):
        if len(self.actions) != len(self.scores) or len(self.actions) < 1:
            raise DomainError("need K >= 1 actions with one score each")
        if not np.all(np.isfinite(self.scores)):
            raise DomainError("scores must be finite")
        _check_params(self.gamma, self.mu)


def _check_params(gamma, mu):
    if not (np.isfinite(gamma) and gamma > 0):
        raise DomainError(f"gamma must be finite and positive, got {gamma}")
    if not mu >= 1.0:
        raise DomainError(f"mu must be >= 1, got {mu}")


def igw_probabilities(scores: Sequence[float], gamma: float, mu: float = 1.0) -> np.ndarray:
    _check_params(gamma, mu)
    y = np.asarray(scores, dtype=float)
    K = y.shape[0]
    if K < 1:
        raise DomainError("need at least one action")
    if K == 1:
        return np.ones(1)
    b = int(np.argmax(y))  # first maximizer
    p = 1.0 / (mu * 2.0 * K + gamma * (y[b] - y))
    p[b] = 0.0
    p[b] = 1.0 - p.sum()
    return p


def igw_distribution(sa: ScoredActions) -> np.ndarray:
    return igw_probabilities(sa.scores, sa.gamma, sa.mu)


def igw_sample(sa: ScoredActions, rng: np.random.Generator) -> int:
    p = igw_distribution(sa)
    if p.shape[0] == 1:
        return 0
    return int(rng.choice(p.shape[0], p=p))


def igw_lemma_lhs(p, y_hat, f_star, gamma: float) -> float:
    """``sum_a p(a) [max f* - f*(a) - gamma/4 (y_hat(a) - f*(a))^2]``."""
    p = np.asarray(p, float)
    y_hat = np.asarray(y_hat, float)
    f_star = np.asarray(f_star, float)
    return float(np.dot(p, f_star.max() - f_star - 0.25 * gamma * (y_hat - f_star) ** 2))
