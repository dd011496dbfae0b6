"""Small reference targets shared by the tests, the acceptance suite and the demos."""

from __future__ import annotations

import numpy as np

from .energy import LogQuadraticModel, RbmModel
from .space import DiscreteSpace


def random_log_quadratic(dim: int, scale: float = 1.0, seed=0) -> LogQuadraticModel:
    rng = np.random.default_rng(seed)
    return LogQuadraticModel(DiscreteSpace.binary(dim), scale * rng.normal(size=(dim, dim)),
                             scale * rng.normal(size=dim))


def random_rbm(n_visible: int, n_hidden: int = 3, scale: float = 1.0, seed=0) -> RbmModel:
    """A softplus energy: a convenient target that is not log-quadratic."""
    return RbmModel.random(n_hidden, n_visible, np.random.default_rng(seed), scale)


def two_mode_binary(dim: int = 4, strength: float = 1.5, tilt: float = 0.2) -> LogQuadraticModel:
    """``U(x) = strength * s^2 - (strength * dim - tilt) * s`` with ``s = sum(x)``.

    Modes at all-zeros (``U = 0``) and all-ones (``U = dim * tilt``) separated
    by a trough around ``s = dim / 2``.
    """
    W = strength * np.ones((dim, dim))
    b = (-strength * dim + tilt) * np.ones(dim)
    return LogQuadraticModel(DiscreteSpace.binary(dim), W, b)


def two_pattern_rbm(dim: int = 16, coupling: float = 4.0, favour: float = 0.5):
    """RBM with one hidden unit per half-pattern; returns ``(rbm, dominant, other)``.

    The two patterns are complementary (Hamming distance ``dim``); each hidden
    unit's energy grows by ``coupling`` per matching bit beyond half overlap.
    """
    half = dim // 2
    p1 = np.r_[np.ones(half), np.zeros(dim - half)].astype(np.int64)
    p2 = 1 - p1
    W = coupling * np.stack([2 * p1 - 1, 2 * p2 - 1]).astype(float)
    a = np.array([-coupling * half / 2 + favour, -coupling * half / 2])
    return RbmModel(W, a, np.zeros(dim)), p1, p2


def hitting_step(states, target, radius: int = 2) -> int | None:
    """First index whose state is within Hamming ``radius`` of ``target`` (or None)."""
    dist = np.abs(np.asarray(states) - target).sum(-1)
    hits = np.flatnonzero(dist <= radius)
    return int(hits[0]) if hits.size else None
