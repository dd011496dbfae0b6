"""Tempered discrete Langevin proposal.

For each coordinate independently,

    q(x_i' | x) ∝ exp( beta/2 * dU(x)_i * (x_i' - x_i) - |x_i' - x_i|^p / (2 alpha) )

so one gradient evaluation at ``x`` determines the whole proposal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .space import BINARY, ONE_HOT, DiscreteSpace


@dataclass(frozen=True)
class ChainParams:
    beta: float = 1.0
    alpha: float = 0.2
    p: float = 2.0

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if self.p < 1:
            raise ValueError("p must be >= 1")


def _inv_two_alpha(alpha):
    alpha = np.asarray(alpha, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(np.isinf(alpha), 0.0, 0.5 / alpha)


def proposal_logits(space: DiscreteSpace, x, grad, beta, alpha, p=2.0) -> np.ndarray:
    """Unnormalized per-coordinate log-weights, shape ``(..., dim, n_values)``.

    ``beta`` and ``alpha`` broadcast against the batch shape of ``x``.
    """
    x = np.asarray(x)
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise ValueError("gradient is not finite")
    half_beta = 0.5 * np.asarray(beta, dtype=float)[..., None, None]
    penalty = _inv_two_alpha(alpha)[..., None, None]
    if space.kind == ONE_HOT:
        g_cur = np.take_along_axis(grad, x[..., None], axis=-1)
        moved = space.support != x[..., None]
        # any category change moves two indicators by one: ||.||_p^p = 2
        return half_beta * (grad - g_cur) - penalty * 2.0 * moved
    delta = space.support - x[..., None]
    return half_beta * grad[..., None] * delta - penalty * np.abs(delta) ** p


def log_weights(space: DiscreteSpace, x, grad, beta, alpha, p=2.0) -> np.ndarray:
    """Normalized per-coordinate log-probabilities over the support."""
    logits = proposal_logits(space, x, grad, beta, alpha, p)
    return logits - logsumexp(logits, axis=-1, keepdims=True)


def coordinate_weights(grad_i, theta_i, params: ChainParams, support, one_hot=False) -> np.ndarray:
    """Proposal distribution of a single coordinate over ``support``.

    For one-hot coordinates ``grad_i`` is the per-level gradient vector and
    ``theta_i`` the current category label.
    """
    support = np.asarray(support)
    if support.size == 0:
        raise ValueError("support is empty")
    grad_i = np.asarray(grad_i, dtype=float)
    if not np.all(np.isfinite(grad_i)):
        raise ValueError("gradient is not finite")
    inv2a = float(_inv_two_alpha(params.alpha))
    if one_hot:
        logits = 0.5 * params.beta * (grad_i[support] - grad_i[theta_i]) - inv2a * 2.0 * (support != theta_i)
    else:
        delta = support - theta_i
        logits = 0.5 * params.beta * grad_i * delta - inv2a * np.abs(delta) ** params.p
    w = np.exp(logits - logits.max())
    return w / w.sum()


def binary_flip_probs(grad, x, params: ChainParams | None = None, *, beta=None, alpha=None) -> np.ndarray:
    """Per-coordinate flip probabilities on ``{0,1}^d`` (sigmoid form)."""
    if params is not None:
        beta, alpha = params.beta, params.alpha
    x = np.asarray(x)
    if np.any((x != 0) & (x != 1)):
        raise ValueError("binary_flip_probs needs a binary state")
    beta = np.asarray(beta, dtype=float)[..., None]
    inv2a = _inv_two_alpha(alpha)[..., None]
    return expit(-0.5 * beta * np.asarray(grad, dtype=float) * (2 * x - 1) - inv2a)


def sample_coordinates(space: DiscreteSpace, x, grad, beta, alpha, p, uniforms):
    """Draw ``x'`` from the factorized proposal using the given uniforms.

    Returns ``(x_new, log_q_fwd)``; ``uniforms`` has the shape of ``x``.
    """
    x = np.asarray(x)
    if space.kind == BINARY:
        pf = binary_flip_probs(grad, x, beta=beta, alpha=alpha)
        flip = uniforms < pf
        x_new = np.where(flip, 1 - x, x)
        with np.errstate(divide="ignore"):
            logq = np.where(flip, np.log(pf), np.log1p(-pf)).sum(-1)
        return x_new, logq
    logw = log_weights(space, x, grad, beta, alpha, p)
    cdf = np.cumsum(np.exp(logw), axis=-1)
    x_new = (uniforms[..., None] >= cdf[..., :-1]).sum(-1)
    logq = np.take_along_axis(logw, x_new[..., None], axis=-1)[..., 0].sum(-1)
    return x_new, logq


def log_q_given_grad(space: DiscreteSpace, x_new, x, grad, beta, alpha, p=2.0):
    """``log q(x_new | x)`` given the gradient at the conditioning state ``x``."""
    x_new = np.asarray(x_new)
    if space.kind == BINARY:
        pf = binary_flip_probs(grad, x, beta=beta, alpha=alpha)
        flip = x_new != x
        with np.errstate(divide="ignore"):
            return np.where(flip, np.log(pf), np.log1p(-pf)).sum(-1)
    logw = log_weights(space, x, grad, beta, alpha, p)
    return np.take_along_axis(logw, x_new[..., None], axis=-1)[..., 0].sum(-1)


def propose(x, model, params: ChainParams, rng):
    """Sample ``x' ~ q(. | x)``; returns ``(x', log_q_fwd)``."""
    space = model.space
    x = space.validate(x)
    grad = model.gradient(x)
    u = rng.random(x.shape)
    return sample_coordinates(space, x, grad, params.beta, params.alpha, params.p, u)


def log_q(x_new, x, model, params: ChainParams) -> float:
    """Log-density of proposing ``x_new`` from ``x`` (gradient taken at ``x``)."""
    space = model.space
    x = space.validate(x)
    x_new = space.validate(x_new)
    return float(log_q_given_grad(space, x_new, x, model.gradient(x), params.beta, params.alpha, params.p))
