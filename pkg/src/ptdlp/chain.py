"""Single-replica transitions: unadjusted (DULA) and Metropolis-adjusted (DMALA).

The batched helpers operate on arrays with arbitrary leading batch dimensions
so the replica ensemble can move all chains with one gradient call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .proposal import ChainParams, log_q_given_grad, sample_coordinates


def mh_accept_prob(u_old, u_new, log_q_fwd, log_q_rev, beta):
    """``min{1, exp(beta (U_new - U_old) + log q_rev - log q_fwd)}``."""
    log_r = np.asarray(beta) * (np.asarray(u_new) - u_old) + log_q_rev - log_q_fwd
    with np.errstate(over="ignore"):
        return np.exp(np.minimum(log_r, 0.0))


def local_moves(model, x, u, g, beta, alpha, p, adjusted, u_prop, u_acc=None):
    """Move a batch of chains one local step.

    ``x, u, g`` are the current states with cached energies and gradients.
    Returns ``(x, u, g, accepted)`` for the new states; rejected chains keep
    their inputs.  Self-proposals are accepted without evaluating the ratio.
    """
    space = model.space
    x_prop, lq_fwd = sample_coordinates(space, x, g, beta, alpha, p, u_prop)
    u_prop_e = model.energy(x_prop)
    g_prop = model.gradient(x_prop)
    if not adjusted:
        return x_prop, u_prop_e, g_prop, np.ones(np.shape(u), dtype=bool)
    lq_rev = log_q_given_grad(space, x, x_prop, g_prop, beta, alpha, p)
    acc_prob = mh_accept_prob(u, u_prop_e, lq_fwd, lq_rev, beta)
    same = np.all(x_prop == x, axis=-1)
    accepted = same | (u_acc < acc_prob)
    keep = accepted[..., None]
    x_new = np.where(keep, x_prop, x)
    u_new = np.where(accepted, u_prop_e, u)
    g_keep = keep[..., None] if g.ndim > x.ndim else keep
    g_new = np.where(g_keep, g_prop, g)
    return x_new, u_new, g_new, accepted


@dataclass
class ChainState:
    """One chain with cached energy/gradient and its own random stream.

    ``n_grad`` / ``n_energy`` are the evaluation budget charged to the chain:
    one gradient per unadjusted step, two gradients and two energies per
    adjusted step (cached values are still charged).
    """

    state: np.ndarray
    energy: float
    gradient: np.ndarray
    params: ChainParams
    rng: np.random.Generator
    n_steps: int = 0
    n_accepted: int = 0
    n_grad: int = 0
    n_energy: int = 0

    @classmethod
    def start(cls, model, x0, params: ChainParams, seed=None) -> "ChainState":
        x0 = model.space.validate(x0)
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        return cls(x0, float(model.energy(x0)), model.gradient(x0), params, rng)

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_steps if self.n_steps else float("nan")


def _step(chain: ChainState, model, adjusted: bool) -> bool:
    prm = chain.params
    u_prop = chain.rng.random(chain.state.shape)
    u_acc = chain.rng.random() if adjusted else None
    x, u, g, acc = local_moves(
        model, chain.state, chain.energy, chain.gradient, prm.beta, prm.alpha, prm.p, adjusted, u_prop, u_acc
    )
    chain.state, chain.energy, chain.gradient = x, float(u), g
    chain.n_steps += 1
    chain.n_accepted += int(acc)
    chain.n_grad += 2 if adjusted else 1
    chain.n_energy += 2 if adjusted else 1
    return bool(acc)


def dula_step(chain: ChainState, model) -> ChainState:
    """Move to a fresh proposal with no correction."""
    _step(chain, model, adjusted=False)
    return chain


def dmala_step(chain: ChainState, model) -> tuple[ChainState, bool]:
    """Propose then accept/reject with the local Metropolis-Hastings test."""
    accepted = _step(chain, model, adjusted=True)
    return chain, accepted


def run_chain(chain: ChainState, model, n_steps: int, adjusted: bool = True) -> np.ndarray:
    """Run ``n_steps`` and return the visited states, shape ``(n_steps, dim)``."""
    out = np.empty((n_steps,) + chain.state.shape, dtype=np.int64)
    for t in range(n_steps):
        _step(chain, model, adjusted)
        out[t] = chain.state
    return out
