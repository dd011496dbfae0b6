"""Exact transition kernels on enumerable spaces.

The kernels here are assembled from the same proposal and swap formulas the
samplers use, so fixed points, detailed-balance residuals and TV decay can be
computed without Monte Carlo error.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

from .proposal import ChainParams, log_weights
from .space import DEFAULT_ENUMERATION_CAP, SpaceTooLargeError, enumerate_states
from .tempering import SWAP_RULES


class NotIrreducibleError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass
class ExactKernel:
    """Row-stochastic matrix over an explicit state list.

    For ensemble kernels ``states`` has shape ``(M, K, d)``: row ``m`` holds the
    states of chains ``1..K``.
    """

    states: np.ndarray
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def to_csv(self, path):
        _write_matrix(path, self.matrix)


def _write_matrix(path, M):
    M = np.atleast_2d(M)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"c{j}" for j in range(M.shape[1])])
        for row in M:
            w.writerow([repr(float(v)) for v in row])


def write_vector_csv(path, states, probs):
    """One row per state: ``index,state,prob`` with the state as a digit string."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "state", "prob"])
        for i, (s, p) in enumerate(zip(states, probs)):
            w.writerow([i, "".join(str(int(v)) for v in np.ravel(s)), repr(float(p))])


def _log_proposal_matrix(model, states, beta, alpha, p):
    """``log q(y | x)`` for all enumerated pairs, shape ``(n, n)``."""
    space = model.space
    grads = model.gradient(states)
    logw = log_weights(space, states, grads, beta, alpha, p)  # (n, d, V)
    n = states.shape[0]
    out = np.zeros((n, n))
    for i in range(space.dim):
        out += logw[:, i, :][:, states[:, i]]
    return out


def exact_local_kernel(model, params: ChainParams, adjusted: bool, space=None,
                       cap: int = DEFAULT_ENUMERATION_CAP) -> ExactKernel:
    """Single-chain DULA (``adjusted=False``) or DMALA kernel at ``params.beta``."""
    space = model.space if space is None else space
    states = enumerate_states(space, cap)
    return ExactKernel(states, _local_matrix(model, states, params, adjusted))


def _local_matrix(model, states, params: ChainParams, adjusted: bool):
    logq = _log_proposal_matrix(model, states, params.beta, params.alpha, params.p)
    Q = np.exp(logq)
    if not adjusted:
        return Q / Q.sum(1, keepdims=True)
    u = model.energy(states)
    log_r = params.beta * (u[None, :] - u[:, None]) + logq.T - logq
    A = np.exp(np.minimum(log_r, 0.0))
    P = Q * A
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, 1.0 - P.sum(1))
    return P


def _joint_index(idx, n):
    """Lexicographic joint index of per-chain indices ``idx[..., K]``."""
    K = idx.shape[-1]
    return idx @ (n ** np.arange(K - 1, -1, -1))


def _pt_parts(model, betas, alphas, rho, adjusted, space, p, swap_rule, cap):
    if swap_rule not in SWAP_RULES:
        raise ValueError(f"swap_rule must be one of {SWAP_RULES}")
    space = model.space if space is None else space
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    K = betas.size
    alphas = np.broadcast_to(np.asarray(alphas, dtype=float), (K,))
    states = enumerate_states(space, cap)
    n = states.shape[0]
    if K * np.log(n) > np.log(cap) + 1e-12:
        raise SpaceTooLargeError(f"joint space too large: {n}^{K} states exceeds cap {cap}")
    M = n**K
    comps = np.stack(np.unravel_index(np.arange(M), (n,) * K), axis=-1)  # (M, K)

    L = np.ones((M, M))
    for k in range(K):
        Pk = _local_matrix(model, states, ChainParams(betas[k], alphas[k], p), adjusted)
        L *= Pk[np.ix_(comps[:, k], comps[:, k])]
    branches = {tuple(range(K)): np.ones((M, M))}
    pair_acc = []
    if K == 1 or rho == 0.0:
        return states[comps], comps, n, L, branches, pair_acc

    u = model.energy(states)
    # branches of the sweep: slot permutation -> weight[x, y]
    for k in range(K - 1):
        bd = betas[k] - betas[k + 1]
        pre = bd * (u[comps[:, k + 1]] - u[comps[:, k]])  # depends on x (rows)
        nxt = {}
        acc_mass = np.zeros((M, M))
        for perm, W in branches.items():
            post = bd * (u[comps[:, perm[k + 1]]] - u[comps[:, perm[k]]])  # depends on y (cols)
            log_s = post[None, :] + (pre[:, None] if swap_rule == "tailored" else 0.0)
            acc = rho * np.exp(np.minimum(log_s, 0.0))
            acc_mass += W * acc
            swapped = list(perm)
            swapped[k], swapped[k + 1] = swapped[k + 1], swapped[k]
            for key, w in ((tuple(swapped), W * acc), (perm, W * (1.0 - acc))):
                nxt[key] = nxt[key] + w if key in nxt else w
        branches = nxt
        pair_acc.append(acc_mass)
    return states[comps], comps, n, L, branches, pair_acc


def exact_pt_kernel(model, betas, alphas, rho: float = 1.0, adjusted: bool = True, space=None, p: float = 2.0,
                    swap_rule: str = "tailored", cap: int = 4096) -> ExactKernel:
    """One full ensemble step: independent local moves, then the ascending swap sweep.

    Pre-step energies stay attached to their temperature slots while post-step
    states move through the sweep, exactly as in :class:`ReplicaEnsemble`.
    """
    joint_states, comps, n, L, branches, _ = _pt_parts(model, betas, alphas, rho, adjusted, space, p, swap_rule, cap)
    P = np.zeros_like(L)
    for perm, W in branches.items():
        z = _joint_index(comps[:, list(perm)], n)
        P[:, z] += L * W
    return ExactKernel(joint_states, P)


def expected_swap_rates(model, betas, alphas, rho: float = 1.0, adjusted: bool = True, space=None, p: float = 2.0,
                        swap_rule: str = "tailored", start=None) -> np.ndarray:
    """Per-pair probability that a swap is accepted in one step.

    Averaged over ``start`` (a distribution on the joint enumeration), which
    defaults to the kernel's own stationary distribution.
    """
    joint_states, comps, n, L, branches, pair_acc = _pt_parts(model, betas, alphas, rho, adjusted, space, p,
                                                              swap_rule, 4096)
    if start is None:
        P = np.zeros_like(L)
        for perm, W in branches.items():
            P[:, _joint_index(comps[:, list(perm)], n)] += L * W
        start = stationary_distribution(P)
    return np.array([start @ (L * A).sum(1) for A in pair_acc])


def product_target(model, betas, space=None) -> np.ndarray:
    """``prod_k pi^{beta_k}`` over the joint enumeration used by :func:`exact_pt_kernel`."""
    space = model.space if space is None else space
    states = enumerate_states(space)
    out = np.ones(1)
    for b in np.atleast_1d(betas):
        out = np.outer(out, np.exp(model.log_probs(states, b))).ravel()
    return out


def tempered_target(model, beta: float = 1.0, space=None) -> np.ndarray:
    space = model.space if space is None else space
    return np.exp(model.log_probs(enumerate_states(space), beta))


def _matrix(kernel):
    return kernel.matrix if isinstance(kernel, ExactKernel) else np.asarray(kernel, dtype=float)


def stationary_distribution(kernel, tol: float = 1e-13, max_iter: int = 10**6) -> np.ndarray:
    """Left fixed point ``pi P = pi``.

    A direct linear solve gives the starting vector; power iteration then runs
    until ``||pi P - pi||_1 < tol``.  Reducible kernels are rejected.
    """
    P = _matrix(kernel)
    n = P.shape[0]
    n_comp, _ = connected_components(P > 0, directed=True, connection="strong")
    if n_comp > 1:
        raise NotIrreducibleError(f"kernel is not irreducible ({n_comp} communicating classes)")
    A = P.T - np.eye(n)
    A[-1] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(A, rhs)
        pi = np.clip(pi, 0.0, None)
        pi /= pi.sum()
    except np.linalg.LinAlgError:
        pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = pi @ P
        nxt /= nxt.sum()
        res = np.abs(nxt - pi).sum()
        pi = nxt
        if res < tol:
            return pi
    raise ConvergenceError(f"power iteration did not reach residual {tol} in {max_iter} iterations")


def detailed_balance_residual(kernel, pi) -> float:
    """``max_{x,y} |pi(x) P(x,y) - pi(y) P(y,x)|``."""
    P = _matrix(kernel)
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (P.shape[0],):
        raise ValueError("pi does not match the kernel size")
    F = pi[:, None] * P
    return float(np.abs(F - F.T).max())


def stationarity_residual(kernel, pi) -> float:
    """``||pi P - pi||_1``."""
    return float(np.abs(np.asarray(pi) @ _matrix(kernel) - pi).sum())


def tv(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def tv_curve(kernel, init, n_steps: int, pi=None) -> np.ndarray:
    """TV distance of ``init P^n`` to the stationary law for ``n = 1..n_steps``."""
    P = _matrix(kernel)
    pi = stationary_distribution(P) if pi is None else np.asarray(pi)
    mu = np.asarray(init, dtype=float)
    out = np.empty(n_steps)
    for t in range(n_steps):
        mu = mu @ P
        out[t] = tv(mu, pi)
    return out


def marginal(joint, n_single: int, K: int, chain: int = 0) -> np.ndarray:
    """Marginal of chain ``chain`` from a distribution over the joint enumeration."""
    t = np.asarray(joint).reshape((n_single,) * K)
    axes = tuple(i for i in range(K) if i != chain)
    return t.sum(axis=axes) if axes else t


def point_mass(index: int, n: int) -> np.ndarray:
    e = np.zeros(n)
    e[index] = 1.0
    return e
