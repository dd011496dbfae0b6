"""Replica exchange over a ladder of inverse temperatures.

Each ensemble step moves every chain once (DULA or DMALA) and then sweeps the
adjacent pairs ``k = 0 .. K-2`` in ascending order.  The default ``tailored``
swap rule uses the energies of both chains before *and* after the local step:

    s_k = min{1, exp((b_k - b_{k+1}) [U(new_{k+1}) + U(old_{k+1}) - U(new_k) - U(old_k)])}

and a pair swaps when ``u <= rho * s_k``.  ``standard`` uses post-step
energies only, ``s_k = min{1, exp((b_k - b_{k+1}) [U(new_{k+1}) - U(new_k)])}``.
Pre-step energies belong to temperature slots and do not move with swaps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain import local_moves
from .energy import MiniBatchEnergy, VarianceWindow

SWAP_RULES = ("tailored", "standard")


def swap_log_ratio(beta_k, beta_k1, u_new_hi, u_old_hi, u_new_lo, u_old_lo):
    """Uncapped exponent of the tailored swap criterion (``hi`` = hotter chain k+1)."""
    return (np.asarray(beta_k) - beta_k1) * (
        np.asarray(u_new_hi) + u_old_hi - np.asarray(u_new_lo) - u_old_lo
    )


def _capped_exp(log_s):
    out = np.exp(np.minimum(log_s, 0.0))
    return float(out) if np.ndim(out) == 0 else out


def swap_probability(beta_k, beta_k1, u_new_hi, u_old_hi, u_new_lo, u_old_lo):
    """Tailored swap probability for the pair (k, k+1); energies may be arrays."""
    for v in (u_new_hi, u_old_hi, u_new_lo, u_old_lo):
        if not np.all(np.isfinite(v)):
            raise ValueError("energies must be finite")
    log_s = swap_log_ratio(beta_k, beta_k1, u_new_hi, u_old_hi, u_new_lo, u_old_lo)
    return _capped_exp(log_s)


def stochastic_swap_probability(beta_k, beta_k1, u_new_hi, u_old_hi, u_new_lo, u_old_lo, sigma_sq):
    """Swap probability from noisy energies with the variance correction.

    ``min{1, exp(bd * (bracket - bd * sigma_sq))}`` with ``bd = beta_k - beta_k1``.
    """
    if np.any(np.asarray(sigma_sq) < 0):
        raise ValueError("sigma_sq must be non-negative")
    bd = beta_k - beta_k1
    log_s = swap_log_ratio(beta_k, beta_k1, u_new_hi, u_old_hi, u_new_lo, u_old_lo) - bd * bd * sigma_sq
    return _capped_exp(log_s)


def geometric_betas(n_chains: int, beta_min: float = 0.05) -> np.ndarray:
    if n_chains == 1:
        return np.ones(1)
    return np.geomspace(1.0, beta_min, n_chains)


@dataclass
class Trace:
    """Per-step record of the coldest chain of every copy."""

    states: np.ndarray  # (n, B, d)
    energies: np.ndarray  # (n, B)
    swaps: np.ndarray  # (n, B, K-1) accepted flags
    labels: np.ndarray  # (n + 1, B, K) replica id at each slot; row 0 is the start


class ReplicaEnsemble:
    """``B`` independent copies of a ``K``-chain tempering ladder.

    Parameters
    ----------
    model : EnergyModel or MiniBatchEnergy
        Target.  A :class:`MiniBatchEnergy` switches on the stochastic swap
        correction; it is only supported with ``adjusted=False``.
    betas : strictly decreasing inverse temperatures with ``betas[0] == 1``.
    alphas : scalar or length-``K`` step sizes.
    x0 : initial states, shape ``(d,)``, ``(K, d)`` or ``(B, K, d)``.
    seed : master seed; chain ``(b, k)`` draws from stream ``b * K + k``,
        swaps from stream ``B * K`` and mini-batches from ``B * K + 1``.
    """

    def __init__(self, model, betas, alphas=0.2, x0=None, *, p=2.0, rho=1.0, adjusted=True,
                 swap_rule="tailored", copies=1, seed=None):
        betas = np.atleast_1d(np.asarray(betas, dtype=float))
        K = betas.size
        if betas[0] != 1.0 or np.any(np.diff(betas) >= 0) or betas[-1] < 0:
            raise ValueError("betas must satisfy 1 = b_1 > b_2 > ... > b_K >= 0")
        if not 0.0 <= rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if swap_rule not in SWAP_RULES:
            raise ValueError(f"swap_rule must be one of {SWAP_RULES}")
        self.minibatch = isinstance(model, MiniBatchEnergy)
        if self.minibatch and adjusted:
            raise ValueError("mini-batch energies are only supported for the unadjusted sampler")
        self.model = model
        self.space = model.space
        self.betas = betas
        self.alphas = np.broadcast_to(np.asarray(alphas, dtype=float), (K,)).copy()
        if np.any(self.alphas <= 0):
            raise ValueError("alpha must be > 0")
        self.p = float(p)
        self.rho = float(rho)
        self.adjusted = bool(adjusted)
        self.swap_rule = swap_rule
        self.B = int(copies)

        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        children = ss.spawn(self.B * K + 2)
        self.chain_rngs = [np.random.default_rng(c) for c in children[: self.B * K]]
        self.swap_rng = np.random.default_rng(children[self.B * K])
        self.batch_rng = np.random.default_rng(children[self.B * K + 1])
        self.seed_entropy = ss.entropy

        d = self.space.dim
        if x0 is None:
            x0 = self.space.random_state(np.random.default_rng(children[0]), size=None)
        x0 = np.asarray(x0, dtype=np.int64)
        self.states = np.broadcast_to(x0, (self.B, K, d)).copy()
        if not self.space.contains(self.states):
            raise ValueError("initial states are outside the space")
        self.labels = np.tile(np.arange(K), (self.B, 1))
        self.pair_attempts = np.zeros(max(K - 1, 0), dtype=np.int64)
        self.pair_accepts = np.zeros(max(K - 1, 0), dtype=np.int64)
        self.pair_prob_sum = np.zeros(max(K - 1, 0))
        self.n_steps = 0
        self.n_grad = 0
        self.n_energy = 0
        self.windows = [VarianceWindow() for _ in range(self.B * K)] if self.minibatch else None
        self.refresh(model)
        self.prev_energies = self.energies.copy()

    @property
    def K(self) -> int:
        return self.betas.size

    def refresh(self, model=None):
        """Recompute cached energies/gradients, e.g. after the model changed."""
        if model is not None:
            self.model = model
        if self.minibatch:
            self.energies = self.model.base.energy(self.states)
            self.grads = None
        else:
            self.energies = self.model.energy(self.states)
            self.grads = self.model.gradient(self.states)

    @property
    def sigma_sq(self) -> np.ndarray:
        """Current variance estimates of the stochastic energies, shape ``(B, K)``."""
        if not self.minibatch:
            return np.zeros((self.B, self.K))
        return np.array([w.value for w in self.windows]).reshape(self.B, self.K)

    def _local_uniforms(self):
        d = self.space.dim
        u_prop = np.empty((self.B, self.K, d))
        u_acc = np.empty((self.B, self.K))
        for i, rng in enumerate(self.chain_rngs):
            b, k = divmod(i, self.K)
            u_prop[b, k] = rng.random(d)
            if self.adjusted:
                u_acc[b, k] = rng.random()
        return u_prop, u_acc

    def _local_step_minibatch(self, u_prop):
        mb = self.model
        idx = mb.draw_batch(self.batch_rng)
        x = self.states
        # pre-step energies re-estimated on the same batch as the post-step ones
        self.prev_energies = mb.energy_on(x, idx)
        g = mb.gradient_on(x, idx)
        from .proposal import sample_coordinates

        x_new, _ = sample_coordinates(self.space, x, g, self.betas, self.alphas, self.p, u_prop)
        self.states = x_new
        self.energies = mb.energy_on(x_new, idx)
        if mb.batch_size >= 2:
            var_new = mb.within_batch_variance(x_new, idx)
            for i, w in enumerate(self.windows):
                w.push_estimate(var_new.reshape(-1)[i])
        else:
            for i, w in enumerate(self.windows):
                b, k = divmod(i, self.K)
                w.push_draw(x_new[b, k], self.energies[b, k])

    def step(self) -> np.ndarray:
        """One ensemble step; returns the accepted-swap flags, shape ``(B, K-1)``."""
        K = self.K
        u_prop, u_acc = self._local_uniforms()
        if self.minibatch:
            self._local_step_minibatch(u_prop)
        else:
            self.prev_energies = self.energies.copy()
            self.states, self.energies, self.grads, _ = local_moves(
                self.model, self.states, self.energies, self.grads,
                self.betas, self.alphas, self.p, self.adjusted, u_prop, u_acc,
            )
        per_chain = 2 if self.adjusted else 1
        self.n_grad += per_chain * self.B * K
        self.n_energy += per_chain * self.B * K
        self.n_steps += 1

        swapped = np.zeros((self.B, max(K - 1, 0)), dtype=bool)
        if K == 1:
            return swapped
        u_swap = self.swap_rng.random((self.B, K - 1))
        sig = self.sigma_sq
        for k in range(K - 1):
            bd = self.betas[k] - self.betas[k + 1]
            e_lo, e_hi = self.energies[:, k], self.energies[:, k + 1]
            if self.swap_rule == "tailored":
                log_s = bd * (e_hi + self.prev_energies[:, k + 1] - e_lo - self.prev_energies[:, k])
            else:
                log_s = bd * (e_hi - e_lo)
            if self.minibatch:
                log_s = log_s - bd * bd * 0.5 * (sig[:, k] + sig[:, k + 1])
            s = np.exp(np.minimum(log_s, 0.0))
            acc = u_swap[:, k] <= self.rho * s
            self.pair_attempts[k] += self.B
            self.pair_accepts[k] += int(acc.sum())
            self.pair_prob_sum[k] += float(s.sum())
            if acc.any():
                self._swap(acc, k)
            swapped[:, k] = acc
        return swapped

    def _swap(self, mask, k):
        b = np.flatnonzero(mask)
        for arr in (self.states, self.energies, self.labels):
            arr[b, k], arr[b, k + 1] = arr[b, k + 1].copy(), arr[b, k].copy()
        if self.grads is not None:
            self.grads[b, k], self.grads[b, k + 1] = self.grads[b, k + 1].copy(), self.grads[b, k].copy()

    def run(self, n_steps: int, burn_in: int = 0, thin: int = 1) -> Trace:
        """Advance ``burn_in + n_steps`` steps, recording every ``thin``-th kept step."""
        for _ in range(burn_in):
            self.step()
        n_keep = n_steps // thin
        d = self.space.dim
        states = np.empty((n_keep, self.B, d), dtype=np.int64)
        energies = np.empty((n_keep, self.B))
        swaps = np.empty((n_keep, self.B, max(self.K - 1, 0)), dtype=bool)
        labels = np.empty((n_keep + 1, self.B, self.K), dtype=np.int64)
        labels[0] = self.labels
        j = 0
        for t in range(n_keep * thin):
            sw = self.step()
            if (t + 1) % thin == 0:
                states[j] = self.states[:, 0]
                energies[j] = self.energies[:, 0]
                swaps[j] = sw
                labels[j + 1] = self.labels
                j += 1
        return Trace(states, energies, swaps, labels)

    @property
    def pair_acceptance(self) -> np.ndarray:
        """Fraction of accepted swap attempts per adjacent pair."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.pair_accepts / self.pair_attempts

    @property
    def mean_swap_prob(self) -> np.ndarray:
        """Mean of ``min{1, s_k}`` per pair (independent of ``rho``)."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.pair_prob_sum / self.pair_attempts


def ensemble_step(ens: ReplicaEnsemble, model=None, adjusted: bool | None = None) -> ReplicaEnsemble:
    """Advance ``ens`` one step, optionally after swapping in a new model or local kernel.

    Random numbers always come from the ensemble's own per-chain and swap streams.
    """
    if model is not None and model is not ens.model:
        ens.refresh(model)
    if adjusted is not None and bool(adjusted) != ens.adjusted:
        if adjusted and ens.minibatch:
            raise ValueError("mini-batch energies are only supported for the unadjusted sampler")
        ens.adjusted = bool(adjusted)
    ens.step()
    return ens


@dataclass
class RoundTripStats:
    count: int
    rate: float
    per_pair_acceptance: np.ndarray = field(default_factory=lambda: np.zeros(0))


def count_round_trips(labels: np.ndarray) -> int:
    """Count completed coldest -> hottest -> coldest trips in a label trace.

    ``labels`` has shape ``(n + 1, K)`` or ``(n + 1, B, K)``: the replica id
    sitting at each temperature slot after every step (row 0 = start).  A
    replica starts being tracked the first time it occupies slot 0.
    """
    labels = np.asarray(labels)
    if labels.ndim == 2:
        labels = labels[:, None, :]
    T, B, K = labels.shape
    if K < 2:
        return 0
    total = 0
    for b in range(B):
        anchored = np.zeros(K, dtype=bool)
        seen_hot = np.zeros(K, dtype=bool)
        for t in range(T):
            cold, hot = labels[t, b, 0], labels[t, b, K - 1]
            if anchored[cold] and seen_hot[cold]:
                total += 1
            anchored[cold] = True
            seen_hot[cold] = False
            if anchored[hot]:
                seen_hot[hot] = True
    return total


def round_trip_stats(labels, pair_attempts=None, pair_accepts=None) -> RoundTripStats:
    """Round trips, per-replica round-trip rate per step, and pair acceptances.

    ``rate`` is ``count / (n_steps * K)``: the average number of completed
    trips per replica per step, summed over copies.
    """
    labels = np.asarray(labels)
    if labels.shape[0] < 2:
        raise ValueError("label trace needs at least one step")
    n = labels.shape[0] - 1
    K = labels.shape[-1]
    count = count_round_trips(labels)
    if pair_attempts is None:
        acc = np.zeros(K - 1)
    else:
        with np.errstate(invalid="ignore", divide="ignore"):
            acc = np.asarray(pair_accepts) / np.asarray(pair_attempts)
    return RoundTripStats(count, count / (n * K), acc)
