"""RBM training and evaluation: block Gibbs, PCD with pluggable negative samplers, AIS."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

from .chain import local_moves
from .energy import RbmModel, softplus
from .space import enumerate_states
from .tempering import ReplicaEnsemble

EXACT_MAX_DIM = 20


def block_gibbs_step(rbm: RbmModel, x, rng, beta_w: float = 1.0) -> np.ndarray:
    """``h ~ p(h | x)`` then ``x' ~ p(x | h)``; ``beta_w`` scales the coupling (for AIS)."""
    x = np.asarray(x)
    if x.shape[-1] != rbm.n_visible:
        raise ValueError(f"expected {rbm.n_visible} visibles, got shape {x.shape}")
    ph = expit(beta_w * (x @ rbm.W.T) + rbm.a)
    h = (rng.random(ph.shape) < ph).astype(float)
    px = expit(beta_w * (h @ rbm.W) + rbm.b)
    return (rng.random(px.shape) < px).astype(np.int64)


def exact_log_z(rbm: RbmModel, chunk: int = 1 << 16) -> float:
    """``log sum_x exp(U(x))`` by enumerating all visible configurations."""
    if rbm.n_visible > EXACT_MAX_DIM:
        raise ValueError(f"too many visibles for exact enumeration (d > {EXACT_MAX_DIM})")
    states = enumerate_states(rbm.space)
    parts = [logsumexp(rbm.energy(states[i:i + chunk])) for i in range(0, len(states), chunk)]
    return float(logsumexp(parts))


def joint_log_z(rbm: RbmModel) -> float:
    """``log sum_{x,h} exp(h^T W x + a^T h + b^T x)`` over visibles and hiddens."""
    if rbm.n_visible + rbm.n_hidden > EXACT_MAX_DIM:
        raise ValueError("joint enumeration too large")
    from .space import DiscreteSpace

    xs = enumerate_states(DiscreteSpace.binary(rbm.n_visible)).astype(float)
    hs = enumerate_states(DiscreteSpace.binary(rbm.n_hidden)).astype(float)
    e = hs @ rbm.W @ xs.T + (hs @ rbm.a)[:, None] + (xs @ rbm.b)[None, :]
    return float(logsumexp(e))


def log_likelihood(rbm: RbmModel, data, log_z: float | None = None) -> float:
    """Mean log-likelihood of ``data`` (exact ``log Z`` unless one is supplied)."""
    log_z = exact_log_z(rbm) if log_z is None else log_z
    return float(np.mean(rbm.energy(np.asarray(data))) - log_z)


def visible_marginal(rbm: RbmModel) -> np.ndarray:
    states = enumerate_states(rbm.space)
    return np.exp(rbm.log_probs(states))


def ais_log_z(rbm: RbmModel, n_temps: int = 1000, gibbs_steps_per_temp: int = 1, n_particles: int = 100,
              rng=None):
    """Annealed importance sampling estimate of ``log Z``.

    The path scales the coupling ``W`` by ``t`` in ``0 = t_0 < ... < t_{T-1} = 1``
    with the biases fixed, so the base is a factorized Bernoulli with
    ``log Z_0 = sum softplus(a) + sum softplus(b)``.  Returns ``(log_z, log_weights)``.
    """
    if n_temps < 2:
        raise ValueError("n_temps must be >= 2")
    rng = np.random.default_rng(rng)
    ts = np.linspace(0.0, 1.0, n_temps)
    log_z0 = float(softplus(rbm.a).sum() + softplus(rbm.b).sum())
    x = (rng.random((n_particles, rbm.n_visible)) < expit(rbm.b)).astype(np.int64)
    logw = np.zeros(n_particles)

    def f(xx, t):
        return softplus(t * (xx @ rbm.W.T) + rbm.a).sum(-1)

    for i in range(1, n_temps):
        logw += f(x, ts[i]) - f(x, ts[i - 1])
        if i < n_temps - 1:
            for _ in range(gibbs_steps_per_temp):
                x = block_gibbs_step(rbm, x, rng, beta_w=ts[i])
    est = float(logsumexp(logw) - np.log(n_particles)) + log_z0
    return est, logw


def effective_sample_size(log_weights) -> float:
    w = np.exp(log_weights - np.max(log_weights))
    return float(w.sum() ** 2 / (w * w).sum())


# ---------------------------------------------------------------- samplers


class GibbsNegative:
    def __call__(self, rbm, chains, k_steps, rng):
        for _ in range(k_steps):
            chains = block_gibbs_step(rbm, chains, rng)
        return chains


@dataclass
class LangevinNegative:
    """Single-chain DULA/DMALA negative phase at ``beta = 1``."""

    alpha: float = 0.2
    adjusted: bool = True
    p: float = 2.0

    def __call__(self, rbm, chains, k_steps, rng):
        x = np.asarray(chains)
        u, g = rbm.energy(x), rbm.gradient(x)
        for _ in range(k_steps):
            u_prop = rng.random(x.shape)
            u_acc = rng.random(x.shape[:-1])
            x, u, g, _ = local_moves(rbm, x, u, g, 1.0, self.alpha, self.p, self.adjusted, u_prop, u_acc)
        return x


@dataclass
class TemperedNegative:
    """Persistent replica ensembles; the coldest chains are the negative samples."""

    betas: tuple = (1.0, 0.7, 0.5)
    alphas: float | tuple = 0.2
    adjusted: bool = True
    seed: int | None = None
    ensemble: ReplicaEnsemble | None = field(default=None, repr=False)

    def __call__(self, rbm, chains, k_steps, rng):
        chains = np.asarray(chains)
        if self.ensemble is None:
            K = len(self.betas)
            self.ensemble = ReplicaEnsemble(rbm, self.betas, self.alphas, chains[:, None, :].repeat(K, 1),
                                            adjusted=self.adjusted, copies=len(chains), seed=self.seed)
        else:
            self.ensemble.refresh(rbm)
        for _ in range(k_steps):
            self.ensemble.step()
        return self.ensemble.states[:, 0].copy()


class ExactNegative:
    """Exact model expectations by enumeration (tiny models only)."""

    def expectations(self, rbm):
        states = enumerate_states(rbm.space).astype(float)
        p = np.exp(rbm.log_probs(states))
        return _sufficient_stats(rbm, states, p)


# ---------------------------------------------------------------- PCD


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict, grads: dict, ascend: bool = True) -> dict:
        """Return updated copies of ``params``; ascends by default."""
        if self.lr < 0:
            raise ValueError("learning rate must be >= 0")
        self.t += 1
        sign = 1.0 if ascend else -1.0
        out = {}
        for k, g in grads.items():
            m = self.beta1 * self.m.get(k, 0.0) + (1 - self.beta1) * g
            v = self.beta2 * self.v.get(k, 0.0) + (1 - self.beta2) * g * g
            self.m[k], self.v[k] = m, v
            m_hat = m / (1 - self.beta1**self.t)
            v_hat = v / (1 - self.beta2**self.t)
            out[k] = params[k] + sign * self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return out


def _sufficient_stats(rbm, x, weights=None):
    """Weighted means of ``dU/dW, dU/da, dU/db`` over visibles ``x``."""
    x = np.asarray(x, dtype=float)
    w = np.full(len(x), 1.0 / len(x)) if weights is None else np.asarray(weights)
    ph = expit(x @ rbm.W.T + rbm.a)
    return {"W": (ph * w[:, None]).T @ x, "a": w @ ph, "b": w @ x}


@dataclass
class PcdState:
    model: RbmModel
    chains: np.ndarray
    learning_rate: float = 1e-3
    rng: np.random.Generator = field(default_factory=np.random.default_rng)
    optimizer: Adam | None = None
    n_updates: int = 0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        self.chains = np.asarray(self.chains, dtype=np.int64)
        if np.any((self.chains != 0) & (self.chains != 1)):
            raise ValueError("persistent chains must be binary")
        if self.optimizer is None:
            self.optimizer = Adam(lr=self.learning_rate)


def pcd_gradient(rbm, data, negatives) -> dict:
    """``E_data[dU] - E_model[dU]``; ``negatives`` is a state batch or an :class:`ExactNegative`."""
    pos = _sufficient_stats(rbm, data)
    neg = negatives.expectations(rbm) if isinstance(negatives, ExactNegative) else _sufficient_stats(rbm, negatives)
    return {k: pos[k] - neg[k] for k in pos}


def pcd_update(pcd: PcdState, data_batch, negative_sampler, k_steps: int = 1) -> PcdState:
    """One PCD step: advance the persistent chains, then an Adam ascent step."""
    data_batch = np.asarray(data_batch)
    if data_batch.size == 0:
        raise ValueError("data batch is empty")
    rbm = pcd.model
    if isinstance(negative_sampler, ExactNegative):
        grads = pcd_gradient(rbm, data_batch, negative_sampler)
    else:
        pcd.chains = negative_sampler(rbm, pcd.chains, k_steps, pcd.rng)
        grads = pcd_gradient(rbm, data_batch, pcd.chains)
    new = pcd.optimizer.step(rbm.params(), grads)
    pcd.model = RbmModel(new["W"], new["a"], new["b"])
    pcd.n_updates += 1
    return pcd


def sample_rbm_exact(rbm: RbmModel, n: int, rng) -> np.ndarray:
    """Exact draws by enumeration (tiny models only)."""
    states = enumerate_states(rbm.space)
    p = np.exp(rbm.log_probs(states))
    return states[rng.choice(len(states), size=n, p=p / p.sum())]


def train_pcd(rbm: RbmModel, data, negative_sampler, n_updates: int, batch_size: int = 32, k_steps: int = 1,
              learning_rate: float = 1e-3, n_chains: int | None = None, seed=None, log_every: int = 0):
    """Run ``n_updates`` PCD steps; returns ``(pcd_state, log_rows)``.

    ``log_rows`` holds ``(update, exact log-likelihood)`` every ``log_every`` updates
    when the model is small enough to enumerate.
    """
    rng = np.random.default_rng(seed)
    data = np.asarray(data)
    n_chains = batch_size if n_chains is None else n_chains
    chains = data[rng.choice(len(data), n_chains, replace=len(data) < n_chains)]
    pcd = PcdState(rbm, chains, learning_rate, rng)
    rows = []
    for t in range(n_updates):
        batch = data[rng.choice(len(data), min(batch_size, len(data)), replace=False)]
        pcd_update(pcd, batch, negative_sampler, k_steps)
        if log_every and (t + 1) % log_every == 0 and pcd.model.n_visible <= EXACT_MAX_DIM:
            rows.append((t + 1, log_likelihood(pcd.model, data)))
    return pcd, rows
