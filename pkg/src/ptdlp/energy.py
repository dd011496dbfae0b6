"""Energy models ``U`` with ``pi(x) ~ exp(U(x))`` and their real-extension gradients.

All models accept a single state of shape ``(dim,)`` or a batch ``(..., dim)``.
``energy`` returns shape ``(...)``; ``gradient`` returns ``(..., dim)`` or, on
one-hot spaces, ``(..., dim, levels)`` (one entry per indicator).
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit, gammaln, logsumexp

from .space import DiscreteSpace


def softplus(x):
    return np.logaddexp(0.0, x)


class EnergyModel:
    """Base class: subclasses provide ``_energy`` / ``_gradient`` on float arrays."""

    space: DiscreteSpace

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1:] != (self.space.dim,):
            raise ValueError(f"expected trailing dimension {self.space.dim}, got shape {x.shape}")
        return x

    def energy(self, x) -> np.ndarray:
        return self._energy(self._check(x))

    def gradient(self, x) -> np.ndarray:
        x = self._check(x)
        g = self._gradient(x)
        if self.space.kind == "one-hot" and g.shape[-1] == self.space.extended_dim:
            g = g.reshape(*x.shape, self.space.levels)
        return g

    def log_probs(self, states: np.ndarray, beta: float = 1.0) -> np.ndarray:
        """Normalized ``log pi^beta`` over an explicit list of states."""
        u = beta * self.energy(states)
        return u - logsumexp(u)


class FunctionModel(EnergyModel):
    """Wraps plain callables; handy for ad-hoc targets in tests and demos."""

    def __init__(self, space: DiscreteSpace, energy_fn, gradient_fn):
        self.space = space
        self._efn = energy_fn
        self._gfn = gradient_fn

    def _energy(self, x):
        return np.asarray(self._efn(np.asarray(x, dtype=float)), dtype=float)

    def _gradient(self, x):
        return np.asarray(self._gfn(np.asarray(x, dtype=float)), dtype=float)


class LogQuadraticModel(EnergyModel):
    """``U(x) = z^T W z + b^T z`` with ``z`` the (expanded) state vector."""

    def __init__(self, space: DiscreteSpace, W, b):
        W = np.asarray(W, dtype=float)
        b = np.asarray(b, dtype=float)
        n = space.extended_dim
        if W.shape != (n, n) or b.shape != (n,):
            raise ValueError(f"W must be {n}x{n} and b length {n}")
        self.space = space
        self.W = 0.5 * (W + W.T)
        self.b = b

    def _energy(self, x):
        z = self.space.expand(x)
        return np.einsum("...i,ij,...j->...", z, self.W, z) + z @ self.b

    def _gradient(self, x):
        z = self.space.expand(x)
        return 2.0 * z @ self.W + self.b


class RbmModel(EnergyModel):
    """Binary RBM with hidden units summed out.

    ``U(x) = sum_i softplus(W x + a)_i + b^T x`` where ``W`` is
    ``(n_hidden, n_visible)``, ``a`` the hidden bias and ``b`` the visible bias.
    """

    def __init__(self, W, a, b):
        W = np.atleast_2d(np.asarray(W, dtype=float))
        a = np.asarray(a, dtype=float).reshape(-1)
        b = np.asarray(b, dtype=float).reshape(-1)
        if W.shape != (a.size, b.size):
            raise ValueError(f"inconsistent RBM shapes W{W.shape}, a{a.shape}, b{b.shape}")
        self.W, self.a, self.b = W, a, b
        self.space = DiscreteSpace.binary(b.size)

    @property
    def n_hidden(self) -> int:
        return self.a.size

    @property
    def n_visible(self) -> int:
        return self.b.size

    @classmethod
    def random(cls, n_hidden, n_visible, rng, scale=1.0):
        return cls(
            scale * rng.normal(size=(n_hidden, n_visible)),
            scale * rng.normal(size=n_hidden),
            scale * rng.normal(size=n_visible),
        )

    def hidden_logits(self, x):
        return np.asarray(x, dtype=float) @ self.W.T + self.a

    def _energy(self, x):
        return softplus(self.hidden_logits(x)).sum(-1) + np.asarray(x, dtype=float) @ self.b

    def _gradient(self, x):
        return expit(self.hidden_logits(x)) @ self.W + self.b

    def params(self) -> dict:
        return {"W": self.W, "a": self.a, "b": self.b}

    def save(self, path):
        """Write the JSON parameter file (``n_hidden``, ``n_visible``, row-major ``W``, ``a``, ``b``)."""
        doc = {
            "n_hidden": self.n_hidden,
            "n_visible": self.n_visible,
            "W": self.W.reshape(-1).tolist(),
            "a": self.a.tolist(),
            "b": self.b.tolist(),
        }
        Path(path).write_text(json.dumps(doc, indent=1))

    @classmethod
    def load(cls, path) -> "RbmModel":
        doc = json.loads(Path(path).read_text())
        nh, nv = int(doc["n_hidden"]), int(doc["n_visible"])
        W = np.asarray(doc["W"], dtype=float)
        if W.size != nh * nv:
            raise ValueError(f"W has {W.size} entries, expected {nh}x{nv}")
        return cls(W.reshape(nh, nv), doc["a"], doc["b"])


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    mean: np.ndarray
    cov: np.ndarray
    dof: float | None = None


class GridMixtureModel(EnergyModel):
    """A 2-D Gaussian or Student-t mixture discretized on a ``cells x cells`` grid.

    The state is the pair of integer cell indices.  Its real extension maps an
    index ``t`` on axis ``j`` to ``lo_j + (t + 0.5) * h_j``, so energies are the
    continuous mixture log-density at cell centers and gradients are the
    analytic density gradient scaled by the cell width.
    """

    def __init__(self, components, bounds=((-1.0, 1.0), (-1.0, 1.0)), cells=100, family="mog"):
        if family not in ("mog", "mos"):
            raise ValueError("family must be 'mog' or 'mos'")
        weights = np.array([c.weight for c in components], dtype=float)
        if np.any(weights <= 0) or not np.isclose(weights.sum(), 1.0):
            raise ValueError("mixture weights must be positive and sum to 1")
        covs = np.array([np.asarray(c.cov, dtype=float) for c in components])
        if not np.allclose(covs, np.swapaxes(covs, -1, -2)):
            raise ValueError("covariances must be symmetric")
        if np.any(np.linalg.eigvalsh(covs) <= 0):
            raise ValueError("covariances must be positive definite")
        dofs = None
        if family == "mos":
            dofs = np.array([c.dof for c in components], dtype=float)
            if np.any(~(dofs > 0)):
                raise ValueError("Student-t components need dof > 0")
        self.family = family
        self.components = list(components)
        self.weights = weights
        self.means = np.array([np.asarray(c.mean, dtype=float) for c in components])
        self.covs = covs
        self.precisions = np.linalg.inv(covs)
        self.dofs = dofs
        self.bounds = np.asarray(bounds, dtype=float)
        self.cells = int(cells)
        self.cell_width = (self.bounds[:, 1] - self.bounds[:, 0]) / self.cells
        self.space = DiscreteSpace.ordinal(2, self.cells - 1)
        _, logdet = np.linalg.slogdet(covs)
        if family == "mog":
            self._lognorm = -0.5 * logdet - np.log(2 * np.pi)
        else:
            nu = dofs
            self._lognorm = gammaln((nu + 2) / 2) - gammaln(nu / 2) - np.log(nu * np.pi) - 0.5 * logdet

    def to_coords(self, x):
        return self.bounds[:, 0] + (np.asarray(x, dtype=float) + 0.5) * self.cell_width

    def _component_terms(self, x):
        """Per-component ``log(w_k f_k(c))`` and ``grad_c log f_k(c)``."""
        c = self.to_coords(x)
        diff = c[..., None, :] - self.means
        prec_diff = np.einsum("kij,...kj->...ki", self.precisions, diff)
        maha = np.einsum("...ki,...ki->...k", diff, prec_diff)
        if self.family == "mog":
            logf = self._lognorm - 0.5 * maha
            dlogf = -prec_diff
        else:
            nu = self.dofs
            logf = self._lognorm - 0.5 * (nu + 2) * np.log1p(maha / nu)
            dlogf = -((nu + 2) / (nu + maha))[..., None] * prec_diff
        return np.log(self.weights) + logf, dlogf

    def _energy(self, x):
        logwf, _ = self._component_terms(x)
        return logsumexp(logwf, axis=-1)

    def _gradient(self, x):
        logwf, dlogf = self._component_terms(x)
        resp = np.exp(logwf - logsumexp(logwf, axis=-1, keepdims=True))
        return np.einsum("...k,...ki->...i", resp, dlogf) * self.cell_width

    def mode_posteriors(self, x) -> np.ndarray:
        """Component responsibilities ``p(k | x)`` at the cell centers of ``x``."""
        logwf, _ = self._component_terms(self._check(x))
        return np.exp(logwf - logsumexp(logwf, axis=-1, keepdims=True))

    def grid_states(self) -> np.ndarray:
        ii, jj = np.meshgrid(np.arange(self.cells), np.arange(self.cells), indexing="ij")
        return np.stack([ii.ravel(), jj.ravel()], axis=-1)

    def table(self) -> np.ndarray:
        """Normalized probabilities of all ``cells**2`` states in lexicographic order."""
        logp = self.log_probs(self.grid_states())
        return np.exp(logp)

    @classmethod
    def ring(cls, n_components, family="mog", radius=0.6, scale=0.06, dof=3.0, cells=100,
             bounds=((-1.0, 1.0), (-1.0, 1.0)), weights=None):
        """Equal-covariance components evenly spaced on a circle."""
        angles = 2 * np.pi * np.arange(n_components) / n_components
        if weights is None:
            weights = np.full(n_components, 1.0 / n_components)
        comps = [
            MixtureComponent(
                float(w),
                radius * np.array([np.cos(t), np.sin(t)]),
                scale**2 * np.eye(2),
                dof if family == "mos" else None,
            )
            for w, t in zip(weights, angles)
        ]
        return cls(comps, bounds=bounds, cells=cells, family=family)


class ItemSumModel(EnergyModel):
    """``U(x) = sum_n e(x, item_n)`` over a dataset of items.

    ``item_energy(X, items)`` must return shape ``(..., m)`` and
    ``item_gradient(X, items)`` shape ``(..., m, dim)`` for ``X`` of shape
    ``(..., dim)`` and ``m`` items.
    """

    def __init__(self, space: DiscreteSpace, items, item_energy, item_gradient):
        items = np.asarray(items)
        if len(items) == 0:
            raise ValueError("dataset is empty")
        self.space = space
        self.items = items
        self.item_energy = item_energy
        self.item_gradient = item_gradient

    @property
    def n_items(self) -> int:
        return len(self.items)

    def energy_on(self, x, idx):
        return np.asarray(self.item_energy(np.asarray(x, dtype=float), self.items[idx])).sum(-1)

    def gradient_on(self, x, idx):
        return np.asarray(self.item_gradient(np.asarray(x, dtype=float), self.items[idx])).sum(-2)

    def _energy(self, x):
        return self.energy_on(x, slice(None))

    def _gradient(self, x):
        return self.gradient_on(x, slice(None))


@dataclass
class VarianceWindow:
    """Sliding window of variance estimates for a stochastic energy.

    Holds either within-batch variance estimates (batch size >= 2) or raw
    estimator draws taken at one state (batch size 1).
    """

    size: int = 32
    values: deque = field(default_factory=deque)
    _state_key: bytes | None = None
    _draws: deque = field(default_factory=deque)

    def push_estimate(self, v: float):
        self.values.append(float(v))
        while len(self.values) > self.size:
            self.values.popleft()

    def push_draw(self, x, u: float):
        key = np.asarray(x).tobytes()
        if key != self._state_key:
            self._state_key = key
            self._draws.clear()
        self._draws.append(float(u))
        while len(self._draws) > self.size:
            self._draws.popleft()
        if len(self._draws) >= 2:
            self.push_estimate(np.var(self._draws, ddof=1))

    @property
    def value(self) -> float:
        return float(np.mean(self.values)) if self.values else 0.0


class MiniBatchEnergy:
    """Unbiased mini-batch estimates of an :class:`ItemSumModel` and its gradient."""

    def __init__(self, base: ItemSumModel, batch_size: int, window: int = 32):
        if base.n_items == 0:
            raise ValueError("dataset is empty")
        if not 1 <= batch_size <= base.n_items:
            raise ValueError("batch_size must be in [1, n_items]")
        self.base = base
        self.batch_size = int(batch_size)
        self.window = VarianceWindow(window)

    @property
    def space(self):
        return self.base.space

    @property
    def scale(self) -> float:
        return self.base.n_items / self.batch_size

    def draw_batch(self, rng) -> np.ndarray:
        return np.sort(rng.choice(self.base.n_items, size=self.batch_size, replace=False))

    def energy_on(self, x, idx):
        return self.scale * self.base.energy_on(x, idx)

    def gradient_on(self, x, idx):
        return self.scale * self.base.gradient_on(x, idx)

    def within_batch_variance(self, x, idx) -> np.ndarray:
        """Unbiased estimate of ``Var(U_tilde)`` from the batch spread.

        Uses the finite-population correction, so it is exactly zero for a full batch.
        """
        n, N = self.batch_size, self.base.n_items
        if n < 2:
            return np.full(np.shape(x)[:-1], np.nan)
        e = np.asarray(self.base.item_energy(np.asarray(x, dtype=float), self.base.items[idx]))
        s2 = e.var(axis=-1, ddof=1)
        return N**2 * (1.0 - n / N) * s2 / n

    def minibatch_estimates(self, x, rng, window: VarianceWindow | None = None):
        """Return ``(U_tilde, grad_U_tilde, sigma_sq_hat)`` at a single state ``x``."""
        window = self.window if window is None else window
        x = self.base._check(x)
        idx = self.draw_batch(rng)
        u = float(self.energy_on(x, idx))
        g = self.gradient_on(x, idx)
        if self.batch_size >= 2:
            window.push_estimate(float(self.within_batch_variance(x, idx)))
        else:
            window.push_draw(x, u)
        return u, g, window.value
