"""Factorized discrete domains.

States are plain integer numpy arrays of length ``dim``.  For one-hot spaces a
coordinate holds the category label (``0 .. levels-1``); the indicator
expansion is produced on demand with :meth:`DiscreteSpace.expand`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BINARY = "binary"
ORDINAL = "ordinal"
ONE_HOT = "one-hot"
_KINDS = (BINARY, ORDINAL, ONE_HOT)

DEFAULT_ENUMERATION_CAP = 2**20


class SpaceTooLargeError(ValueError):
    """Raised when a space is too large to enumerate."""


@dataclass(frozen=True)
class DiscreteSpace:
    """A product space ``Theta_1 x ... x Theta_d`` with identical factors.

    ``kind`` is one of ``"binary"``, ``"ordinal"`` or ``"one-hot"``.
    Ordinal coordinates take values ``0..levels`` (``levels + 1`` values);
    one-hot coordinates are ``levels``-way indicator groups.
    """

    kind: str
    dim: int
    levels: int = 1

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.kind == BINARY:
            object.__setattr__(self, "levels", 1)
        elif self.kind == ORDINAL and self.levels < 0:
            raise ValueError("ordinal spaces need levels >= 0")
        elif self.kind == ONE_HOT and self.levels < 1:
            raise ValueError("one-hot spaces need levels >= 1")

    @classmethod
    def binary(cls, dim: int) -> "DiscreteSpace":
        return cls(BINARY, dim)

    @classmethod
    def ordinal(cls, dim: int, levels: int) -> "DiscreteSpace":
        return cls(ORDINAL, dim, levels)

    @classmethod
    def one_hot(cls, dim: int, levels: int) -> "DiscreteSpace":
        return cls(ONE_HOT, dim, levels)

    @property
    def n_values(self) -> int:
        """Number of values a single coordinate can take."""
        if self.kind == BINARY:
            return 2
        if self.kind == ORDINAL:
            return self.levels + 1
        return self.levels

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.n_values)

    @property
    def n_states(self) -> int:
        return self.n_values**self.dim

    @property
    def extended_dim(self) -> int:
        """Length of the real vector the energy is differentiated against."""
        return self.dim * self.levels if self.kind == ONE_HOT else self.dim

    def contains(self, x) -> bool:
        x = np.asarray(x)
        if x.shape[-1:] != (self.dim,):
            return False
        if not np.all(np.equal(np.mod(x, 1), 0)):
            return False
        return bool(np.all((x >= 0) & (x < self.n_values)))

    def validate(self, x) -> np.ndarray:
        x = np.asarray(x)
        if not self.contains(x):
            raise ValueError(f"state {x!r} is not in {self}")
        return x.astype(np.int64)

    def expand(self, x) -> np.ndarray:
        """Real-vector representation used by energies (one-hot expansion)."""
        x = np.asarray(x)
        if self.kind != ONE_HOT:
            return x.astype(float)
        return np.eye(self.levels)[x].reshape(*x.shape[:-1], self.extended_dim)

    def index_of(self, x) -> np.ndarray:
        """Lexicographic index of state(s); the last coordinate varies fastest."""
        x = np.asarray(x, dtype=np.int64)
        weights = self.n_values ** np.arange(self.dim - 1, -1, -1, dtype=np.int64)
        return x @ weights

    def state_at(self, index) -> np.ndarray:
        index = np.asarray(index, dtype=np.int64)
        out = np.empty(index.shape + (self.dim,), dtype=np.int64)
        rem = index.copy()
        for i in range(self.dim - 1, -1, -1):
            out[..., i] = rem % self.n_values
            rem = rem // self.n_values
        return out

    def random_state(self, rng: np.random.Generator, size=None) -> np.ndarray:
        shape = (self.dim,) if size is None else tuple(np.atleast_1d(size)) + (self.dim,)
        return rng.integers(0, self.n_values, size=shape)


def enumerate_states(space: DiscreteSpace, cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """All states of ``space`` in lexicographic order, shape ``(n_states, dim)``."""
    # compare in log space: n_values**dim can overflow int64 for big spaces
    if space.dim * np.log(space.n_values) > np.log(cap) + 1e-12:
        raise SpaceTooLargeError(
            f"space too large to enumerate: {space.n_values}^{space.dim} states exceeds cap {cap}"
        )
    return space.state_at(np.arange(space.n_states))
