"""Sample-quality metrics: RFF-approximated MMD, forward KL and entropic mode coverage."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

DEFAULT_FEATURES = 4096
LOG_MMD_FLOOR = 1e-12


def _as_samples(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("sample set must be a non-empty (n, d) array")
    return X


def median_heuristic(X, max_points: int = 2000, rng=None) -> float:
    """Median pairwise Euclidean distance (on a random subset if ``X`` is large)."""
    X = _as_samples(X)
    if X.shape[0] > max_points:
        rng = np.random.default_rng(rng)
        X = X[rng.choice(X.shape[0], max_points, replace=False)]
    d = pdist(X)
    d = d[d > 0]
    return float(np.median(d)) if d.size else 1.0


@dataclass(frozen=True)
class RffFeatureMap:
    """``phi(x) = sqrt(2/D) cos(W x + b)`` approximating ``exp(-|x-y|^2 / (2 sigma^2))``."""

    W: np.ndarray  # (D, d)
    b: np.ndarray  # (D,)
    sigma: float

    @classmethod
    def create(cls, dim: int, n_features: int = DEFAULT_FEATURES, sigma: float = 1.0, seed=None):
        if n_features < 1:
            raise ValueError("n_features must be >= 1")
        if not sigma > 0:
            raise ValueError("sigma must be > 0")
        rng = np.random.default_rng(seed)
        W = rng.normal(scale=1.0 / sigma, size=(n_features, dim))
        b = rng.uniform(0.0, 2 * np.pi, size=n_features)
        return cls(W, b, float(sigma))

    @property
    def n_features(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    def __call__(self, X) -> np.ndarray:
        X = _as_samples(X)
        if X.shape[1] != self.dim:
            raise ValueError(f"samples have dimension {X.shape[1]}, map expects {self.dim}")
        return np.sqrt(2.0 / self.n_features) * np.cos(X @ self.W.T + self.b)

    def mean_embedding(self, X, chunk: int = 8192) -> np.ndarray:
        X = _as_samples(X)
        acc = np.zeros(self.n_features)
        for i in range(0, X.shape[0], chunk):
            acc += self(X[i:i + chunk]).sum(0)
        return acc / X.shape[0]


def mmd_rff(X, Y, feature_map: RffFeatureMap) -> float:
    """Squared MMD estimate ``||mean phi(X) - mean phi(Y)||^2``."""
    X, Y = _as_samples(X), _as_samples(Y)
    if X.shape[1] != Y.shape[1]:
        raise ValueError("sample sets have different dimensions")
    diff = feature_map.mean_embedding(X) - feature_map.mean_embedding(Y)
    return float(diff @ diff)


def log_mmd(mmd_sq: float) -> float:
    """Natural log of the squared MMD, floored at ``1e-12``."""
    return float(np.log(max(mmd_sq, LOG_MMD_FLOOR)))


def empirical_probs(sample_indices, n_cells: int, smoothing: float = 0.0) -> np.ndarray:
    counts = np.bincount(np.asarray(sample_indices, dtype=np.int64), minlength=n_cells).astype(float)
    if counts.size > n_cells:
        raise ValueError("sample index outside the support")
    return (counts + smoothing) / (counts.sum() + smoothing * n_cells)


def forward_kl(target_probs, sample_indices, smoothing: float = 0.5) -> float:
    """``KL(pi || pi_hat)`` in nats, ``pi_hat`` the smoothed histogram of the samples.

    ``sample_indices`` are positions of the samples in the enumeration of the
    support that ``target_probs`` is tabulated on.
    """
    pi = np.asarray(target_probs, dtype=float).ravel()
    if np.any(pi < 0) or not np.isclose(pi.sum(), 1.0, atol=1e-9):
        raise ValueError("target probabilities must be normalized")
    if smoothing < 0:
        raise ValueError("smoothing must be >= 0")
    q = empirical_probs(sample_indices, pi.size, smoothing)
    nz = pi > 0
    with np.errstate(divide="ignore"):
        return float(np.sum(pi[nz] * (np.log(pi[nz]) - np.log(q[nz]))))


def emc(samples, mode_posteriors) -> float:
    """Entropic mode coverage: mean base-``M`` entropy of per-sample mode posteriors.

    ``mode_posteriors`` is either a callable ``x -> (n, M)`` or a ready ``(n, M)`` array.
    """
    P = np.asarray(mode_posteriors(samples) if callable(mode_posteriors) else mode_posteriors, dtype=float)
    if P.ndim != 2:
        raise ValueError("posteriors must have shape (n, M)")
    M = P.shape[1]
    if M < 2:
        raise ValueError("EMC needs at least 2 modes")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(P), 0.0)
    return float(-terms.sum(1).mean() / np.log(M))


def mode_coverage(samples, mode_posteriors) -> float:
    """Base-``M`` entropy of the average mode posterior: 1 when all modes get equal mass.

    A diagnostic reported next to :func:`emc`; it is not part of that definition.
    """
    P = np.asarray(mode_posteriors(samples) if callable(mode_posteriors) else mode_posteriors, dtype=float)
    q = P.mean(0)
    q = q[q > 0]
    return float(-(q * np.log(q)).sum() / np.log(P.shape[1]))


METRIC_FIELDS = ("metric", "value", "n_samples", "seed", "params")


def metric_row(metric: str, value: float, n_samples: int, seed, params: dict | None = None) -> dict:
    p = ";".join(f"{k}={v}" for k, v in sorted((params or {}).items()))
    return {"metric": metric, "value": repr(float(value)), "n_samples": int(n_samples),
            "seed": "" if seed is None else seed, "params": p}


def write_metric_rows(rows, stream=None) -> str:
    """CSV with header ``metric,value,n_samples,seed,params``; returns the text."""
    buf = io.StringIO() if stream is None else stream
    w = csv.DictWriter(buf, fieldnames=METRIC_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue() if stream is None else ""
