"""Temperature-ladder tuning from pilot runs.

A pilot run gives mean swap probabilities ``s_k`` between adjacent chains.  The
cumulative rejection ``sum(1 - s_k)`` read from the hottest chain upward is an
estimate of the communication barrier as a function of ``beta``; a monotone
cubic interpolant of it is inverted to put equal barrier between neighbours.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .tempering import ReplicaEnsemble, geometric_betas

BISECTION_TOL = 1e-12
DEFAULT_BETA_MIN = 0.05


class NoCommunicationError(RuntimeError):
    """All pilot swap probabilities are zero."""


class BarrierCurve:
    """Monotone interpolant through the knots ``(beta, Lambda(beta))`` (beta ascending)."""

    def __init__(self, betas, barrier):
        betas = np.asarray(betas, dtype=float)
        barrier = np.asarray(barrier, dtype=float)
        if betas.shape != barrier.shape or betas.size < 2:
            raise ValueError("need at least two knots")
        if np.any(np.diff(betas) <= 0):
            raise ValueError("knot betas must be strictly increasing")
        if np.any(np.diff(barrier) < 0):
            raise ValueError("barrier values must be nondecreasing")
        self.betas = betas
        self.barrier = barrier
        self._interp = PchipInterpolator(betas, barrier, extrapolate=False)

    @property
    def knots(self):
        return list(zip(self.betas.tolist(), self.barrier.tolist()))

    @property
    def beta_min(self) -> float:
        return float(self.betas[0])

    @property
    def beta_max(self) -> float:
        return float(self.betas[-1])

    @property
    def total(self) -> float:
        return float(self.barrier[-1] - self.barrier[0])

    def __call__(self, beta):
        beta = np.asarray(beta, dtype=float)
        if np.any(beta < self.beta_min) or np.any(beta > self.beta_max):
            raise ValueError(f"beta outside knot range [{self.beta_min}, {self.beta_max}]")
        return self._interp(beta)


class FunctionCurve:
    """A barrier curve given by an explicit nondecreasing function on ``[beta_min, 1]``."""

    def __init__(self, fn, beta_min=0.0, beta_max=1.0):
        self.fn = fn
        self.beta_min = float(beta_min)
        self.beta_max = float(beta_max)

    @property
    def total(self) -> float:
        return float(self.fn(self.beta_max) - self.fn(self.beta_min))

    def __call__(self, beta):
        return self.fn(beta)


def estimate_barrier(acceptances, betas) -> BarrierCurve:
    """Knots from per-pair mean swap probabilities.

    ``betas`` is the decreasing ladder ``1 = b_1 > ... > b_K`` and
    ``acceptances[k]`` belongs to the pair ``(b_k, b_{k+1})``.
    """
    betas = np.asarray(betas, dtype=float)
    s = np.asarray(acceptances, dtype=float)
    if betas.size < 2:
        raise ValueError("barrier estimation needs at least 2 chains")
    if s.shape != (betas.size - 1,):
        raise ValueError("need one acceptance rate per adjacent pair")
    if np.any((s < 0) | (s > 1)) or not np.all(np.isfinite(s)):
        raise ValueError("acceptance rates must lie in [0, 1]")
    # Lambda(b_j) = sum_{k >= j} (1 - s_k), zero at the hottest chain
    lam = np.concatenate([np.cumsum((1.0 - s)[::-1])[::-1], [0.0]])
    return BarrierCurve(betas[::-1], lam[::-1])


def pchip_eval(curve: BarrierCurve, beta: float) -> float:
    return float(curve(beta))


def _bisect(curve, target, lo, hi):
    flo = curve(lo)
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if curve(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi) if flo < target else lo


def solve_schedule(curve, K: int) -> np.ndarray:
    """Ladder of ``K`` betas with equal barrier between neighbours.

    ``beta_1 = 1`` (the top of the curve), ``beta_K`` the bottom, and
    ``Lambda(beta_k) - Lambda(beta_min) = total * (K - k) / (K - 1)`` in between.
    """
    if K < 2:
        raise ValueError("K must be >= 2")
    lo, hi = curve.beta_min, curve.beta_max
    base = float(curve(lo))
    total = float(curve(hi)) - base
    if total < 0:
        raise ValueError("barrier curve is not monotone")
    if total <= 1e-12:
        # flat landscape: every ladder is equally good
        return np.linspace(hi, lo, K)
    betas = np.empty(K)
    betas[0], betas[-1] = hi, lo
    for k in range(1, K - 1):
        target = base + total * (K - 1 - k) / (K - 1)
        betas[k] = _bisect(curve, target, lo, hi)
    if np.any(np.diff(betas) >= 0):
        raise ValueError("barrier curve is not monotone; cannot bracket the schedule")
    return betas


def optimal_chain_count(Lambda: float) -> int:
    """``max(2, round(2 Lambda + 1))``."""
    if Lambda < 0:
        raise ValueError("Lambda must be >= 0")
    return max(2, int(round(2.0 * Lambda + 1.0)))


def optimal_copies(K_total: int, K_star: int) -> int:
    if K_star < 2 or K_total < K_star:
        raise ValueError("need K_total >= K_star >= 2")
    return K_total // K_star


def round_trip_rate(s, copies: int = 1) -> float:
    """``copies / sum(1 / s_k)``; zero if any pair never swaps."""
    s = np.asarray(s, dtype=float)
    if np.any((s < 0) | (s > 1)):
        raise ValueError("swap rates must lie in [0, 1]")
    if np.any(s == 0):
        return 0.0
    return copies / float(np.sum(1.0 / s))


def equal_barrier_rate(Lambda: float, K: int, copies: int = 1) -> float:
    """Round-trip rate of ``copies`` ensembles on an equal-barrier ladder of ``K`` chains.

    Each of the ``K - 1`` pairs then has ``s = 1 - Lambda / (K - 1)``, giving
    ``copies * (K - 1 - Lambda) / (K - 1)**2``.
    """
    if K < 2:
        return 0.0
    s = 1.0 - Lambda / (K - 1)
    if s <= 0:
        return 0.0
    return round_trip_rate(np.full(K - 1, s), copies)


@dataclass
class TuningReport:
    rounds: int
    barriers: list = field(default_factory=list)
    schedules: list = field(default_factory=list)
    acceptances: list = field(default_factory=list)
    betas: list = field(default_factory=list)
    K_star: int = 2
    B_star: int = 1
    converged: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def pilot_swap_rates(model, betas, *, alphas=0.2, p=2.0, adjusted=True, steps=1000, copies=1,
                     seed=None, x0=None) -> np.ndarray:
    """Mean ``min{1, s_k}`` per pair from a pilot run with ``rho = 1``."""
    ens = ReplicaEnsemble(model, betas, alphas, x0, p=p, rho=1.0, adjusted=adjusted,
                          copies=copies, seed=seed)
    for _ in range(steps // 10):
        ens.step()
    ens.pair_attempts[:] = 0
    ens.pair_prob_sum[:] = 0
    ens.pair_accepts[:] = 0
    for _ in range(steps):
        ens.step()
    return ens.mean_swap_prob


def tune(model, initial_schedule=None, pilot_steps: int = 1000, max_rounds: int = 10, tol: float = 0.05,
         seed=None, *, alphas=0.2, p=2.0, adjusted=True, K_total=None, beta_min=DEFAULT_BETA_MIN,
         pilot=None):
    """Iterate pilot run -> barrier fit -> re-solved ladder until the barrier settles.

    ``pilot(betas, round_seed) -> swap rates`` may replace the built-in pilot
    run (used for mocked acceptance curves).  Returns ``(betas, K_star, B_star, report)``.
    """
    if pilot_steps < 100:
        raise ValueError("pilot_steps must be >= 100")
    betas = geometric_betas(5, beta_min) if initial_schedule is None else np.asarray(initial_schedule, float)
    if betas.size < 2 or betas[0] != 1.0 or np.any(np.diff(betas) >= 0):
        raise ValueError("initial schedule must be strictly decreasing from 1 with K >= 2")
    K = betas.size
    seeds = np.random.SeedSequence(seed).spawn(max_rounds)
    if pilot is None:
        def pilot(b, ss):
            return pilot_swap_rates(model, b, alphas=alphas, p=p, adjusted=adjusted,
                                    steps=pilot_steps, seed=ss)

    report = TuningReport(rounds=0)
    lam_prev = 0.0
    curve = None
    for r in range(max_rounds):
        s = np.asarray(pilot(betas, seeds[r]), dtype=float)
        if np.all(s == 0):
            raise NoCommunicationError("no communication between chains; widen the schedule")
        curve = estimate_barrier(s, betas)
        lam = curve.total
        report.rounds = r + 1
        report.schedules.append(betas.tolist())
        report.acceptances.append(s.tolist())
        report.barriers.append(lam)
        betas = solve_schedule(curve, K)
        if abs(lam - lam_prev) < tol:
            report.converged = True
            break
        lam_prev = lam
    K_star = optimal_chain_count(curve.total)
    final = solve_schedule(curve, K_star)
    B_star = 1 if K_total is None else optimal_copies(int(K_total), K_star)
    report.betas = final.tolist()
    report.K_star = K_star
    report.B_star = B_star
    return final, K_star, B_star, report


def grid_optimal_K(Lambda: float, K_max: int = 200) -> int:
    """Brute-force maximizer of :func:`equal_barrier_rate` over ``K = 2..K_max``."""
    Ks = np.arange(2, K_max + 1)
    rates = [equal_barrier_rate(Lambda, int(k)) for k in Ks]
    return int(Ks[int(np.argmax(rates))])
