"""Tuning a temperature ladder from pilot swap rates.

The tuner fits a monotone barrier curve to the pilot acceptance rates, places
the inverse temperatures at equal barrier spacing and repeats until the total
barrier stops changing.  A validation run then checks that adjacent pairs
swap at roughly the same rate.

    python demos/tuning.py
"""

import numpy as np

from ptdlp.benchmarks import random_log_quadratic
from ptdlp.tempering import ReplicaEnsemble, round_trip_stats
from ptdlp.tuning import tune

model = random_log_quadratic(6, 1.0, seed=0)
betas, K_star, B_star, report = tune(model, None, 2000, 10, 0.05, seed=0, alphas=0.5, K_total=20)
for r, (lam, sched) in enumerate(zip(report.barriers, report.schedules)):
    print(f"round {r + 1}: barrier {lam:.3f}  schedule {np.round(sched, 3).tolist()}")
print(f"K* = {K_star}, copies B* = {B_star}, final ladder {np.round(betas, 3).tolist()}")

ens = ReplicaEnsemble(model, betas, 0.5, np.zeros(6, dtype=np.int64), copies=B_star, seed=1)
trace = ens.run(20_000)
print("validation swap acceptance:", np.round(ens.pair_acceptance, 3))
stats = round_trip_stats(trace.labels, ens.pair_attempts, ens.pair_accepts)
print(f"round trips {stats.count} over {B_star} copies, {stats.rate:.4f} per replica per step")
