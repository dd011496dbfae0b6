"""Exact ensemble kernels on a four-bit model.

Everything here is computed by enumeration: the one-step kernel of two
replicas, its fixed point, how fast total variation decays from a point mass
and how the unadjusted sampler's bias depends on the step size.

    python demos/exact_kernels.py
"""

import numpy as np

from ptdlp.benchmarks import two_mode_binary
from ptdlp.oracle import (detailed_balance_residual, exact_local_kernel, exact_pt_kernel, marginal, point_mass,
                          product_target, stationarity_residual, stationary_distribution, tempered_target, tv,
                          tv_curve)
from ptdlp.proposal import ChainParams

model = two_mode_binary(4, 1.5, 0.2)
pi = tempered_target(model)
betas = [1.0, 0.5]

for rule in ("tailored", "standard"):
    P = exact_pt_kernel(model, betas, 0.5, swap_rule=rule)
    target = product_target(model, betas)
    stat = stationary_distribution(P)
    print(f"{rule:9s} swap: stationarity residual {stationarity_residual(P, target):.2e}, "
          f"detailed balance residual {detailed_balance_residual(P, target):.2e}, "
          f"cold-chain TV to pi {tv(marginal(stat, 16, 2, 0), pi):.2e}")

single = exact_local_kernel(model, ChainParams(1.0, 0.5), adjusted=True)
pt = exact_pt_kernel(model, betas, 0.5)
a = tv_curve(single, point_mass(0, 16), 200)
b = tv_curve(pt, point_mass(0, pt.size), 200)
for n in (1, 10, 50, 200):
    print(f"step {n:3d}: TV single chain {a[n - 1]:.3e}, two replicas {b[n - 1]:.3e}")

for alpha in (1.0, 0.5, 0.25, 0.1):
    stat = stationary_distribution(exact_pt_kernel(model, betas, alpha, adjusted=False))
    print(f"unadjusted, alpha={alpha:<4}: TV of cold marginal to pi {tv(marginal(stat, 16, 2, 0), pi):.4f}")
