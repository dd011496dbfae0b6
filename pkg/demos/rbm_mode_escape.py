"""Escaping from the dominant pattern of a two-pattern RBM.

The two favoured visible configurations are complementary, so a local sampler
has to cross a deep valley.  We count gradient evaluations until the cold
chain comes within Hamming distance 2 of the second pattern.

    python demos/rbm_mode_escape.py
"""

import numpy as np

from ptdlp.benchmarks import hitting_step, two_pattern_rbm
from ptdlp.tempering import ReplicaEnsemble, geometric_betas

rbm, p1, p2 = two_pattern_rbm(16, 4.0, 0.5)
print(f"U(p1) = {rbm.energy(p1):.2f}, U(p2) = {rbm.energy(p2):.2f}")


def cost_to_escape(betas, seed, max_steps):
    ens = ReplicaEnsemble(rbm, betas, 0.3, p1, seed=seed)
    for t in range(max_steps):
        ens.step()
        if hitting_step(ens.states[:, 0], p2) is not None:
            return ens.n_grad
    return None


for label, betas, cap in (("PT-DMALA K=4", geometric_betas(4, 0.1), 5000), ("DMALA", [1.0], 20000)):
    costs = [cost_to_escape(betas, s, cap) for s in range(5)]
    shown = ["-" if c is None else str(c) for c in costs]
    print(f"{label:13s} evaluations to reach p2: {', '.join(shown)}")
