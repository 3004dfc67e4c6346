"""
Approach to the Porter-Thomas distribution
==========================================

The output probabilities of a deep random circuit follow
P(p < rho) = 1 - (1 - rho)^(2^N - 1). The Kolmogorov-Smirnov distance to this
law shrinks with depth until it reaches the finite-size floor set by the
2^N sampled values themselves.
"""

from __future__ import annotations

import numpy as np

from noisy_mps import brick_1d, simulate
from noisy_mps.metrics import porter_thomas_distance

n = 12
for depth in (2, 8, 24, 64):
    p = simulate(brick_1d(n, depth, seed=0)).probabilities()
    print(f"D={depth:3d}  KS distance {porter_thomas_distance(p, n):.4f}")

# the same statistic for exact Haar-random probabilities of the same size
haar = np.random.default_rng(0).dirichlet(np.ones(2**n))
print(f"Haar    KS distance {porter_thomas_distance(haar, n):.4f}")
