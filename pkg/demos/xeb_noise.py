"""
Cross-entropy benchmarking of noisy gates
=========================================

Every two-qubit gate is replaced by a slightly wrong unitary with a chosen
average fidelity f. Past the scrambling depth D*, the linear XEB B tracks the
true fidelity F, and both decay at the same rate per gate.
"""

from __future__ import annotations

from noisy_mps.harness import noisy_xeb_experiment

curves = noisy_xeb_experiment(10, 40, [0.99, 0.98], seeds=range(4), two_q="iS")
for c in curves:
    print(f"f={c.f_target}: D*={c.d_star}  rate F={c.rate_F:.4f}  rate B={c.rate_B:.4f}  mismatch {c.rate_mismatch:.1%}")
    for d, F, B in list(zip(c.depths, c.F, c.B))[c.d_star :: 8]:
        print(f"    D={d:3d}  F={F:.3f}  B={B:.3f}")
