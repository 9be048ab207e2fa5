"""
Particle count sweep
====================

Terminal laws for growing N are compared with the largest ensemble in W2.
"""

from levymv import poc_sweep, scheme, volatility32

for n, w2 in poc_sweep(volatility32(), scheme("tanh"), [50, 100, 200, 400, 800], 2 ** 8,
                       master_seed=2024):
    print(f"N={n:4d}  W2 to N=800: {w2:.4f}")
