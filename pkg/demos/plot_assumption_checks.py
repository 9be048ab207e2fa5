"""
Sampled checks of the structural assumptions
============================================

Monotonicity and growth are tested on random point pairs; the dissipativity
constants are closed-form.  Raising d2 in the double-well model breaks one.
"""

import numpy as np

from levymv import (certify, double_well, operator, sign_constants, verify_growth,
                    verify_monotonicity, volatility32)

rng = np.random.default_rng(0)
for model in (volatility32(), double_well(), double_well(d2=1.9)):
    d = model.declared
    print(f"-- {model.name} {model.params}")
    print(verify_monotonicity(model, d["mono_eta"], d["mono_C"], num_samples=20_000, stream=rng).line())
    print(verify_growth(model, d["growth_gamma"], d["growth_C"], num_samples=20_000, stream=rng).line())
    for label, value in sign_constants(model):
        print(f"   {label} = {value:.6g}")

# the taming operators themselves
for kind, (bound, diff) in certify([operator(k) for k in ("tanh", "tame", "sine")],
                                   num_samples=20_000).items():
    print(f"{kind:5s} bound violation={bound.max_violation:.3g} diff violation={diff.max_violation:.3g}")
