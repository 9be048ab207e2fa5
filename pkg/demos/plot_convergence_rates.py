"""
Strong error against step size
==============================

Errors of coarse runs are measured against the finest grid with the same
noise.  A geometric Brownian motion gives the textbook order 1/2; the
volatility model is printed alongside for comparison.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from levymv import convergence_study, custom_model, scheme, volatility32

factors = [2 ** k for k in range(4, 9)]
gbm = custom_model("0.5 * y", "0.8 * y", x0=1.0, name="gbm")

fig, ax = plt.subplots()
for model in (gbm, volatility32()):
    for name in ("tanh", "tame"):
        records, fit = convergence_study(model, scheme(name), 2 ** 12, factors, N=200,
                                         repetitions=4, master_seed=2024)
        print(f"{model.name:12s} {name:5s} slope={fit.slope:.3f} r2={fit.r_squared:.3f}")
        ax.loglog([r.dt for r in records], [r.rmse for r in records], "o-", base=2,
                  label=f"{model.name} {name}")

ax.set_xlabel("dt")
ax.set_ylabel("RMSE at T")
ax.legend()
fig.savefig("convergence_rates.png")
