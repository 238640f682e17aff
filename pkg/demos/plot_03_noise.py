"""
Derivatives of noisy data
=========================

Multiplicative Gaussian noise is added to the samples.  At low noise the two
kernel schemes are close; at the largest level the implicit one is
usually ahead.  A smoothing spline with the residual budget N sigma^2 is
shown for reference.
"""

# %%

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from kbr import noise_study

levels = [0.0, 0.01, 0.02, 0.05]
rows = noise_study("camel1d", 501, levels, seed=0, n_test=2000)

fig, ax = plt.subplots(figsize=(5, 3.5))
for scheme in ("explicit", "implicit", "spline"):
    sel = [r for r in rows if r["scheme"] == scheme]
    ax.plot([r["s"] for r in sel], [r["rmse_grad"] for r in sel], "o-", label=scheme)
    print(scheme, [f"{r['rmse_grad']:.3g}" for r in sel])
ax.set_yscale("log")
ax.set_xlabel("noise scale s")
ax.set_ylabel("RMSE of the gradient")
ax.legend()
fig.tight_layout()
fig.savefig("noise.svg")
