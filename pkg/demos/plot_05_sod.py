"""
Sod shock tube
==============

First-order Roe with kernel-predicted central fluxes, classical Roe and a
MUSCL scheme on a grid clustered toward the diaphragm.  Errors are measured
against the exact Riemann solution.
"""

# %%

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from kbr import SolverConfig, run_simulation, shock_metrics
from kbr.baselines.euler import sod_exact
from kbr.metrics import SOD_WINDOWS
from kbr.baselines.euler import cons_to_prim

cfg = SolverConfig(t_end=0.15)
fig, ax = plt.subplots(figsize=(6, 3.5))
for problem in ("sod-roe-kbr", "sod-roe", "sod-muscl"):
    res = run_simulation(problem, cfg)
    x = res.grid.nodes
    rho = cons_to_prim(res.snapshots[-1])[0]
    exact = sod_exact(x, 0.15).rho
    m = shock_metrics(rho, exact, x, *SOD_WINDOWS["region1"])
    print(f"{problem:12s} L1 {m.l1:.3e}  Linf {m.linf:.3e}")
    ax.plot(x, rho, label=problem)
ax.plot(x, exact, "k-", lw=1, label="exact")
ax.legend()
fig.tight_layout()
fig.savefig("sod.svg")
