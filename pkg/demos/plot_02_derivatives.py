"""
Gradient and Laplacian from scattered samples
==============================================

Both derivative schemes run on the same fitted model.  A nearest-node
finite-difference estimate serves as the reference.
"""

# %%

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from kbr import TrainingSet, explicit_field, fit_theta, get_function, implicit_field
from kbr.baselines.fd import fd_derivatives

fn = get_function("camel1d")
rng = np.random.default_rng(1)
x = np.sort(rng.uniform(0, 1, 501))
model = fit_theta(TrainingSet(x, fn(x)))

xq = np.sort(rng.uniform(x[1], x[-2], 300))
ex = explicit_field(model, xq)
im = implicit_field(model, xq)
g_fd, l_fd = fd_derivatives(x, fn(x), xq)

# %%
# Root-mean-square errors against the analytic derivatives.

for name, g, l in (("explicit", ex.grad, ex.lap), ("implicit", im.grad, im.lap),
                   ("fd", g_fd, l_fd)):
    eg = np.sqrt(np.mean((g - fn.grad(xq)) ** 2))
    el = np.sqrt(np.mean((l - fn.laplacian(xq)) ** 2))
    print(f"{name:9s} grad {eg:.2e}   lap {el:.2e}")

fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.5))
a1.plot(xq, fn.grad(xq), "k-", lw=1)
a1.plot(xq, ex.grad, ".", ms=3, label="explicit")
a1.plot(xq, im.grad, "x", ms=3, label="implicit")
a1.set_title("gradient")
a1.legend()
a2.plot(xq, fn.laplacian(xq), "k-", lw=1)
a2.plot(xq, ex.lap, ".", ms=3)
a2.plot(xq, im.lap, "x", ms=3)
a2.set_title("Laplacian")
fig.tight_layout()
fig.savefig("derivatives.svg")
