"""
Two-dimensional gradient and Hessian
====================================

The implicit scheme in 2D fits a full local quadratic.  Here it runs on a
coarse grid of the two-dimensional camel field.
"""

# %%

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from kbr import SweepConfig, TrainingSet, fit_theta, get_function, implicit_field

fn = get_function("camel2d")
g = np.linspace(0, 1, 41)
X, Y = np.meshgrid(g, g, indexing="ij")
pts = np.column_stack([X.ravel(), Y.ravel()])
model = fit_theta(TrainingSet(pts, fn(pts)), SweepConfig(n_sweep=8))

inner = np.column_stack([X[1:-1, 1:-1].ravel(), Y[1:-1, 1:-1].ravel()])
out = implicit_field(model, inner, strict=False)
err = np.sqrt(np.mean((out.grad - fn.grad(inner)) ** 2)) / np.abs(fn.grad(pts)).max()
print(f"k = {model.k:.3g}, normalized gradient RMSE = {err:.2e}")

fig, axes = plt.subplots(1, 2, figsize=(9, 4))
shape = (g.size - 2, g.size - 2)
axes[0].contourf(out.lap.reshape(shape), 30)
axes[0].set_title("predicted Laplacian")
axes[1].contourf(fn.laplacian(inner).reshape(shape), 30)
axes[1].set_title("analytic Laplacian")
fig.tight_layout()
fig.savefig("camel2d.svg")
