"""
Mean-field bistability of the feedback loop
===========================================

Sweep the drive through the three-root window of the mean-field cubic,
then follow the stable branches up and down to expose the hysteresis loop.
"""

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from kerrfeedback.semiclassical import drive_sweep, effective_rates, hysteresis
from kerrfeedback.slh import CircuitParams

# %%
# Parameters of the bistable example. p2 > sqrt(3) p1 is what allows three roots.
p = CircuitParams(gamma=6.0, gamma_f=8.0, kappa=3.0, chi=10.0, delta_s=100.0, delta=4.9)
p1, p2 = effective_rates(p)
print(f"p1 = {p1:.5f}, p2 = {p2:.5f}, sqrt(3) p1 = {np.sqrt(3) * p1:.5f}")

# %%
# Root structure along the drive axis
eps = np.linspace(0.0, 2.0, 201)
sweep = drive_sweep(p, eps)
print("three-root window:", sweep.window, " threshold eps:", round(sweep.threshold_eps, 5))

fig, ax = plt.subplots(figsize=(5, 3.5))
for e, k, X, A0_sq, stable in sweep.rows():
    ax.plot(e, A0_sq, "o" if stable else "x", color="C0" if stable else "C3", ms=3)
ax.set_xlabel("epsilon")
ax.set_ylabel("|A0|^2")

# %%
# Continuation up and down; the traces split only where two attractors coexist
h = hysteresis(p, np.arange(0.05, 2.0001, 0.05))
ax.plot(h.epsilon, h.up, "-", color="k", lw=0.8, label="up")
ax.plot(h.epsilon, h.down, "--", color="k", lw=0.8, label="down")
ax.legend()
fig.tight_layout()
fig.savefig("bistability.svg")
print("largest split between the traces:", h.split.max())
