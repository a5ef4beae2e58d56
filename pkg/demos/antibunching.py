"""
Photon antibunching versus the controller detuning
==================================================

Solve the master equation of the loop over K = delta/chi + 1 and compare
with the weak-drive closed form. The dip at K = 1 is the single-photon
blockade; K = 2 is the two-photon resonance.
"""

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from kerrfeedback import quantum, weak_drive
from kerrfeedback.slh import CircuitParams

p = CircuitParams(gamma=2.0, gamma_f=2.5, kappa=1.0, chi=10.0, delta_s=50.0, epsilon=0.1)
K = np.linspace(0.0, 3.0, 61)

# %%
# Two values of delta_s; at delta_s = chi the resonance condition lines up
fig, ax = plt.subplots(figsize=(5, 3.5))
for ds, color in ((50.0, "C0"), (10.0, "C1")):
    rows = quantum.k_sweep(p.replace(delta_s=ds), K, check_convergence=False)
    g = np.array([r.result.g2 for r in rows])
    closed = [weak_drive.g2_closed_form(p.replace(delta_s=ds), k) for k in K]
    ax.semilogy(K, g, "-", color=color, label=f"master equation, delta_s={ds:g}")
    ax.semilogy(K, closed, ":", color=color, label=f"closed form, delta_s={ds:g}")
    print(f"delta_s={ds:g}: minimum g2 = {g.min():.3g} at K = {K[np.argmin(g)]:g}")
ax.axhline(1.0, color="0.6", lw=0.5)
ax.set_xlabel("K")
ax.set_ylabel("g2(0)")
ax.legend(fontsize=6)
fig.tight_layout()
fig.savefig("antibunching.svg")

# %%
# The controller mode is antibunched at the same point
st = quantum.solve_circuit(p.with_K(1.0))
print("g2 of the controller at K = 1:", quantum.g2(st, "c").g2)
