"""
Three routes to g2 in the weak-drive limit
==========================================

The master equation, the few-photon amplitude equations and the closed form
should meet as the drive goes to zero. Separate complex detunings leave out
the dissipative coupling carried by the single output channel; solving the
amplitudes with the full H - i L^+L / 2 puts it back.
"""

import numpy as np

from kerrfeedback import quantum, weak_drive
from kerrfeedback.slh import CircuitParams

p = CircuitParams(gamma=2.0, gamma_f=2.5, kappa=1.0, chi=10.0, delta_s=50.0)

print(f"{'eps':>5} {'K':>4} {'master eq':>11} {'amplitudes':>11} {'collective':>11} {'closed':>11}")
for eps in (0.1, 0.01):
    for K in (0.5, 1.0, 1.5):
        q = p.replace(epsilon=eps).with_K(K)
        gq = quantum.circuit_g2(q, check_convergence=False).g2
        ga = weak_drive.weak_drive_g2(q)
        gc = weak_drive.weak_drive_g2(q, "collective")
        gf = weak_drive.g2_closed_form(q)
        print(f"{eps:5g} {K:4g} {gq:11.5g} {ga:11.5g} {gc:11.5g} {gf:11.5g}")

# %%
# Populations tell the two amplitude routes apart much more clearly than g2
q = p.replace(epsilon=0.05).with_K(1.0)
rho = quantum.solve_circuit(q, (4, 4)).rho.matrix
P = np.real(np.diag(rho)).reshape(4, 4).sum(axis=1)
for route in ("detunings", "collective"):
    P1, P2 = weak_drive.occupations(weak_drive.solve_amplitudes(q, route))
    print(f"{route:>10}: P1/P1_me = {P1 / P[1]:.4g}, P2/P2_me = {P2 / P[2]:.4g}")
