"""Check that the adjoint-state gradients are right before trusting any inversion.

Both objectives are evaluated on a 6 x 6 model with two sources and two
frequencies.  Their gradients are compared with central finite
differences, then the penalty (WRI) gradient is followed as the penalty
weight grows: it should approach the reduced (FWI) gradient.

Run:  python demos/01_gradients.py
"""
import numpy as np

from tvfwi.checks import gradcheck, small_instance
from tvfwi.objectives import WriConfig, fwi_eval, wri_eval

print("Finite-difference check (max relative error, want <= 1e-5)")
for mode in ("fwi", "wri"):
    print(f"  {mode}: {gradcheck(mode):.2e}")

# Flipping the sign of the adjoint gradient must be caught by the same check.
print(f"  fwi with a sabotaged sign: {gradcheck('fwi', sabotage_sign=True):.2e}")

m, data, P = small_instance()
g_fwi = fwi_eval(m, data, P).gradient
print("\nPenalty gradient versus reduced gradient")
for lam in (10.0, 1e2, 1e3, 1e4):
    ev = wri_eval(m, data, P, WriConfig(lam))
    gap = np.linalg.norm(ev.gradient - g_fwi) / np.linalg.norm(g_fwi)
    print(f"  lambda = {lam:8.0f}   relative gap = {gap:.2e}")
