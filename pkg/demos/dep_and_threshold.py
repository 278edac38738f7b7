"""
Willie's detection error probability
====================================

A radiometer at Willie compares its average received power with a
threshold. Here we build one design, trace the DEP against the threshold,
and check the closed form against a direct simulation of the radiometer.
"""
import numpy as np

from starcovert import detection, oracle, validation

# one seeded design whose two beams point the same way
params, channels, profile, beams = validation.collinear_dep_case(seed=3)
p = detection.dep_params(channels, profile, beams, params)
print(f"lam = {p.lam:.3e} W, lam_t = {p.lam_t:.3e} W, jam span = {p.jam_span:.3e} W")

# the worst case for Alice is Willie's best threshold
tau_star = detection.optimal_threshold(p)
print(f"optimal threshold {tau_star:.4e} W, minimum DEP {detection.min_dep(p):.4f}")

# sweep the threshold and compare with 2e5 simulated radiometer outcomes
taus = tau_star * np.array([0.25, 0.5, 1.0, 2.0, 4.0])
sims = oracle.mc_dep(params, channels, profile, beams, taus, samples=200_000, seed=1)
for tau, exact, est in zip(taus, detection.dep(taus, p), sims):
    print(f"tau/tau* = {tau / tau_star:4.2f}   closed form {exact:.4f}   "
          f"simulated {est.value:.4f} +/- {est.half_width:.4f}")
