"""
Checks on the step-size analysis, in a setting where the true system is known.

1. For a fixed weight error and random regressors, the step that maximizes the
   average drop in squared weight error has a closed form; compare it with a
   brute-force search.
2. Plugging that step into every iteration gives an MSD curve that never rises
   (up to Monte-Carlo noise) and ends below any fixed step size.
3. The regularizer psi can be estimated from the noise level and recent input
   energies; compare it with a direct Monte-Carlo trace.

Run:  python demos/04_step_size_theory.py
"""

import numpy as np

from vsspr import AlgorithmSpec, SysIdScenario, Variant
from vsspr.equalizer import run_sysid_validation
from vsspr.numerics import gaussian_complex, rng_stream
from vsspr.validation import msd_descent, optimal_mu_ensemble, psi_estimates

mu_formula, mu_grid = optimal_mu_ensemble(trials=10_000)
print(f"closed-form optimal step {mu_formula:.4f}, grid search {mu_grid:.3f}")

mean, se = msd_descent(trials=1000)
print(f"oracle-step MSD: {mean[0]:.3f} -> {mean[50]:.4f} (iter 50) -> {mean[-1]:.5f} (iter {len(mean) - 1})")
print(f"largest one-step rise: {np.max(np.diff(mean)):.2e} (standard error there ~{se.max():.1e})")

trials, M = 500, 8
h_true = gaussian_complex(rng_stream(6, 1), 1.0 / M, (trials, M))
scenario = SysIdScenario(h_true, noise_variance=1e-2)
for mu in (0.2, 0.5, 1.0):
    spec = AlgorithmSpec(Variant.RAPA, L=2, mu=mu)
    final = run_sysid_validation(scenario, spec, 200, rng_stream(6, 0), trials=trials).msd[:, -1].mean()
    print(f"fixed step {mu:.1f}: final MSD {final:.5f}")

adaptive, direct = psi_estimates()
print(f"psi: estimate from input energies {adaptive:.3e}, direct trace {direct:.3e}")
