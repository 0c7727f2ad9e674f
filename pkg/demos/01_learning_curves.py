"""
Learning curves of four equalizers on a channel with a deep spectral null.

A QPSK training sequence of 500 symbols is followed by 5000 decision-directed
256-QAM symbols. Every equalizer sees the same symbols and noise, so the curves
differ only because of the update rule. Expect the variable step-size filter to
converge about as fast as the large-step filters and then settle lower, because
its step shrinks once the smoothed projected error has died down.

Run:  python demos/01_learning_curves.py [realizations]
"""

import sys
from dataclasses import replace

import matplotlib.pyplot as plt
import numpy as np

from vsspr import ExperimentConfig, average_learning_curve, run_learning_experiment
from vsspr.equalizer import convergence_iteration, steady_state_db

realizations = int(sys.argv[1]) if len(sys.argv) > 1 else 50
cfg = replace(ExperimentConfig(), realizations=realizations)
traces = run_learning_experiment(cfg)

fig, (ax_mse, ax_mu) = plt.subplots(2, 1, figsize=(9, 7), sharex=True, height_ratios=(3, 1))
for label, (sq, mu) in traces.items():
    curve = average_learning_curve(sq, valid_from=cfg.delta).mse_db
    ss, se = steady_state_db(sq)
    conv = convergence_iteration(curve, ss, start=cfg.delta)
    print(f"{label:>6}: steady state {ss:6.2f} dB (+/- {se:.2f}), within 3 dB after {conv} iterations")
    ax_mse.plot(curve, lw=0.8, label=label)
    if label == "VSSPR":
        # average only over update iterations; the recorded step is 0 while the weights are held
        held = mu.copy()
        held[held == 0] = np.nan
        ax_mu.plot(np.nanmean(held, axis=0), lw=0.8, color="k")

ax_mse.axvline(cfg.n_train, color="gray", ls="--", lw=0.8)
ax_mse.set_ylabel("MSE (dB)")
ax_mse.set_title(f"{cfg.realizations} realizations, SNR {cfg.snr_db:g} dB")
ax_mse.legend()
ax_mu.set_ylabel("VSSPR step")
ax_mu.set_xlabel("iteration")
fig.tight_layout()
fig.savefig("learning_curves.png", dpi=120)
print("wrote learning_curves.png")
