"""
Symbol error rate against SNR after decision-directed adaptation.

Training still uses QPSK; the payload constellation is 16-QAM or 256-QAM and
errors are counted over the payload only. SNR points share their noise draws,
so differences between neighbouring points reflect the SNR, not luck.

Run:  python demos/02_ser_sweep.py [realizations]
"""

import sys
from dataclasses import replace

import matplotlib.pyplot as plt
import numpy as np

from vsspr import ExperimentConfig, run_ser_sweep

realizations = int(sys.argv[1]) if len(sys.argv) > 1 else 20
cfg = replace(ExperimentConfig(), realizations=realizations)
snr = np.arange(10.0, 31.0, 2.0)
curves = run_ser_sweep(cfg, snr, dd_orders=(16, 256))

fig, axes = plt.subplots(1, 2, figsize=(11, 4.5))
for ax, order in zip(axes, (16, 256)):
    for (o, label), c in curves.items():
        if o != order:
            continue
        ax.semilogy(c.snr_db, np.maximum(c.ser, 1e-6), marker="o", ms=3, label=label)
    ax.set_title(f"{order}-QAM payload")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("SER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()

for order in (16, 256):
    gain = curves[(order, "NLMS")].ser - curves[(order, "VSSPR")].ser
    print(f"{order:>3}-QAM: NLMS minus VSSPR SER per SNR:", " ".join(f"{g:.4f}" for g in gain))

fig.tight_layout()
fig.savefig("ser_sweep.png", dpi=120)
print("wrote ser_sweep.png")
