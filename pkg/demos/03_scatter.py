"""
What the equalizer does to the signal cloud.

The received samples are a sum of four scaled symbols, so the 256-QAM lattice
is invisible before equalization. After 4500 iterations the equalized outputs
sit in tight clusters around the lattice points.

Run:  python demos/03_scatter.py
"""

from dataclasses import replace

import matplotlib.pyplot as plt

from vsspr import ExperimentConfig
from vsspr.equalizer import run_equalizer_realization, scatter_capture

cfg = replace(ExperimentConfig(), realizations=1)
trace = run_equalizer_realization(cfg, cfg.algorithm("VSSPR"), index=0)
rx = scatter_capture(trace, "pre", 4500, 5500)
eq = scatter_capture(trace, "post", 4500, 5500)

fig, axes = plt.subplots(1, 2, figsize=(10, 5))
for ax, pts, title in ((axes[0], rx, "equalizer input"), (axes[1], eq, "equalizer output")):
    ax.plot(pts.real, pts.imag, ".", ms=2)
    ax.set_aspect("equal")
    ax.set_title(title)
fig.tight_layout()
fig.savefig("scatter.png", dpi=120)
print("wrote scatter.png")
