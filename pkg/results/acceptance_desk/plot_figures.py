"""Render mean OSPA and sensor heatmaps from the CSV files in this directory."""
import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = os.path.dirname(os.path.abspath(__file__))


def read(name):
    with open(os.path.join(here, name)) as fh:
        return list(csv.DictReader(fh))


rows = read("mean_ospa.csv")
fig, ax = plt.subplots(figsize=(7, 4))
for ctrl in sorted({r["controller"] for r in rows}):
    sel = [r for r in rows if r["controller"] == ctrl]
    ax.plot([float(r["time"]) for r in sel], [float(r["mean_ospa"]) for r in sel], label=ctrl)
ax.set_xlabel("time (s)")
ax.set_ylabel("mean OSPA (m)")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(here, "ospa.png"), dpi=150)

for name in sorted(os.listdir(here)):
    if not (name.startswith("heatmap_") and name.endswith(".csv")):
        continue
    cells = read(name)
    nx = 1 + max(int(c["x_bin"]) for c in cells)
    ny = 1 + max(int(c["y_bin"]) for c in cells)
    grid = np.zeros((ny, nx))
    for c in cells:
        grid[int(c["y_bin"]), int(c["x_bin"])] = int(c["count"])
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(grid, origin="lower", cmap="hot")
    ax.set_title(name[8:-4])
    fig.savefig(os.path.join(here, name[:-4] + ".png"), dpi=150)
