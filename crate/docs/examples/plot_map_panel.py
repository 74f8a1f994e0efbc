#!/usr/bin/env python3
"""Plot an optimal-squeezing map emitted by `dmpa fig3 --panel X --out CSV`.

Usage: plot_map_panel.py panel.csv [output.png]
"""
import sys

import matplotlib.pyplot as plt
import numpy as np


def main():
    path = sys.argv[1]
    out = sys.argv[2] if len(sys.argv) > 2 else "map_panel.png"
    with open(path) as fh:
        header = None
        for line in fh:
            if not line.startswith("#"):
                header = line.strip().split(",")
                break
    data = np.genfromtxt(path, delimiter=",", comments="#", skip_header=1,
                         usecols=(0, 1, 3))
    x = np.unique(data[:, 0])
    y = np.unique(data[:, 1])
    db = data[:, 2].reshape(len(x), len(y)).T

    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    mesh = ax.pcolormesh(x, y, db, shading="nearest", cmap="viridis")
    ax.contour(x, y, db, levels=[0.0, 3.0], colors=["white", "red"])
    ax.set_xscale("log")
    if header[1] == "n":
        ax.set_yscale("log")
    ax.set_xlabel(header[0])
    ax.set_ylabel(header[1])
    fig.colorbar(mesh, label="squeezing (dB below zero-point)")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
