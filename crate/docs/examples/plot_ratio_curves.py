#!/usr/bin/env python3
"""Plot the squeezing-ratio curves emitted by `dmpa fig2 --out DIR`.

Usage: plot_ratio_curves.py DIR [output.png]
"""
import glob
import sys

import matplotlib.pyplot as plt
import numpy as np


def load(path):
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=3)
    return data[:, 0], data[:, 1]


def main():
    directory = sys.argv[1] if len(sys.argv) > 1 else "fig2"
    out = sys.argv[2] if len(sys.argv) > 2 else "ratio_curves.png"
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for path in sorted(glob.glob(f"{directory}/fig2_*.csv")):
        label = path.split("fig2_")[-1].removesuffix(".csv")
        chi_prime, ratio = load(path)
        style = "-" if label.startswith("reference") else ":"
        ax.plot(chi_prime, ratio, style, label=label)
    ax.set_xscale("log")
    ax.set_xlabel(r"$\chi' = \chi/\sqrt{\gamma^2 + z}$")
    ax.set_ylabel(r"$V_{X,\mathrm{opt}} / V_0$")
    ax.set_ylim(0.4, 1.05)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
