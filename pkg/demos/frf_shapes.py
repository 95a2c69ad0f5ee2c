"""Sweep a linear and a hardening oscillator and plot the response surfaces.

The linear system collapses to a single curve no matter the forcing
amplitude.  With a cubic spring the resonance ridge bends to the right as
the forcing grows, which is exactly the feature the gain tuner exploits.

Run from the repository root:

    python demos/frf_shapes.py

Figures and CSV tables land in demos/output/.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from vibtune import (ExcitationGrid, MdofPlant, duffing_preset, frf_sweep,
                     write_frf_csv)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)


def sweep(variant):
    plant = MdofPlant(duffing_preset(variant))
    grid = ExcitationGrid(np.arange(1.0, 7.0, 1.0), np.arange(3.0, 9.05, 0.1))
    mats = frf_sweep(plant, grid=grid)
    return grid, {m.channel: m for m in mats}


def plot(ax, grid, frf, title):
    for i, a in enumerate(grid.amplitudes):
        ax.plot(grid.frequencies, frf.gains[i], label=f"a = {a:g}")
    ax.set_title(title)
    ax.set_xlabel("forcing frequency [rad/s]")
    ax.set_ylabel("amplification gain")
    ax.legend(fontsize=8)


def main():
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)

    grid, linear = sweep("linear")
    plot(axes[0], grid, linear["x1"], "linear spring (curves coincide)")
    write_frf_csv(OUT / "frf_linear_x1.csv", linear["x1"])

    grid, hard = sweep("nonlinear-100")
    plot(axes[1], grid, hard["x1"], "cubic spring (ridge bends right)")
    write_frf_csv(OUT / "frf_hardening_x1.csv", hard["x1"])

    fig.tight_layout()
    fig.savefig(OUT / "frf_shapes.png", dpi=150)
    print(f"wrote {OUT / 'frf_shapes.png'}")

    peak = grid.frequencies[np.argmax(hard["x1"].gains, axis=1)]
    print("\nhardening resonance ridge:")
    for a, w in zip(grid.amplitudes, peak):
        print(f"  a = {a:>4g}   argmax omega = {w:.2f} rad/s")


if __name__ == "__main__":
    main()
