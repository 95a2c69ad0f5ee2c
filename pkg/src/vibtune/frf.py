"""Nonlinear frequency-response sweeps over an amplitude x frequency grid.

Each grid cell drives the plant with a single-harmonic excitation
a sin(omega t) until the per-period output peaks settle, then records the
amplification gain gamma = peak / a.  One FrfMatrix is produced per output
channel.  Rows (fixed amplitude) are independent tasks; within a row the
sweep walks the frequencies in ascending order and can warm-start each
cell from the final state of its left neighbour.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .engine import DivergenceError, IntegratorConfig, SteadyStateReport

__all__ = [
    "ExcitationGrid",
    "FrfMatrix",
    "SweepFailure",
    "amplification_gain",
    "frf_sweep",
    "frobenius_norm",
    "default_grid",
]


class SweepFailure(RuntimeError):
    """A sweep hit non-convergent or divergent cells."""

    def __init__(self, cells):
        self.cells = list(cells)
        listing = "; ".join(
            f"(a={a:g}, omega={w:g}): {reason}" for a, w, reason in self.cells[:8]
        )
        extra = "" if len(self.cells) <= 8 else f" (+{len(self.cells) - 8} more)"
        super().__init__(f"{len(self.cells)} cell(s) failed: {listing}{extra}")


@dataclass
class ExcitationGrid:
    """Strictly increasing, positive amplitude and frequency axes."""

    amplitudes: np.ndarray
    frequencies: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=float).ravel()
        self.frequencies = np.asarray(self.frequencies, dtype=float).ravel()
        for name, ax in (("amplitudes", self.amplitudes), ("frequencies", self.frequencies)):
            if ax.size == 0 or np.any(ax <= 0) or np.any(np.diff(ax) <= 0):
                raise ValueError(f"{name} must be positive and strictly increasing")

    @classmethod
    def from_ranges(cls, a_start, a_stop, a_step, w_start, w_stop, w_step) -> "ExcitationGrid":
        def axis(lo, hi, step):
            n = int(round((hi - lo) / step)) + 1
            return lo + step * np.arange(n)

        return cls(axis(a_start, a_stop, a_step), axis(w_start, w_stop, w_step))

    @property
    def shape(self) -> tuple:
        return (self.amplitudes.size, self.frequencies.size)


def default_grid() -> ExcitationGrid:
    """The sweep grid used by the oscillator studies: a 0.5:0.5:6, w 3:0.25:9."""
    return ExcitationGrid.from_ranges(0.5, 6.0, 0.5, 3.0, 9.0, 0.25)


@dataclass
class FrfMatrix:
    """Amplification gains for one output channel over the grid.

    gains[i, j] = peak |y| / a at (amplitudes[i], frequencies[j]); NaN marks
    failed cells, which are also listed as (i, j, reason) tuples.
    """

    channel: str
    amplitudes: np.ndarray
    frequencies: np.ndarray
    gains: np.ndarray
    failures: list = field(default_factory=list)

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=float)
        if self.gains.shape != (self.amplitudes.size, self.frequencies.size):
            raise ValueError("gain matrix shape does not match the grid")
        finite = self.gains[np.isfinite(self.gains)]
        if np.any(finite < 0):
            raise ValueError("gains must be non-negative")


def amplification_gain(report: SteadyStateReport, amplitude: float) -> np.ndarray:
    """Per-channel peak normalized by the excitation amplitude."""
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    return np.asarray(report.peak_per_channel, dtype=float) / amplitude


def _sweep_row(plant, row_idx, amplitude, frequencies, cfg, warm_start):
    """One amplitude row: ascending frequencies, optional warm-start chain."""
    n_ch = len(plant.channel_labels)
    row = np.full((len(frequencies), n_ch), np.nan)
    failures = []
    x0 = None
    for j, omega in enumerate(frequencies):
        try:
            rep = plant.run_cell(float(amplitude), float(omega), x0=x0, config=cfg)
        except DivergenceError as err:
            failures.append((row_idx, j, str(err)))
            x0 = None
            continue
        if rep.converged:
            row[j] = amplification_gain(rep, amplitude)
        else:
            failures.append((row_idx, j, f"no steady state within {rep.periods_used} periods"))
        x0 = rep.final_state if warm_start else None
    return row, failures


def frf_sweep(plant, grid: ExcitationGrid = None, config: IntegratorConfig = None,
              warm_start: bool = True, jobs: int = 1,
              failure_action: str = "abort") -> list:
    """Sweep the grid and build one FrfMatrix per plant output channel.

    failure_action: "abort" raises SweepFailure on the first collected
    failure set; "keep" records NaN gains and the failure listing instead.
    Row results are assembled by index, so serial and threaded runs return
    identical matrices.
    """
    grid = grid or default_grid()
    cfg = config or IntegratorConfig()
    if failure_action not in ("abort", "keep"):
        raise ValueError("failure_action must be 'abort' or 'keep'")
    r, s = grid.shape
    n_ch = len(plant.channel_labels)
    cube = np.empty((r, s, n_ch))
    all_failures = []

    def task(i):
        return _sweep_row(plant, i, grid.amplitudes[i], grid.frequencies, cfg, warm_start)

    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=int(jobs)) as pool:
            results = list(pool.map(task, range(r)))
    else:
        results = [task(i) for i in range(r)]
    for i, (row, failures) in enumerate(results):
        cube[i] = row
        all_failures.extend(failures)
    if all_failures and failure_action == "abort":
        raise SweepFailure(
            [(grid.amplitudes[i], grid.frequencies[j], reason) for i, j, reason in all_failures]
        )
    return [
        FrfMatrix(label, grid.amplitudes.copy(), grid.frequencies.copy(),
                  cube[:, :, c].copy(),
                  [(i, j, reason) for i, j, reason in all_failures])
        for c, label in enumerate(plant.channel_labels)
    ]


def frobenius_norm(frf: FrfMatrix, failure_policy: str = None) -> float:
    """Frobenius norm of the gain matrix, the scalar objective of the tuner.

    Failed cells make the norm undefined unless a policy is chosen:
    "exclude" drops them from the sum, "abort" raises SweepFailure.
    """
    if frf.failures:
        if failure_policy is None:
            raise ValueError(
                "FRF contains failed cells; pass failure_policy='exclude' or 'abort'"
            )
        if failure_policy == "abort":
            raise SweepFailure(
                [(frf.amplitudes[i], frf.frequencies[j], reason)
                 for i, j, reason in frf.failures]
            )
        if failure_policy != "exclude":
            raise ValueError("failure_policy must be 'exclude' or 'abort'")
    g = frf.gains[np.isfinite(frf.gains)]
    return float(np.sqrt(np.sum(g * g)))
