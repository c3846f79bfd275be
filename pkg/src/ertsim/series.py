"""Uniform-grid time series produced by every solver."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TimeSeries:
    """Sampled observable trajectories on a uniform time grid.

    ``channels`` maps observable name to real-valued samples.  ``stderr``
    (present only for trajectory-averaged runs) maps the same names to
    per-sample standard errors.  ``meta`` carries solver identity, the
    parameter record, and the wall-clock breakdown.
    """

    times: np.ndarray
    channels: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)
    stderr: dict[str, np.ndarray] | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or self.times.size == 0:
            raise ValueError("times must be a nonempty 1-D array")
        self.channels = {
            name: np.asarray(vals, dtype=float) for name, vals in self.channels.items()
        }
        for name, vals in self.channels.items():
            if vals.shape != self.times.shape:
                raise ValueError(
                    f"channel {name!r} has {vals.shape[0] if vals.ndim else 0} samples, "
                    f"expected {self.times.size}"
                )
        if self.stderr is not None:
            self.stderr = {
                name: np.asarray(vals, dtype=float) for name, vals in self.stderr.items()
            }
            for name, vals in self.stderr.items():
                if vals.shape != self.times.shape:
                    raise ValueError(f"stderr channel {name!r} length mismatch")

    @property
    def dt(self) -> float:
        """Grid spacing; raises if the grid is not uniform."""
        if self.times.size < 2:
            raise ValueError("need at least two samples to define a grid spacing")
        steps = np.diff(self.times)
        spacing = float(steps[0])
        if not np.allclose(steps, spacing, rtol=1e-9, atol=1e-12):
            raise ValueError("time grid is not uniform")
        return spacing

    def channel(self, name: str) -> np.ndarray:
        try:
            return self.channels[name]
        except KeyError:
            raise KeyError(
                f"no channel {name!r}; available: {sorted(self.channels)}"
            ) from None
