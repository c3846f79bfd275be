"""Error metric, spectral analysis, steady-state extraction and the
accuracy-versus-runtime benchmark sweep."""

from __future__ import annotations

import multiprocessing
import time
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import ert, reference
from .errors import NumericalError
from .models import ModelSpec
from .series import TimeSeries

__all__ = [
    "integrated_error", "power_spectrum", "fundamental_frequency",
    "steady_state_current", "SweepCell", "SweepSpec", "SweepRow",
    "SweepResult", "benchmark_sweep",
]


def _grids_match(a: TimeSeries, b: TimeSeries) -> bool:
    return a.times.shape == b.times.shape and bool(
        np.allclose(a.times, b.times, rtol=1e-9, atol=1e-12)
    )


def integrated_error(exact: TimeSeries, approx: TimeSeries) -> float:
    """Scaled L2 distance between two runs over their shared channels.

    sqrt( sum_j integral (O_j - O_j^A)^2 dt / integral O_j^2 dt ), with
    trapezoidal quadrature on the sampled grid.  Channels whose reference
    power integrates to zero are excluded (and reported by warning), since
    their ratio is undefined.
    """
    if not _grids_match(exact, approx):
        raise ValueError("time-grid mismatch between the two series")
    if set(exact.channels) != set(approx.channels):
        raise ValueError(
            f"channel mismatch: {sorted(exact.channels)} vs {sorted(approx.channels)}"
        )
    total = 0.0
    excluded = []
    for name, ref in exact.channels.items():
        den = float(np.trapezoid(ref ** 2, exact.times))
        if den <= 0.0:
            excluded.append(name)
            continue
        diff = ref - approx.channels[name]
        total += float(np.trapezoid(diff ** 2, exact.times)) / den
    if excluded:
        warnings.warn(
            f"channels excluded from integrated error (zero reference power): {excluded}",
            stacklevel=2,
        )
    if not np.isfinite(total):
        raise NumericalError("integrated error is not finite")
    if len(excluded) == len(exact.channels):
        raise ValueError("all channels have zero reference power")
    return float(np.sqrt(total))


def power_spectrum(series: TimeSeries, channel: str,
                   window: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """One-sided power spectrum of a real channel on a uniform grid.

    Returns angular frequencies and per-bin powers normalized so the total
    power equals the time-domain sum of squares (Parseval).  ``window``
    may be "hann"; it is off by default so peak amplitudes stay comparable
    between runs.
    """
    values = series.channel(channel)
    n = values.size
    if n < 8:
        raise ValueError(f"need at least 8 samples for a spectrum, got {n}")
    dt = series.dt  # raises on a non-uniform grid
    if window is None:
        windowed = values
    elif window == "hann":
        windowed = values * np.hanning(n)
    else:
        raise ValueError(f"unknown window {window!r}; use None or 'hann'")
    amplitudes = np.fft.rfft(windowed)
    omega = 2.0 * np.pi * np.fft.rfftfreq(n, d=dt)
    weights = np.full(amplitudes.shape, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0  # Nyquist bin has no mirror
    power = weights * np.abs(amplitudes) ** 2 / n
    return omega, power


def fundamental_frequency(frequencies: np.ndarray, power: np.ndarray) -> float:
    """Frequency of the strongest nonzero-frequency bin; ties go to lower frequency.

    The zero-frequency bin is excluded because a DC offset says nothing
    about the oscillatory content.
    """
    frequencies = np.asarray(frequencies, dtype=float)
    power = np.asarray(power, dtype=float)
    if frequencies.size == 0 or frequencies.shape != power.shape:
        raise ValueError("frequencies and power must be nonempty arrays of equal length")
    mask = frequencies > 0
    if not np.any(mask) or float(np.max(power[mask])) <= 0.0:
        raise NumericalError("spectrum carries no nonzero-frequency power")
    masked = np.where(mask, power, -np.inf)
    return float(frequencies[int(np.argmax(masked))])


def steady_state_current(series: TimeSeries, channel: str = "current",
                         tail_fraction: float = 0.25) -> float:
    """Mean of the final ``tail_fraction`` of samples, with a convergence guard.

    The tail is split in half; if the two half-means disagree by more than
    5% the series has not settled and an error is raised.
    """
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError(f"tail_fraction in (0, 1] required, got {tail_fraction}")
    values = series.channel(channel)
    n_tail = max(2, int(round(values.size * tail_fraction)))
    tail = values[-n_tail:]
    half = tail.size // 2
    m1 = float(np.mean(tail[:half]))
    m2 = float(np.mean(tail[half:]))
    scale = max(abs(m1), abs(m2))
    if scale > 0.0 and abs(m1 - m2) > 0.05 * scale:
        raise NumericalError(
            f"steady-state tail not converged: half-means {m1:.6g} and {m2:.6g} "
            "differ by more than 5%"
        )
    return float(np.mean(tail))


@dataclass(frozen=True)
class SweepCell:
    """One coupling point of a sweep: a fully built model plus its label."""

    model_name: str
    coupling: float
    model: ModelSpec


@dataclass(frozen=True)
class SweepSpec:
    """Grid definition for an accuracy-versus-runtime sweep.

    Every solver runs on the common output grid with spacing ``out_dt``;
    each solver's own step must divide it.  The exact run of each cell is
    the error reference for all ERT and jump-solver points in that cell.
    """

    cells: tuple[SweepCell, ...]
    ranks: tuple[int, ...]
    n_trajs: tuple[int, ...]
    t_final: float
    out_dt: float
    ert_dt: float
    wmc_dt: float
    exact_dt: float
    seed: int = 0

    def __post_init__(self):
        if not self.cells:
            raise ValueError("sweep needs at least one cell")
        if self.t_final <= 0:
            raise ValueError("t_final > 0 required")
        for name, dt in (("ert_dt", self.ert_dt), ("wmc_dt", self.wmc_dt),
                         ("exact_dt", self.exact_dt)):
            if dt <= 0:
                raise ValueError(f"{name} > 0 required")
            ratio = self.out_dt / dt
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise ValueError(f"{name} = {dt} must divide out_dt = {self.out_dt}")

    def sample_every(self, dt: float) -> int:
        return int(round(self.out_dt / dt))


@dataclass(frozen=True)
class SweepRow:
    """One sweep point: solver identity, control value, accuracy and cost."""

    model: str
    coupling: float
    solver: str
    control: float
    integrated_error: float
    wall_seconds: float


@dataclass
class SweepResult:
    rows: list[SweepRow]
    meta: dict

    def select(self, **fields) -> list[SweepRow]:
        out = []
        for row in self.rows:
            if all(getattr(row, key) == value for key, value in fields.items()):
                out.append(row)
        return out


def _cell_seed(base_seed: int, cell_index: int, control_index: int) -> int:
    seq = np.random.SeedSequence(entropy=base_seed,
                                 spawn_key=(cell_index, control_index))
    return int(seq.generate_state(1, np.uint64)[0])


def _run_sweep_cell(args: tuple[int, SweepCell, SweepSpec]):
    cell_index, cell, spec = args
    exact_start = time.perf_counter()
    exact = reference.exact_evolve(
        cell.model, spec.exact_dt, spec.t_final,
        sample_every=spec.sample_every(spec.exact_dt),
    )
    exact_seconds = time.perf_counter() - exact_start

    rows = []
    for rank in spec.ranks:
        cfg = ert.ErtConfig(rank=rank, dt=spec.ert_dt)
        series = ert.evolve(cell.model, cfg, spec.t_final,
                            sample_every=spec.sample_every(spec.ert_dt))
        rows.append(SweepRow(
            model=cell.model_name, coupling=cell.coupling, solver="ert",
            control=float(rank),
            integrated_error=integrated_error(exact, series),
            wall_seconds=series.meta["wall"]["total_seconds"],
        ))
    for control_index, n_traj in enumerate(spec.n_trajs):
        cfg = reference.WmcConfig(
            n_traj=n_traj, dt=spec.wmc_dt,
            seed=_cell_seed(spec.seed, cell_index, control_index),
        )
        series = reference.wmc_evolve(cell.model, cfg, spec.t_final,
                                      sample_every=spec.sample_every(spec.wmc_dt))
        rows.append(SweepRow(
            model=cell.model_name, coupling=cell.coupling, solver="wmc",
            control=float(n_traj),
            integrated_error=integrated_error(exact, series),
            wall_seconds=series.meta["wall"]["total_seconds"],
        ))
    return cell_index, rows, exact_seconds


def benchmark_sweep(spec: SweepSpec, workers: int = 1,
                    on_cell: Callable[[SweepCell, list[SweepRow]], None] | None = None,
                    ) -> SweepResult:
    """Run the full sweep; cells are independent and may run in parallel.

    ``on_cell`` is invoked (in cell order, in the parent process) as each
    cell finishes, so partial results can be persisted incrementally.
    """
    args = [(i, cell, spec) for i, cell in enumerate(spec.cells)]
    all_rows: list[SweepRow] = []
    exact_seconds: dict[int, float] = {}
    if workers <= 1:
        outputs = map(_run_sweep_cell, args)
        for cell_index, rows, seconds in outputs:
            exact_seconds[cell_index] = seconds
            all_rows.extend(rows)
            if on_cell is not None:
                on_cell(spec.cells[cell_index], rows)
    else:
        ctx = multiprocessing.get_context("spawn")
        with ctx.Pool(processes=workers) as pool:
            for cell_index, rows, seconds in pool.imap(_run_sweep_cell, args):
                exact_seconds[cell_index] = seconds
                all_rows.extend(rows)
                if on_cell is not None:
                    on_cell(spec.cells[cell_index], rows)
    meta = {
        "seed": spec.seed,
        "t_final": spec.t_final,
        "out_dt": spec.out_dt,
        "ert_dt": spec.ert_dt,
        "wmc_dt": spec.wmc_dt,
        "exact_dt": spec.exact_dt,
        "exact_seconds_per_cell": [exact_seconds[i] for i in sorted(exact_seconds)],
    }
    return SweepResult(rows=all_rows, meta=meta)
