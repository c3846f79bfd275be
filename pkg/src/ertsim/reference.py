"""Reference solvers: dense master-equation integration and a quantum-jump
Monte-Carlo unraveling.

Both exist to validate and benchmark the low-rank ensemble solver.  The
dense integrator applies the master-equation right-hand side with plain
matrix products (memory O(dim^2)); the full dim^2 x dim^2 superoperator
matrix is only materialized by :func:`build_liouvillian` for small
systems and tests.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg

from .errors import NumericalError, check_memory
from .linalg import as_operator, dagger, is_hermitian
from .series import TimeSeries

if TYPE_CHECKING:
    from .models import ModelSpec

_COMPLEX_BYTES = 16

# Per-step total jump probability above which the first-order jump method
# is no longer trustworthy.
MAX_JUMP_PROBABILITY = 0.1

IMAG_TOL = 1e-8


@dataclass(frozen=True)
class Liouvillian:
    """Dense superoperator acting on the row-major flattened density matrix."""

    matrix: np.ndarray
    dim: int

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return (self.matrix @ rho.reshape(-1)).reshape(self.dim, self.dim)


@dataclass(frozen=True)
class WmcConfig:
    """Trajectory count, stream seed and step size for the jump solver."""

    n_traj: int
    seed: int
    dt: float

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError(f"n_traj >= 1 required, got {self.n_traj}")
        if self.dt <= 0:
            raise ValueError(f"dt > 0 required, got {self.dt}")


def lindblad_rhs(h: np.ndarray, dissipators, rho: np.ndarray,
                 anticommutator_part: np.ndarray | None = None) -> np.ndarray:
    """d(rho)/dt = -i[H, rho] + sum_k (A_k rho A_k^dag - 0.5 {A_k^dag A_k, rho}).

    ``anticommutator_part`` may carry the precomputed sum_k A_k^dag A_k.
    """
    out = -1j * (h @ rho - rho @ h)
    if dissipators:
        q = anticommutator_part
        if q is None:
            q = sum(dagger(a) @ a for a in dissipators)
        for a in dissipators:
            out += a @ rho @ dagger(a)
        out -= 0.5 * (q @ rho + rho @ q)
    return out


def build_liouvillian(model: "ModelSpec",
                      memory_cap_bytes: int | None = None) -> Liouvillian:
    """Materialize the superoperator matrix for the row-major flattening.

    With vec stacking rows, A rho B maps to (A kron B^T) vec(rho), so

        L = -i (H kron I - I kron H^T)
            + sum_k [A_k kron A_k^* - 0.5 (A_k^dag A_k kron I + I kron (A_k^dag A_k)^T)]
    """
    dim = model.dim
    check_memory("dense Liouvillian matrix", (dim ** 4) * _COMPLEX_BYTES, memory_cap_bytes)
    eye = np.eye(dim, dtype=np.complex128)
    h = model.hamiltonian
    mat = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for a in model.dissipators:
        q = dagger(a) @ a
        mat += np.kron(a, a.conj())
        mat -= 0.5 * (np.kron(q, eye) + np.kron(eye, q.T))
    return Liouvillian(matrix=mat, dim=dim)


def _initial_density(initial) -> np.ndarray:
    if isinstance(initial, np.ndarray) and initial.ndim == 1:
        vec = np.asarray(initial, dtype=np.complex128)
        return np.outer(vec, vec.conj())
    rho = None
    for w, vec in initial:
        vec = np.asarray(vec, dtype=np.complex128)
        term = float(w) * np.outer(vec, vec.conj())
        rho = term if rho is None else rho + term
    if rho is None:
        raise NumericalError("empty mixed initial state")
    return rho


def _trace_expectation(op: np.ndarray, rho: np.ndarray) -> float:
    val = complex(np.sum(op * rho.T))
    if abs(val.imag) > IMAG_TOL * (1.0 + abs(val.real)):
        raise NumericalError(f"Tr(O rho) has imaginary part {val.imag:g}")
    return float(val.real)


def exact_evolve(model: "ModelSpec", dt: float, t_final: float,
                 sample_every: int = 1,
                 memory_cap_bytes: int | None = None) -> TimeSeries:
    """Fixed-step classical fourth-order integration of the master equation.

    The right-hand side is evaluated with dense matrix products, so memory
    stays O(dim^2).  Positivity is monitored (smallest eigenvalue recorded
    at sampled steps), never enforced.
    """
    if dt <= 0:
        raise ValueError(f"dt > 0 required, got {dt}")
    if t_final <= 0:
        raise ValueError(f"t_final > 0 required, got {t_final}")
    if sample_every < 1:
        raise ValueError(f"sample_every >= 1 required, got {sample_every}")
    dim = model.dim
    # RK4 touches ~6 simultaneous dim x dim temporaries.
    check_memory("exact solver state", 6 * dim * dim * _COMPLEX_BYTES, memory_cap_bytes)
    n_steps = int(round(t_final / dt))
    if n_steps < 1:
        raise ValueError("t_final is shorter than one step")

    t_start = time.perf_counter()
    h = model.hamiltonian
    dissipators = list(model.dissipators)
    q = sum((dagger(a) @ a for a in dissipators),
            np.zeros((dim, dim), dtype=np.complex128))
    observables = list(model.observables.items())
    rho = _initial_density(model.initial_state)

    records: dict[str, list[float]] = {name: [] for name, _ in observables}
    min_eigs: list[float] = []
    herm_defects: list[float] = []
    sample_steps = [0]
    observe_seconds = 0.0

    def sample(r: np.ndarray) -> None:
        nonlocal observe_seconds
        t0 = time.perf_counter()
        for name, op in observables:
            records[name].append(_trace_expectation(op, r))
        sym = 0.5 * (r + r.conj().T)
        min_eigs.append(float(np.linalg.eigvalsh(sym)[0]))
        herm_defects.append(float(np.max(np.abs(r - r.conj().T))))
        observe_seconds += time.perf_counter() - t0

    def rhs(r: np.ndarray) -> np.ndarray:
        return lindblad_rhs(h, dissipators, r, anticommutator_part=q)

    sample(rho)
    for step in range(1, n_steps + 1):
        k1 = rhs(rho)
        k2 = rhs(rho + (0.5 * dt) * k1)
        k3 = rhs(rho + (0.5 * dt) * k2)
        k4 = rhs(rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step % sample_every == 0:
            sample_steps.append(step)
            sample(rho)

    total_seconds = time.perf_counter() - t_start
    meta = {
        "solver": "exact",
        "dt": dt,
        "t_final": t_final,
        "sample_every": sample_every,
        "n_steps": n_steps,
        "model": dict(model.labels),
        "min_eigenvalue": min_eigs,
        "max_hermiticity_defect": float(np.max(herm_defects)),
        "final_trace": float(np.real(np.trace(rho))),
        "wall": {
            "propagate_seconds": total_seconds - observe_seconds,
            "observe_seconds": observe_seconds,
            "total_seconds": total_seconds,
        },
    }
    times = np.array(sample_steps, dtype=float) * dt
    return TimeSeries(times=times,
                      channels={name: np.array(vals) for name, vals in records.items()},
                      meta=meta)


@dataclass(frozen=True)
class _JumpContext:
    """Operators shared by every trajectory of one run."""

    propagator: np.ndarray        # expm(-i dt H_eff), H_eff = H - i/2 sum A^dag A
    jump_ops_flat: np.ndarray | None  # (K*dim, dim) stack of dissipators
    n_jump: int
    dim: int
    observables: tuple[tuple[str, np.ndarray], ...]
    dt: float
    n_steps: int
    sample_every: int
    seed: int


def _prepare_jump_context(model: "ModelSpec", cfg: WmcConfig, t_final: float,
                          sample_every: int) -> _JumpContext:
    if t_final <= 0:
        raise ValueError(f"t_final > 0 required, got {t_final}")
    if sample_every < 1:
        raise ValueError(f"sample_every >= 1 required, got {sample_every}")
    n_steps = int(round(t_final / cfg.dt))
    if n_steps < 1:
        raise ValueError("t_final is shorter than one step")
    if not (isinstance(model.initial_state, np.ndarray)
            and model.initial_state.ndim == 1):
        raise NumericalError("the jump solver requires a pure initial state")
    dim = model.dim
    dissipators = list(model.dissipators)
    q = sum((dagger(a) @ a for a in dissipators),
            np.zeros((dim, dim), dtype=np.complex128))
    h_eff = model.hamiltonian - 0.5j * q
    propagator = scipy.linalg.expm(-1j * cfg.dt * h_eff)
    flat = None
    if dissipators:
        flat = np.ascontiguousarray(np.concatenate(dissipators, axis=0))
    return _JumpContext(
        propagator=propagator,
        jump_ops_flat=flat,
        n_jump=len(dissipators),
        dim=dim,
        observables=tuple(model.observables.items()),
        dt=cfg.dt,
        n_steps=n_steps,
        sample_every=sample_every,
        seed=cfg.seed,
    )


def _trajectory_rng(seed: int, traj_index: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, trajectory), schedule-independent."""
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(traj_index,))
    return np.random.Generator(np.random.Philox(seq))


def _run_trajectory(ctx: _JumpContext, psi0: np.ndarray, traj_index: int):
    """One normalized trajectory; returns (samples per channel, jump count)."""
    rng = _trajectory_rng(ctx.seed, traj_index)
    psi = psi0.copy()
    n_channels = len(ctx.observables)
    n_samples = ctx.n_steps // ctx.sample_every + 1
    samples = np.empty((n_channels, n_samples), dtype=float)
    jump_count = 0

    def record(slot: int) -> None:
        for c, (_, op) in enumerate(ctx.observables):
            val = complex(psi.conj() @ (op @ psi))
            samples[c, slot] = val.real

    record(0)
    slot = 1
    for step in range(1, ctx.n_steps + 1):
        if ctx.n_jump:
            branches = (ctx.jump_ops_flat @ psi).reshape(ctx.n_jump, ctx.dim)
            probs = ctx.dt * np.sum(np.abs(branches) ** 2, axis=1)
            total_p = float(probs.sum())
            if total_p >= MAX_JUMP_PROBABILITY:
                raise NumericalError(
                    f"total jump probability {total_p:.3g} >= {MAX_JUMP_PROBABILITY}; "
                    "dt is too large for the jump solver"
                )
            draw = rng.random()
            if draw < total_p:
                k = int(np.searchsorted(np.cumsum(probs), draw))
                psi = branches[k]
                jump_count += 1
            else:
                psi = ctx.propagator @ psi
        else:
            psi = ctx.propagator @ psi
        psi = psi / np.linalg.norm(psi)
        if step % ctx.sample_every == 0:
            record(slot)
            slot += 1
    return samples, jump_count


def wmc_trajectory(model: "ModelSpec", cfg: WmcConfig, t_final: float,
                   traj_index: int, sample_every: int = 1) -> TimeSeries:
    """Single stochastic trajectory, a deterministic function of (seed, traj_index)."""
    ctx = _prepare_jump_context(model, cfg, t_final, sample_every)
    t_start = time.perf_counter()
    psi0 = np.asarray(model.initial_state, dtype=np.complex128)
    psi0 = psi0 / np.linalg.norm(psi0)
    samples, jump_count = _run_trajectory(ctx, psi0, traj_index)
    times = np.arange(samples.shape[1], dtype=float) * (cfg.dt * sample_every)
    channels = {name: samples[c] for c, (name, _) in enumerate(ctx.observables)}
    meta = {
        "solver": "wmc_trajectory",
        "traj_index": traj_index,
        "seed": cfg.seed,
        "dt": cfg.dt,
        "jump_count": jump_count,
        "model": dict(model.labels),
        "wall": {"total_seconds": time.perf_counter() - t_start},
    }
    return TimeSeries(times=times, channels=channels, meta=meta)


def wmc_evolve(model: "ModelSpec", cfg: WmcConfig, t_final: float,
               sample_every: int = 1) -> TimeSeries:
    """Trajectory-averaged observables with per-sample standard errors.

    Trajectories are accumulated in index order, so the result depends
    only on (seed, n_traj), never on scheduling.
    """
    ctx = _prepare_jump_context(model, cfg, t_final, sample_every)
    t_start = time.perf_counter()
    psi0 = np.asarray(model.initial_state, dtype=np.complex128)
    psi0 = psi0 / np.linalg.norm(psi0)

    acc = None
    acc_sq = None
    total_jumps = 0
    for traj_index in range(cfg.n_traj):
        samples, jump_count = _run_trajectory(ctx, psi0, traj_index)
        total_jumps += jump_count
        if acc is None:
            acc = samples.copy()
            acc_sq = samples ** 2
        else:
            acc += samples
            acc_sq += samples ** 2

    n = cfg.n_traj
    mean = acc / n
    if n > 1:
        variance = np.clip(acc_sq - n * mean ** 2, 0.0, None) / (n - 1)
        stderr_arr = np.sqrt(variance / n)
    else:
        stderr_arr = np.zeros_like(mean)

    times = np.arange(mean.shape[1], dtype=float) * (cfg.dt * sample_every)
    names = [name for name, _ in ctx.observables]
    channels = {name: mean[c] for c, name in enumerate(names)}
    stderr = {name: stderr_arr[c] for c, name in enumerate(names)}
    meta = {
        "solver": "wmc",
        "n_traj": cfg.n_traj,
        "seed": cfg.seed,
        "dt": cfg.dt,
        "t_final": t_final,
        "sample_every": sample_every,
        "mean_jump_count": total_jumps / n,
        "model": dict(model.labels),
        "wall": {"total_seconds": time.perf_counter() - t_start},
    }
    return TimeSeries(times=times, channels=channels, meta=meta, stderr=stderr)
