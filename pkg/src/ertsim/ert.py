"""Ensemble evolution with principal-component rank truncation.

A density matrix is carried as a set of unnormalized pure states whose
outer products sum to rho.  Each step sends every member through the 2K
transfer operators of a :class:`~ertsim.kraus.KrausSet`; once the set has
grown past the configured rank it is compressed back onto the dominant
principal components, so positivity of the reconstructed density matrix
holds by construction at every step.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from .errors import NumericalError
from .kraus import KrausSet, build_kraus_set
from .linalg import as_operator, eigh_descending, is_hermitian
from .series import TimeSeries

if TYPE_CHECKING:
    from .models import ModelSpec

# Overlap eigenvalues below this fraction of the largest are treated as
# zero and never retained, so near-null directions cannot amplify noise.
EIGENVALUE_FLOOR_REL = 1e-14

IMAG_TOL = 1e-8


@dataclass(frozen=True)
class Ensemble:
    """Ordered set of (generally unnormalized) pure states.

    ``members[k]`` is one state vector; the represented density matrix is
    sum_k outer(members[k], conj(members[k])).  Treated as immutable:
    every operation returns a new ensemble.
    """

    members: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.members, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] == 0:
            raise ValueError("members must be a nonempty (size, dim) array")
        object.__setattr__(self, "members", m)

    @property
    def size(self) -> int:
        return self.members.shape[0]

    @property
    def dim(self) -> int:
        return self.members.shape[1]

    @property
    def total_trace(self) -> float:
        """Trace of the represented density matrix: sum of squared norms."""
        return float(np.sum(np.abs(self.members) ** 2))


@dataclass(frozen=True)
class ErtConfig:
    """Rank / step configuration for :func:`evolve`."""

    rank: int
    dt: float
    renormalize_trace: bool = True

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"rank >= 1 required, got {self.rank}")
        if self.dt <= 0:
            raise ValueError(f"dt > 0 required, got {self.dt}")


def init_ensemble(initial) -> Ensemble:
    """Build the starting ensemble from a pure state or a mixture.

    A 1-D array is taken as a normalized pure state (single member).  A
    sequence of (weight, state) pairs with positive weights summing to one
    becomes one member sqrt(w)*state per component.
    """
    if isinstance(initial, np.ndarray) and initial.ndim == 1:
        vec = np.asarray(initial, dtype=np.complex128)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise NumericalError("initial state is the zero vector")
        if abs(norm - 1.0) > 1e-10:
            raise NumericalError(f"initial pure state is not normalized: |psi| = {norm}")
        return Ensemble(members=vec[np.newaxis, :].copy())

    pairs = list(initial)
    if not pairs:
        raise NumericalError("mixed initial state must have at least one component")
    weights = np.array([float(w) for w, _ in pairs])
    if np.any(weights <= 0):
        raise NumericalError("mixture weights must be positive")
    if abs(weights.sum() - 1.0) > 1e-10:
        raise NumericalError(f"mixture weights sum to {weights.sum()}, expected 1")
    members = []
    for w, vec in pairs:
        vec = np.asarray(vec, dtype=np.complex128)
        norm = float(np.linalg.norm(vec))
        if abs(norm - 1.0) > 1e-10:
            raise NumericalError("mixture component is not normalized")
        members.append(math.sqrt(w) * vec)
    return Ensemble(members=np.array(members))


def kraus_step(e: Ensemble, ks: KrausSet) -> Ensemble:
    """Apply every transfer operator to every member.

    Returns 2K * size members, each scaled by 1/sqrt(2K) so that the
    outer-product sum carries the channel's 1/(2K) prefactor without
    external weights.
    """
    if e.dim != ks.dim:
        raise NumericalError(
            f"dimension mismatch: ensemble dim {e.dim}, Kraus dim {ks.dim}"
        )
    two_k = 2 * ks.n_dissipators
    scale = 1.0 / math.sqrt(two_k)
    # One batched product per step: (2K, dim, dim) @ (dim, L) -> (2K, dim, L).
    out = np.matmul(ks.stacked, e.members.T)
    new_members = out.transpose(0, 2, 1).reshape(two_k * e.size, e.dim)
    return Ensemble(members=scale * new_members)


def _principal_components(e: Ensemble):
    """Weights (descending) and orthogonal member rows spanning the ensemble.

    Two equivalent routes: for size <= dim, diagonalize the overlap matrix
    S_ij = <psi_i|psi_j> and recombine the members with its eigenvectors;
    for size > dim it is cheaper to diagonalize the reconstructed density
    matrix directly, whose nonzero spectrum is identical, and whose
    eigenvectors scaled by sqrt(w) are exactly the recombined members.
    """
    m = e.members
    if e.size <= e.dim:
        overlap = m.conj() @ m.T
        res = eigh_descending(overlap)
        w = res.eigenvalues
        rows = res.eigenvectors.T @ m
    else:
        rho = m.T @ m.conj()
        res = eigh_descending(rho)
        w = res.eigenvalues
        rows = np.sqrt(np.clip(w, 0.0, None))[:, np.newaxis] * res.eigenvectors.T
    return w, rows


def orthogonalize_truncate(
    e: Ensemble,
    rank: int,
    renormalize: bool = True,
    target_trace: float | None = None,
) -> Ensemble:
    """Compress the ensemble onto its dominant principal components.

    Keeps at most ``rank`` members (fewer if the ensemble has lower
    numerical rank).  With ``renormalize`` the retained members are scaled
    by a single global factor so the reconstructed trace equals
    ``target_trace`` (default: the pre-truncation trace), preserving
    relative weights.
    """
    if rank < 1:
        raise ValueError(f"rank >= 1 required, got {rank}")
    total = e.total_trace
    w, rows = _principal_components(e)
    if w[0] <= 0.0:
        raise NumericalError("ensemble has no positive weight (all overlap eigenvalues <= 0)")
    floor = EIGENVALUE_FLOOR_REL * w[0]
    keep = min(rank, int(np.count_nonzero(w > floor)))
    new_members = rows[:keep]
    if renormalize:
        kept = float(np.sum(w[:keep]))
        target = total if target_trace is None else float(target_trace)
        new_members = new_members * math.sqrt(target / kept)
    return Ensemble(members=np.ascontiguousarray(new_members))


def expectation(e: Ensemble, o, check_hermitian: bool = True) -> float:
    """sum_k <psi_k|O|psi_k> for a Hermitian observable O."""
    o = as_operator(o)
    if check_hermitian and not is_hermitian(o):
        raise NumericalError("observable is not Hermitian within tolerance")
    m = e.members
    val = complex(np.sum((m.conj() @ o) * m))
    if abs(val.imag) > IMAG_TOL * (1.0 + abs(val.real)):
        raise NumericalError(
            f"expectation has a non-negligible imaginary part: {val.imag:g}"
        )
    return float(val.real)


def reconstruct_density(e: Ensemble) -> np.ndarray:
    """Dense density matrix sum_k |psi_k><psi_k| (testing and diagnostics only)."""
    m = e.members
    return m.T @ m.conj()


def evolve(
    model: "ModelSpec",
    cfg: ErtConfig,
    t_final: float,
    sample_every: int = 1,
    on_step: Callable[[int, Ensemble], None] | None = None,
) -> TimeSeries:
    """Propagate a model with the rank-truncated ensemble scheme.

    Every step applies the Kraus channel; whenever the member count
    exceeds ``cfg.rank`` the ensemble is orthogonalized and truncated
    (with trace pinned to its initial value when renormalization is on).
    Observables are evaluated after truncation, every ``sample_every``
    steps.  ``on_step`` (if given) sees the post-truncation ensemble at
    every step; it exists for invariant monitoring in tests.
    """
    if t_final <= 0:
        raise ValueError(f"t_final > 0 required, got {t_final}")
    if sample_every < 1:
        raise ValueError(f"sample_every >= 1 required, got {sample_every}")
    n_steps = int(round(t_final / cfg.dt))
    if n_steps < 1:
        raise ValueError("t_final is shorter than one step")

    t_start = time.perf_counter()
    dissipators = list(model.dissipators)
    if not dissipators:
        # Closed system: a single zero dissipator degenerates the channel
        # to unitary evolution.
        dissipators = [np.zeros_like(model.hamiltonian)]
    ks = build_kraus_set(model.hamiltonian, dissipators, cfg.dt)
    build_seconds = time.perf_counter() - t_start

    observables = []
    for name, op in model.observables.items():
        op = as_operator(op)
        if not is_hermitian(op):
            raise NumericalError(f"observable {name!r} is not Hermitian within tolerance")
        observables.append((name, op))

    ensemble = init_ensemble(model.initial_state)
    target_trace = ensemble.total_trace

    sample_steps = [0]
    records: dict[str, list[float]] = {name: [] for name, _ in observables}
    propagate_seconds = 0.0
    truncate_seconds = 0.0
    observe_seconds = 0.0

    def sample(ens: Ensemble) -> None:
        nonlocal observe_seconds
        t0 = time.perf_counter()
        for name, op in observables:
            records[name].append(expectation(ens, op, check_hermitian=False))
        observe_seconds += time.perf_counter() - t0

    sample(ensemble)
    for step in range(1, n_steps + 1):
        t0 = time.perf_counter()
        ensemble = kraus_step(ensemble, ks)
        propagate_seconds += time.perf_counter() - t0
        if ensemble.size > cfg.rank:
            t0 = time.perf_counter()
            ensemble = orthogonalize_truncate(
                ensemble,
                cfg.rank,
                renormalize=cfg.renormalize_trace,
                target_trace=target_trace if cfg.renormalize_trace else None,
            )
            truncate_seconds += time.perf_counter() - t0
        if on_step is not None:
            on_step(step, ensemble)
        if step % sample_every == 0:
            sample_steps.append(step)
            sample(ensemble)

    times = np.array(sample_steps, dtype=float) * cfg.dt
    total_seconds = time.perf_counter() - t_start
    meta = {
        "solver": "ert",
        "rank": cfg.rank,
        "dt": cfg.dt,
        "renormalize_trace": cfg.renormalize_trace,
        "t_final": t_final,
        "sample_every": sample_every,
        "n_steps": n_steps,
        "model": dict(model.labels),
        "wall": {
            "build_seconds": build_seconds,
            "propagate_seconds": propagate_seconds,
            "truncate_seconds": truncate_seconds,
            "observe_seconds": observe_seconds,
            "total_seconds": total_seconds,
        },
    }
    return TimeSeries(
        times=times,
        channels={name: np.array(vals) for name, vals in records.items()},
        meta=meta,
    )
