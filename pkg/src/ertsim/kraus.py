"""One-step Kraus decomposition of a Lindblad generator.

For a Hamiltonian H and dissipators A_1..A_K (each already carrying its
sqrt-rate prefactor, hbar = 1 throughout), every dissipator k gets a pair
of transfer operators

    minus_k = expm(dt*G_k - i*sqrt(K*dt)*A_k)
    plus_k  = expm(dt*G_k + i*sqrt(K*dt)*A_k)
    G_k     = -i*H + (K/2)*(A_k @ A_k - A_k^dag @ A_k)

and the averaged channel

    rho -> (1/2K) sum_k (minus_k rho minus_k^dag + plus_k rho plus_k^dag)

agrees with one explicit Euler step of the master equation up to O(dt^2).
For Hermitian dissipators both operators are exactly unitary.  The pair
set is built once per run (H, A_k and dt are fixed), after which stepping
costs only matrix-vector products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NumericalError
from .linalg import as_operator, dagger, expm, spectral_norm


@dataclass(frozen=True)
class KrausPair:
    """The two transfer operators associated with one dissipator."""

    minus: np.ndarray
    plus: np.ndarray
    dissipator_index: int


@dataclass(frozen=True)
class KrausSet:
    """All transfer-operator pairs for one (H, dissipators, dt) choice."""

    pairs: tuple[KrausPair, ...]
    dt: float

    @property
    def n_dissipators(self) -> int:
        return len(self.pairs)

    @property
    def dim(self) -> int:
        return self.pairs[0].minus.shape[0]

    @cached_property
    def stacked(self) -> np.ndarray:
        """(2K, dim, dim) stack of all operators, minus/plus per dissipator."""
        ops = []
        for pair in self.pairs:
            ops.append(pair.minus)
            ops.append(pair.plus)
        return np.ascontiguousarray(np.stack(ops))


def build_generator(h, a_k, n_dissipators: int) -> np.ndarray:
    """Drift generator G_k = -i*H + (K/2)*(A_k^2 - A_k^dag A_k).

    Not anti-Hermitian in general; for Hermitian A_k it reduces to -i*H.
    """
    h = as_operator(h)
    a = as_operator(a_k)
    if h.shape != a.shape:
        raise NumericalError(
            f"dimension mismatch: H is {h.shape[0]}, dissipator is {a.shape[0]}"
        )
    if n_dissipators < 1:
        raise ValueError("n_dissipators >= 1 required")
    return -1j * h + 0.5 * n_dissipators * (a @ a - dagger(a) @ a)


def build_kraus_set(h, dissipators, dt: float) -> KrausSet:
    """Exponentiate the pair generators for every dissipator.

    Closed systems are handled by passing a single zero dissipator, which
    degenerates the channel to plain unitary evolution.
    """
    if dt <= 0:
        raise ValueError(f"dt > 0 required, got {dt}")
    ds = [as_operator(a) for a in dissipators]
    if not ds:
        raise ValueError(
            "at least one dissipator required; pass a zero matrix for a closed system"
        )
    h = as_operator(h)
    big_k = len(ds)
    phase = 1j * math.sqrt(big_k * dt)
    pairs = []
    for k, a in enumerate(ds):
        gen = dt * build_generator(h, a, big_k)
        pairs.append(
            KrausPair(minus=expm(gen - phase * a), plus=expm(gen + phase * a),
                      dissipator_index=k)
        )
    return KrausSet(pairs=tuple(pairs), dt=float(dt))


def completeness_residual(ks: KrausSet) -> float:
    """Spectral norm of (1/2K) sum_k (minus^dag minus + plus^dag plus) - I.

    O(dt^2) by construction; exactly zero (up to rounding) when every pair
    is unitary.
    """
    dim = ks.dim
    acc = np.zeros((dim, dim), dtype=np.complex128)
    for pair in ks.pairs:
        acc += dagger(pair.minus) @ pair.minus
        acc += dagger(pair.plus) @ pair.plus
    acc /= 2.0 * ks.n_dissipators
    acc -= np.eye(dim)
    return spectral_norm(acc)


def default_timestep(h, dissipators, target: float = 1e-3) -> float:
    """Step aimed at ~target relative method error.

    dt = target / max(|H|, K * max_k |A_k^dag A_k|) in spectral norms; the
    global error of the channel is first order in dt, so this targets a
    ~target relative error without model-specific tuning.
    """
    h = as_operator(h)
    ds = [as_operator(a) for a in dissipators]
    scale = spectral_norm(h)
    if ds:
        scale = max(scale, len(ds) * max(spectral_norm(dagger(a) @ a) for a in ds))
    if scale == 0.0:
        return target
    return target / scale
