"""Benchmark model builders and the operator algebra needed to assemble them.

Conventions used everywhere:

* hbar = 1; all rates and couplings are dimensionless multiples of the
  model's base frequency (h for the spin chain, g for the cavity, t0 for
  the Hubbard chain).
* Two-level basis ordering is excited state first, so sigma_z = diag(1, -1)
  and sigma_minus = [[0, 0], [1, 0]] lowers excited to ground.
* Site 1 is the leftmost Kronecker factor.
* Fermionic modes are ordered (1 up, 1 down, 2 up, 2 down, ...) with the
  occupied state first per mode; annihilators carry the usual string of
  sigma_z factors on all earlier modes.
* Dissipators carry their sqrt-rate prefactors; a rate of zero means the
  dissipator is omitted entirely.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NumericalError, check_memory
from .linalg import as_operator, dagger, is_hermitian, kron_all
from .series import TimeSeries

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128)
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=np.complex128)
IDENTITY_2 = np.eye(2, dtype=np.complex128)

_COMPLEX_BYTES = 16


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Hamiltonian, dissipators, observables and initial state of one system."""

    hamiltonian: np.ndarray
    dissipators: tuple[np.ndarray, ...]
    observables: dict[str, np.ndarray]
    initial_state: np.ndarray | tuple[tuple[float, np.ndarray], ...]
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        h = as_operator(self.hamiltonian)
        if not is_hermitian(h):
            raise NumericalError("model Hamiltonian is not Hermitian within tolerance")
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(
            self, "dissipators", tuple(as_operator(a) for a in self.dissipators)
        )
        for a in self.dissipators:
            if a.shape != h.shape:
                raise NumericalError("dissipator dimension does not match the Hamiltonian")
        for name, op in self.observables.items():
            op = as_operator(op)
            if op.shape != h.shape:
                raise NumericalError(f"observable {name!r} dimension mismatch")
            if not is_hermitian(op):
                raise NumericalError(f"observable {name!r} is not Hermitian within tolerance")

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


@dataclass(frozen=True)
class SpinChainParams:
    """Isotropic spin chain with onsite dephasing and terminal injection/absorption."""

    n_sites: int
    h: float = 1.0
    j: float = 1.0
    gamma: float = 0.0
    big_gamma: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError(f"n_sites >= 2 required, got {self.n_sites}")
        if self.gamma < 0 or self.big_gamma < 0:
            raise ValueError("rates gamma and big_gamma must be >= 0")
        if not -1.0 <= self.mu <= 1.0:
            raise ValueError(f"mu in [-1, 1] required, got {self.mu}")


@dataclass(frozen=True, eq=False)
class CavityParams:
    """Two-level emitters coupled to one driven, lossy cavity mode."""

    n_atoms: int
    n_photon_levels: int = 6
    g: float = 1.0
    kappa: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    lambda_matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ValueError(f"n_atoms >= 1 required, got {self.n_atoms}")
        if self.n_photon_levels < 2:
            raise ValueError(f"n_photon_levels >= 2 required, got {self.n_photon_levels}")
        if self.kappa < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("rates kappa, beta and gamma must be >= 0")
        if self.lambda_matrix is not None:
            lam = as_operator(self.lambda_matrix)
            if lam.shape[0] != self.n_atoms:
                raise ValueError("lambda_matrix must be n_atoms x n_atoms")
            if not is_hermitian(lam):
                raise ValueError("lambda_matrix must be Hermitian")
            object.__setattr__(self, "lambda_matrix", lam)

    def effective_lambda(self) -> np.ndarray:
        """Emitter energy matrix; defaults to diag(20 * g * atom_index)."""
        if self.lambda_matrix is not None:
            return self.lambda_matrix
        return np.diag(20.0 * self.g * np.arange(1, self.n_atoms + 1)).astype(np.complex128)


@dataclass(frozen=True)
class HubbardParams:
    """Open Hubbard chain driven by terminal particle injection/absorption."""

    n_sites: int
    t0: float = 1.0
    u: float = 0.0
    big_gamma: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError(f"n_sites >= 2 required, got {self.n_sites}")
        if self.big_gamma < 0:
            raise ValueError("big_gamma must be >= 0")
        if not -1.0 <= self.mu <= 1.0:
            raise ValueError(f"mu in [-1, 1] required, got {self.mu}")


def site_operator(op, site: int, n_sites: int, local_dim: int = 2) -> np.ndarray:
    """Embed a single-site operator: identities left and right of ``site`` (1-based)."""
    if not 1 <= site <= n_sites:
        raise ValueError(f"site {site} out of range 1..{n_sites}")
    op = as_operator(op)
    if op.shape[0] != local_dim:
        raise ValueError(f"operator dimension {op.shape[0]} != local_dim {local_dim}")
    eye = np.eye(local_dim, dtype=np.complex128)
    factors = [eye] * (site - 1) + [op] + [eye] * (n_sites - site)
    return kron_all(factors)


def annihilation_operator(n_levels: int) -> np.ndarray:
    """Bosonic annihilation on a truncated Fock ladder, vacuum at index 0."""
    if n_levels < 2:
        raise ValueError("n_levels >= 2 required")
    return np.diag(np.sqrt(np.arange(1, n_levels, dtype=float)), k=1).astype(np.complex128)


def jordan_wigner(site: int, spin: str, n_sites: int) -> np.ndarray:
    """Fermionic annihilator c_{site,spin} on the 4^n_sites space.

    Modes are ordered (1 up, 1 down, 2 up, 2 down, ...); the operator is
    the mode-local lowering matrix with sigma_z strings on earlier modes,
    which gives the canonical anticommutation relations exactly.
    """
    if spin not in ("up", "down"):
        raise ValueError(f"spin must be 'up' or 'down', got {spin!r}")
    if not 1 <= site <= n_sites:
        raise ValueError(f"site {site} out of range 1..{n_sites}")
    mode = 2 * (site - 1) + (0 if spin == "up" else 1)
    n_modes = 2 * n_sites
    factors = [SIGMA_Z] * mode + [SIGMA_MINUS] + [IDENTITY_2] * (n_modes - mode - 1)
    return kron_all(factors)


def _guard_model_memory(name: str, dim: int, n_operators: int,
                        memory_cap_bytes: int | None) -> None:
    check_memory(f"{name} model operators", n_operators * dim * dim * _COMPLEX_BYTES,
                 memory_cap_bytes)


def build_heisenberg(p: SpinChainParams,
                     memory_cap_bytes: int | None = None) -> ModelSpec:
    """Isotropic exchange chain in a uniform field.

    H = -pi*h * sum_j sigma_z^(j) - pi*J * sum_j vec(sigma)^(j).vec(sigma)^(j+1),
    with per-site sqrt(gamma)*sigma_z dephasing and biased raising/lowering
    dissipators on the end sites.  Observables are the per-site sigma_z;
    the initial state points every spin along +x.
    """
    n = p.n_sites
    dim = 2 ** n
    n_ops = 2 + n + (n if p.gamma > 0 else 0) + (4 if p.big_gamma > 0 else 0)
    _guard_model_memory("heisenberg", dim, n_ops, memory_cap_bytes)

    hamiltonian = np.zeros((dim, dim), dtype=np.complex128)
    for j in range(1, n + 1):
        hamiltonian -= np.pi * p.h * site_operator(SIGMA_Z, j, n)
    for j in range(1, n):
        for pauli in (SIGMA_X, SIGMA_Y, SIGMA_Z):
            hamiltonian -= np.pi * p.j * (
                site_operator(pauli, j, n) @ site_operator(pauli, j + 1, n)
            )

    dissipators = []
    if p.gamma > 0:
        for j in range(1, n + 1):
            dissipators.append(np.sqrt(p.gamma) * site_operator(SIGMA_Z, j, n))
    if p.big_gamma > 0:
        dissipators.append(
            np.sqrt(p.big_gamma * (1 - p.mu)) * site_operator(SIGMA_PLUS, 1, n))
        dissipators.append(
            np.sqrt(p.big_gamma * (1 + p.mu)) * site_operator(SIGMA_MINUS, 1, n))
        dissipators.append(
            np.sqrt(p.big_gamma * (1 + p.mu)) * site_operator(SIGMA_PLUS, n, n))
        dissipators.append(
            np.sqrt(p.big_gamma * (1 - p.mu)) * site_operator(SIGMA_MINUS, n, n))

    observables = {
        f"sz_{j}": site_operator(SIGMA_Z, j, n) for j in range(1, n + 1)
    }
    plus = np.array([1.0, 1.0], dtype=np.complex128) / np.sqrt(2.0)
    state = plus
    for _ in range(n - 1):
        state = np.kron(state, plus)

    labels = {
        "model": "heisenberg", "n_sites": n, "h": p.h, "j": p.j,
        "gamma": p.gamma, "big_gamma": p.big_gamma, "mu": p.mu,
    }
    return ModelSpec(hamiltonian=hamiltonian, dissipators=tuple(dissipators),
                     observables=observables, initial_state=state, labels=labels)


def build_cavity(p: CavityParams, memory_cap_bytes: int | None = None) -> ModelSpec:
    """Emitters exchanging excitations with one coherently driven cavity mode.

    Tensor order is cavity mode first, then the atoms.  Dissipators are
    sqrt(kappa)*a (cavity loss) and sqrt(gamma)*sum_j sigma_minus^(j)
    (collective emitter decay).  Observables are the collective sigma_z and
    the photon number; each atom starts in (|e> + |g>)/sqrt(2) with the
    cavity empty.
    """
    n = p.n_atoms
    dim = p.n_photon_levels * 2 ** n
    _guard_model_memory("cavity", dim, 6 + n, memory_cap_bytes)

    eye_atoms = np.eye(2 ** n, dtype=np.complex128)
    eye_ph = np.eye(p.n_photon_levels, dtype=np.complex128)
    a_op = np.kron(annihilation_operator(p.n_photon_levels), eye_atoms)

    def atom_op(op, j):
        return np.kron(eye_ph, site_operator(op, j, n))

    lam = p.effective_lambda()
    hamiltonian = np.zeros((dim, dim), dtype=np.complex128)
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if lam[i - 1, j - 1] != 0:
                hamiltonian += lam[i - 1, j - 1] * (
                    atom_op(SIGMA_PLUS, i) @ atom_op(SIGMA_MINUS, j)
                )
    for j in range(1, n + 1):
        hamiltonian += p.g * (
            dagger(a_op) @ atom_op(SIGMA_MINUS, j) + a_op @ atom_op(SIGMA_PLUS, j)
        )
    hamiltonian += np.sqrt(p.kappa) * p.beta * (a_op + dagger(a_op))

    dissipators = []
    if p.kappa > 0:
        dissipators.append(np.sqrt(p.kappa) * a_op)
    if p.gamma > 0:
        collective = np.zeros((dim, dim), dtype=np.complex128)
        for j in range(1, n + 1):
            collective += atom_op(SIGMA_MINUS, j)
        dissipators.append(np.sqrt(p.gamma) * collective)

    sz_total = np.zeros((dim, dim), dtype=np.complex128)
    for j in range(1, n + 1):
        sz_total += atom_op(SIGMA_Z, j)
    observables = {"sz_total": sz_total, "photon_number": dagger(a_op) @ a_op}

    vacuum = np.zeros(p.n_photon_levels, dtype=np.complex128)
    vacuum[0] = 1.0
    plus = np.array([1.0, 1.0], dtype=np.complex128) / np.sqrt(2.0)
    state = vacuum
    for _ in range(n):
        state = np.kron(state, plus)

    labels = {
        "model": "cavity", "n_atoms": n, "n_photon_levels": p.n_photon_levels,
        "g": p.g, "kappa": p.kappa, "beta": p.beta, "gamma": p.gamma,
    }
    return ModelSpec(hamiltonian=hamiltonian, dissipators=tuple(dissipators),
                     observables=observables, initial_state=state, labels=labels)


def _half_filled_ground_state(hamiltonian: np.ndarray, number_op: np.ndarray,
                              n_particles: int, penalty: float) -> np.ndarray:
    """Lowest eigenvector of H restricted to the target particle number.

    H commutes with the total number, so adding penalty*(N - target)^2
    separates the sectors without mixing them; the ground state of the
    shifted operator is the half-filled ground state of H.
    """
    dim = hamiltonian.shape[0]
    shift = number_op - n_particles * np.eye(dim)
    penalized = hamiltonian + penalty * (shift @ shift)
    w, u = np.linalg.eigh(penalized)
    scale = max(1.0, abs(float(w[0])))
    if w[1] - w[0] < 1e-8 * scale:
        warnings.warn(
            "half-filled ground state is degenerate; picking the lowest-index eigenvector",
            stacklevel=3,
        )
    psi = np.ascontiguousarray(u[:, 0])
    filling = float(np.real(psi.conj() @ number_op @ psi))
    if abs(filling - n_particles) > 1e-6:
        raise NumericalError(
            f"penalty shift failed to select the half-filled sector "
            f"(<N> = {filling}, expected {n_particles})"
        )
    return psi


def build_fermi_hubbard(p: HubbardParams,
                        memory_cap_bytes: int | None = None) -> ModelSpec:
    """Hubbard chain with particle injection/absorption at both ends.

    H = -t0 * sum_{j,s} (c^dag_{j,s} c_{j+1,s} + h.c.) + U * sum_j n_{j,up} n_{j,down}.
    The eight terminal dissipators remove particles at site 1 and add them
    at site N with weight sqrt(Gamma*(1 - mu)), and do the reverse with
    weight sqrt(Gamma*(1 + mu)).  Observables are the (Hermitian) bond
    current -i*t0*sum_{j,s}(c^dag_{j,s} c_{j+1,s} - c^dag_{j+1,s} c_{j,s})
    and the total particle number; the run starts from the half-filled
    ground state of the isolated chain.
    """
    n = p.n_sites
    dim = 4 ** n
    _guard_model_memory("fermi_hubbard", dim, 12 + 4 * n, memory_cap_bytes)

    c_ops = {
        (j, spin): jordan_wigner(j, spin, n)
        for j in range(1, n + 1) for spin in ("up", "down")
    }

    hamiltonian = np.zeros((dim, dim), dtype=np.complex128)
    for j in range(1, n):
        for spin in ("up", "down"):
            hop = dagger(c_ops[(j, spin)]) @ c_ops[(j + 1, spin)]
            hamiltonian -= p.t0 * (hop + dagger(hop))
    number_op = np.zeros((dim, dim), dtype=np.complex128)
    for (j, spin), c in c_ops.items():
        number_op += dagger(c) @ c
    for j in range(1, n + 1):
        n_up = dagger(c_ops[(j, "up")]) @ c_ops[(j, "up")]
        n_down = dagger(c_ops[(j, "down")]) @ c_ops[(j, "down")]
        hamiltonian += p.u * (n_up @ n_down)

    dissipators = []
    if p.big_gamma > 0:
        absorb = np.sqrt(p.big_gamma * (1 - p.mu))
        inject = np.sqrt(p.big_gamma * (1 + p.mu))
        for spin in ("up", "down"):
            dissipators.append(absorb * c_ops[(1, spin)])
        for spin in ("up", "down"):
            dissipators.append(inject * dagger(c_ops[(1, spin)]))
        for spin in ("up", "down"):
            dissipators.append(inject * c_ops[(n, spin)])
        for spin in ("up", "down"):
            dissipators.append(absorb * dagger(c_ops[(n, spin)]))

    current = np.zeros((dim, dim), dtype=np.complex128)
    for j in range(1, n):
        for spin in ("up", "down"):
            hop = dagger(c_ops[(j, spin)]) @ c_ops[(j + 1, spin)]
            current += -1j * p.t0 * (hop - dagger(hop))
    observables = {"current": current, "total_number": number_op}

    # Sector separation: the penalty gap (>= penalty) must exceed the full
    # many-body spectral spread of H.
    penalty = 10.0 * (4.0 * abs(p.t0) * n + abs(p.u) * n + 1.0)
    state = _half_filled_ground_state(hamiltonian, number_op, n, penalty)

    labels = {
        "model": "fermi_hubbard", "n_sites": n, "t0": p.t0, "u": p.u,
        "big_gamma": p.big_gamma, "mu": p.mu,
    }
    return ModelSpec(hamiltonian=hamiltonian, dissipators=tuple(dissipators),
                     observables=observables, initial_state=state, labels=labels)


def dipole_acceleration(series: TimeSeries, channel: str = "current",
                        out_channel: str = "dipole_acceleration") -> TimeSeries:
    """Time derivative of a current channel by finite differences.

    Central differences in the interior, second-order one-sided stencils
    at the endpoints (exact for linear signals everywhere).
    """
    if series.times.size < 3:
        raise ValueError("need at least 3 samples to differentiate")
    dt = series.dt  # raises on a non-uniform grid
    values = series.channel(channel)
    deriv = np.gradient(values, dt)
    meta = dict(series.meta)
    meta["derived_from"] = channel
    return TimeSeries(times=series.times.copy(), channels={out_channel: deriv}, meta=meta)
