"""Dense complex linear-algebra kernels shared by all solvers.

Everything operates on plain complex128 ndarrays at desk scale (Hilbert
dimensions up to a few thousand), so dense storage and LAPACK-backed
routines are used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError

# Largest Hilbert dimension a Kronecker product may produce.
MAX_KRON_DIM = 1 << 15

# Structural tolerance for Hermiticity checks.
HERMITIAN_TOL = 1e-10


def as_operator(a) -> np.ndarray:
    """Coerce to a square, finite complex128 matrix."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NumericalError(f"operator must be a square matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise NumericalError("operator has non-finite entries")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def spectral_norm(a) -> float:
    return float(np.linalg.norm(a, 2))


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    """Entrywise Hermiticity check: max|a - a^dag| <= tol * max(1, max|a|)."""
    defect = np.max(np.abs(a - a.conj().T))
    return bool(defect <= tol * max(1.0, float(np.max(np.abs(a)))))


def kron(a, b, max_dim: int = MAX_KRON_DIM) -> np.ndarray:
    """Kronecker product with a guard on the resulting Hilbert dimension."""
    a = as_operator(a)
    b = as_operator(b)
    dim = a.shape[0] * b.shape[0]
    if dim > max_dim:
        raise NumericalError(
            f"kron would produce dimension {dim}, beyond the configured maximum {max_dim}"
        )
    return np.kron(a, b)


def kron_all(ops, max_dim: int = MAX_KRON_DIM) -> np.ndarray:
    """Left-to-right Kronecker product; the first entry is the leftmost factor."""
    ops = list(ops)
    if not ops:
        raise ValueError("kron_all needs at least one factor")
    out = as_operator(ops[0])
    for op in ops[1:]:
        out = kron(out, op, max_dim=max_dim)
    return out


def expm(a) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring with a Pade core)."""
    return scipy.linalg.expm(as_operator(a))


@dataclass(frozen=True)
class HermitianEigenResult:
    """Eigendecomposition with eigenvalues sorted in descending order.

    Column k of ``eigenvectors`` belongs to ``eigenvalues[k]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def eigh_descending(s, tol: float = HERMITIAN_TOL) -> HermitianEigenResult:
    """Eigendecompose a Hermitian matrix, largest eigenvalue first.

    The input is symmetrized before decomposition; inputs that are not
    Hermitian within ``tol`` are rejected.
    """
    s = as_operator(s)
    if not is_hermitian(s, tol):
        raise NumericalError(f"matrix is not Hermitian within tolerance {tol}")
    sym = 0.5 * (s + s.conj().T)
    w, u = np.linalg.eigh(sym)
    return HermitianEigenResult(
        eigenvalues=np.ascontiguousarray(w[::-1]),
        eigenvectors=np.ascontiguousarray(u[:, ::-1]),
    )
