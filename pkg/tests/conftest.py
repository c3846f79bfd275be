import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# Numeric property tests routinely exceed hypothesis' default deadline on
# slow CI boxes; examples stay small so runtime is bounded anyway.
settings.register_profile(
    "numeric",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("numeric")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_state(rng, dim):
    vec = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return vec / np.linalg.norm(vec)


def random_operator(rng, dim, norm=None):
    mat = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    if norm is not None:
        mat *= norm / np.linalg.norm(mat, 2)
    return mat


def random_hermitian(rng, dim, norm=None):
    mat = random_operator(rng, dim)
    mat = 0.5 * (mat + mat.conj().T)
    if norm is not None:
        mat *= norm / np.linalg.norm(mat, 2)
    return mat
