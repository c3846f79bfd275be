"""Shared exception types and the memory-cap guard."""

from __future__ import annotations

import os

DEFAULT_MEMORY_CAP_BYTES = 8 << 30
MEMORY_CAP_ENV_VAR = "ERTSIM_MEMORY_CAP_BYTES"


class ErtsimError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(ErtsimError):
    """Run configuration is malformed or violates a precondition."""


class MemoryCapError(ErtsimError):
    """An allocation would exceed the configured memory cap."""

    def __init__(self, what: str, required_bytes: int, cap_bytes: int):
        super().__init__(
            f"{what} needs {required_bytes:,} bytes but the memory cap is {cap_bytes:,} bytes"
        )
        self.what = what
        self.required_bytes = required_bytes
        self.cap_bytes = cap_bytes


class NumericalError(ErtsimError):
    """A numerical contract was violated (non-Hermitian input, bad step size, ...)."""


def default_memory_cap() -> int:
    """Memory cap in bytes; ERTSIM_MEMORY_CAP_BYTES overrides the built-in default."""
    raw = os.environ.get(MEMORY_CAP_ENV_VAR)
    if raw is None:
        return DEFAULT_MEMORY_CAP_BYTES
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{MEMORY_CAP_ENV_VAR} must be an integer, got {raw!r}") from exc
    if cap <= 0:
        raise ConfigError(f"{MEMORY_CAP_ENV_VAR} must be positive, got {cap}")
    return cap


def check_memory(what: str, required_bytes: int, cap_bytes: int | None = None) -> None:
    """Fail fast (before allocating) when a computation would exceed the cap."""
    cap = default_memory_cap() if cap_bytes is None else int(cap_bytes)
    if required_bytes > cap:
        raise MemoryCapError(what, int(required_bytes), cap)
