from __future__ import annotations

import hashlib
from typing import Tuple, Union

import numpy as np

from .errors import ConfigError


# Seed derivation constants
SEED_PREFIX = b"BOOLCD-SEED-V1"
SEED_LIMIT = 1 << 64
UNIT_DRAW_BITS = 32


def check_seed(seed: int) -> int:
    """The seed as an int; ConfigError unless it is an unsigned 64-bit value."""
    value = int(seed)
    if not 0 <= value < SEED_LIMIT:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return value


def derive_seed(seed: int, *labels: Union[str, int]) -> int:
    """
    Derive an independent 64-bit child seed from a base seed and labels.

    The derivation is a hash chain, so every (seed, labels) pair names a
    distinct stream regardless of platform or numpy version:

        state = SHA256("BOOLCD-SEED-V1" || seed_u64_be)
        for label in labels:
            state = SHA256(state || utf8(str(label)) || 0x00)
        child = first 8 bytes of state, big-endian

    Args:
        seed: Base seed (unsigned 64-bit)
        *labels: Component names ("A", "noise", "restart", 3, ...)

    Returns:
        Child seed in [0, 2**64)

    Raises:
        ConfigError: when seed lies outside [0, 2**64)
    """
    h = hashlib.sha256()
    h.update(SEED_PREFIX)
    h.update(check_seed(seed).to_bytes(8, "big"))
    state = h.digest()
    for label in labels:
        h = hashlib.sha256()
        h.update(state)
        h.update(str(label).encode("utf-8"))
        h.update(b"\x00")
        state = h.digest()
    return int.from_bytes(state[:8], "big")


def generator(seed: int, *labels: Union[str, int]) -> np.random.Generator:
    """PCG64 generator for the stream named by (seed, labels)."""
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *labels)))


def bernoulli_bits(
    rng: np.random.Generator,
    shape: Tuple[int, ...],
    p: float,
) -> np.ndarray:
    """
    Draw i.i.d. Bernoulli(p) cells on an integer-only path.

    Each cell compares a uniform 32-bit integer with round(p * 2**32), so
    p == 0 yields no ones and p == 1 yields all ones exactly.

    Returns:
        uint8 array of 0/1 values
    """
    threshold = int(round(p * (1 << UNIT_DRAW_BITS)))
    draws = rng.integers(0, 1 << UNIT_DRAW_BITS, size=shape, dtype=np.uint64)
    return (draws < np.uint64(threshold)).astype(np.uint8)
