"""Splittable deterministic seed derivation.

Every stochastic step in the pipeline draws from a seed derived as

    mix64(global_seed, string_key(pair_id), side_code, region_index)

so that pair builds can run in any order (or in parallel) and still
produce identical bytes. ``mix64`` is a left fold, which makes the
derivation composable: ``mix64(a, b, c) == mix64(mix64(a, b), c)``.
"""

from __future__ import annotations

import hashlib

_MASK = (1 << 64) - 1

SIDE_CODE = {"A": 1, "T": 2}


def _splitmix64(x: int) -> int:
    # Finalizer from the splitmix64 generator; full 64-bit avalanche.
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def mix64(value: int, *more: int) -> int:
    """Fold one or more integers into a 64-bit seed."""
    state = _splitmix64(value & _MASK)
    for v in more:
        state = _splitmix64((state ^ (v & _MASK)) & _MASK)
    return state


def string_key(text: str) -> int:
    """Stable 64-bit key for a string (process-independent)."""
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def region_seed(global_seed: int, pair_id: str, side: str, region_index: int) -> int:
    """Seed for one region's distortion on one side of one pair."""
    return mix64(global_seed, string_key(pair_id), SIDE_CODE[side], region_index)
