"""Stable 64-bit FNV-1a hashing and the seed-splitting scheme.

Every random draw in the pipeline is seeded through ``derive_seed`` so that
per-example work is independent of iteration order and reproducible across
platforms and processes (Python's builtin ``hash`` is salted and unusable
for this).
"""

from __future__ import annotations

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a over ``data``."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def derive_seed(*parts: object) -> int:
    """Derive a child seed from an ordered sequence of parts.

    Parts are stringified and joined with ':' before hashing, so
    ``derive_seed(42, "rte:7", "flip", 3)`` is stable across runs.
    """
    key = ":".join(str(p) for p in parts)
    return fnv1a_64(key.encode("utf-8"))
