"""Deterministic 64-bit seed mixing and a tiny portable random stream.

Caption synthesis must be byte-identical across runs, platforms, and
implementations, so nothing here depends on Python's ``random`` module.
The mix function is part of the corpus format:

    mix_seed(seed, image_id, variant) =
        fnv1a64( le64(seed) || utf8(image_id) || le64(variant) )

where ``le64`` is 64-bit little-endian encoding and ``fnv1a64`` is the
standard 64-bit FNV-1a hash. The mixed value seeds a splitmix64 stream
whose draws are consumed in a fixed, documented order by the renderer.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state once; returns (new_state, output)."""
    state = (state + _SPLITMIX_GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def mix_seed(seed: int, image_id: str, variant: int) -> int:
    """Derive the per-(record, variant) stream seed from a corpus seed."""
    if seed < 0:
        raise ValueError("seed must be >= 0")
    if variant < 0:
        raise ValueError("variant index must be >= 0")
    payload = (
        (seed & _MASK64).to_bytes(8, "little")
        + image_id.encode("utf-8")
        + (variant & _MASK64).to_bytes(8, "little")
    )
    return fnv1a64(payload)


class SeedStream:
    """Sequence of pseudo-random draws from a splitmix64 generator.

    Draw order is significant: callers document which decision consumes
    which draw so that output files stay reproducible.
    """

    def __init__(self, state: int) -> None:
        self._state = state & _MASK64

    def next_u64(self) -> int:
        self._state, out = splitmix64(self._state)
        return out

    def choice_index(self, n: int) -> int:
        """Index in [0, n). Modulo bias is negligible for small n."""
        if n <= 0:
            raise ValueError("cannot choose from an empty range")
        return self.next_u64() % n

    def uniform(self) -> float:
        """Float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) / float(1 << 53)
