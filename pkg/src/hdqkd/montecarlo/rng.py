"""Counter-based uniforms: each (seed, frame, draw) maps to a fixed double.

A frame's random numbers never depend on which worker or batch simulates it,
so splitting a run across processes cannot change the result.  The mixer is
the SplitMix64 finalizer; the compiled kernel implements the same arithmetic.
"""
from __future__ import annotations

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1
_TO_UNIT = 2.0 ** -53


def mix64_int(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def stream_key(seed: int) -> int:
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return mix64_int(seed + GOLDEN)


def uniform(key: int, frame: int, draw: int) -> float:
    """Scalar reference for one draw."""
    z = mix64_int(key ^ frame)
    z = mix64_int(z + (draw + 1) * GOLDEN)
    return (z >> 11) * _TO_UNIT


def mix64(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def frame_keys(key: int, frames: np.ndarray) -> np.ndarray:
    return mix64(np.uint64(key) ^ frames.astype(np.uint64))


def uniforms(fkeys: np.ndarray, draw: int) -> np.ndarray:
    """Draw ``draw`` for every frame key, vectorized."""
    offset = np.uint64(((draw + 1) * GOLDEN) & _MASK)
    z = mix64(fkeys + offset)
    return (z >> np.uint64(11)).astype(np.float64) * _TO_UNIT
