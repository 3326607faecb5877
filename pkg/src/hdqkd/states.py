"""Protocol states of the time-bin/phase BB84 scheme.

Each state is a two-pulse wavepacket spread over a frame of time bins.  In
four dimensions the Z basis uses adjacent bins (t1t2, t3t4) and the X basis
uses bins one slot apart (t1t3, t2t4); the symbol's parity selects the
relative phase 0 or pi.  The two-dimensional comparison protocol uses a
two-bin frame with relative phases {0, pi} (Z) and {pi/2, 3pi/2} (X).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

EXACT_TOL = 1e-12
BIN_PITCH_S = 800e-12
DIMENSIONS = (2, 4)

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


class Basis(str, Enum):
    Z = "Z"
    X = "X"


@dataclass(frozen=True)
class TimeBin:
    index: int
    duration: float = BIN_PITCH_S

    def __post_init__(self):
        if not 0 <= self.index <= 3:
            raise ValueError(f"time-bin index {self.index} outside 0..3")
        if not self.duration > 0:
            raise ValueError("bin pitch must be positive")

    @property
    def label(self) -> str:
        return f"t{self.index + 1}"


def check_dimension(dimension: int) -> int:
    if dimension not in DIMENSIONS:
        raise ValueError(f"dimension must be 2 or 4, got {dimension!r}")
    return dimension


def occupied_bins(basis: Basis, symbol: int, dimension: int = 4) -> tuple[int, int]:
    """Indices of the two bins carrying the pulses of ``(basis, symbol)``."""
    basis = Basis(basis)
    check_dimension(dimension)
    if not 0 <= symbol < dimension:
        raise ValueError(f"symbol {symbol!r} out of range for d={dimension}")
    if dimension == 2:
        return (0, 1)
    pair = symbol // 2
    if basis is Basis.Z:
        return (2 * pair, 2 * pair + 1)
    return (pair, pair + 2)


def relative_phase(basis: Basis, symbol: int, dimension: int = 4) -> float:
    """Phase of the second pulse relative to the first, in radians."""
    basis = Basis(basis)
    occupied_bins(basis, symbol, dimension)
    phase = math.pi * (symbol % 2)
    if dimension == 2 and basis is Basis.X:
        phase += math.pi / 2
    return phase


def encode(basis: Basis, symbol: int, dimension: int = 4) -> np.ndarray:
    """Return the normalized amplitude vector of a protocol state.

    >>> encode("Z", 3).real.round(4).tolist()
    [0.0, 0.0, 0.7071, -0.7071]
    """
    first, second = occupied_bins(basis, symbol, dimension)
    phase = relative_phase(basis, symbol, dimension)
    amps = np.zeros(dimension, dtype=complex)
    amps[first] = _INV_SQRT2
    # exact +-1 / +-i factors; cmath.rect leaves 1e-17 residues
    amps[second] = _INV_SQRT2 * _unit_phase(phase)
    return amps


def _unit_phase(phase: float) -> complex:
    quarter = phase / (math.pi / 2)
    if abs(quarter - round(quarter)) < 1e-15:
        return (1, 1j, -1, -1j)[int(round(quarter)) % 4]
    return cmath.exp(1j * phase)


def basis_states(basis: Basis, dimension: int = 4) -> list[np.ndarray]:
    return [encode(basis, s, dimension) for s in range(dimension)]


def overlap(a, b) -> complex:
    """Inner product <a|b>, conjugate-linear in ``a``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"state shapes differ: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def gram(states_a, states_b) -> np.ndarray:
    return np.array([[overlap(a, b) for b in states_b] for a in states_a])


def verify_mub(dimension: int = 4, states: dict | None = None) -> tuple[bool, np.ndarray]:
    """Check the two bases are orthonormal and mutually unbiased.

    Returns the verdict and the table of cross-basis squared overlaps
    ``|<z_n|x_m>|^2``.  ``states`` may supply perturbed vectors keyed by
    basis (used to probe the check itself).
    """
    check_dimension(dimension)
    if states is None:
        states = {b: basis_states(b, dimension) for b in Basis}
    z, x = states[Basis.Z], states[Basis.X]
    eye = np.eye(dimension)
    cross = np.abs(gram(z, x)) ** 2
    ok = (
        np.allclose(gram(z, z), eye, rtol=0, atol=EXACT_TOL)
        and np.allclose(gram(x, x), eye, rtol=0, atol=EXACT_TOL)
        and np.allclose(cross, 1.0 / dimension, rtol=0, atol=EXACT_TOL)
    )
    return bool(ok), cross
