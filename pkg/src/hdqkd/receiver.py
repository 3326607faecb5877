"""Passive-basis receiver: two unbalanced interferometers behind a 50:50 splitter.

The Z arm carries a one-bin delay and detectors D0/D1, the X arm a two-bin
delay (four dimensions) and detectors D2/D3.  A state entering an arm leaves
it spread over an extended frame of ``n_bins + delay`` bins; only the bins
where both pulses of a matched state overlap are conclusive.

The 50:50 splitter itself is not modelled here: :func:`propagate` takes a
normalized per-arm input and the factor 1/2 is charged by the link model.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .states import Basis, check_dimension

DETECTORS = {Basis.Z: ("D0", "D1"), Basis.X: ("D2", "D3")}


@dataclass(frozen=True)
class InterferometerSpec:
    """One unbalanced interferometer.

    ``bias_phase`` is the nominal phase set for the arm (pi/2 for the X arm of
    the two-dimensional protocol); ``phase_offset`` is drift on top of it.
    ``arm_transmission`` holds intensity transmissions of the short and long
    paths.
    """

    basis: Basis = Basis.Z
    delay: int = 1
    phase_offset: float = 0.0
    arm_transmission: tuple[float, float] = (1.0, 1.0)
    bias_phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "basis", Basis(self.basis))
        if self.delay not in (1, 2):
            raise ValueError(f"delay must be 1 or 2 bin pitches, got {self.delay}")
        if not math.isfinite(self.phase_offset):
            raise ValueError("phase_offset must be finite")
        for t in self.arm_transmission:
            if not 0 < t <= 1:
                raise ValueError(f"arm transmission {t} outside (0, 1]")

    @property
    def detectors(self) -> tuple[str, str]:
        return DETECTORS[self.basis]


@dataclass(frozen=True, order=True)
class ClickOutcome:
    detector: str
    bin: int

    @property
    def parity(self) -> int:
        return int(self.detector[1]) % 2

    @property
    def arm(self) -> Basis:
        return Basis.Z if self.detector in DETECTORS[Basis.Z] else Basis.X


def arm(basis: Basis, dimension: int = 4, phase_offset: float = 0.0) -> InterferometerSpec:
    """Default interferometer measuring ``basis`` for the given protocol dimension."""
    basis = Basis(basis)
    check_dimension(dimension)
    if dimension == 4:
        delay = 1 if basis is Basis.Z else 2
        return InterferometerSpec(basis, delay, phase_offset)
    bias = 0.0 if basis is Basis.Z else math.pi / 2
    return InterferometerSpec(basis, 1, phase_offset, bias_phase=bias)


def propagate(state, ifm: InterferometerSpec) -> dict[ClickOutcome, float]:
    """Click probabilities over the extended output frame of one arm."""
    field = np.asarray(state, dtype=complex)
    n_out = field.size + ifm.delay
    short = np.zeros(n_out, dtype=complex)
    long_ = np.zeros(n_out, dtype=complex)
    short[: field.size] = math.sqrt(ifm.arm_transmission[0]) * field
    long_[ifm.delay :] = math.sqrt(ifm.arm_transmission[1]) * field
    rot = cmath.exp(1j * (ifm.bias_phase + ifm.phase_offset))
    out = {}
    for parity, det in enumerate(ifm.detectors):
        amp = (short + (-1) ** parity * rot * long_) / 2
        for t, p in enumerate(np.abs(amp) ** 2):
            out[ClickOutcome(det, t)] = float(p)
    return out


def conclusive_bins(basis: Basis, dimension: int = 4) -> frozenset[int]:
    """Zero-based output bins kept by post-selection (t2,t4 for Z; t3,t4 for X)."""
    basis = Basis(basis)
    check_dimension(dimension)
    if dimension == 2:
        return frozenset({1})
    return frozenset({1, 3}) if basis is Basis.Z else frozenset({2, 3})


def conclusive_outcomes(basis: Basis, dimension: int = 4) -> list[ClickOutcome]:
    """Conclusive outcomes of one arm ordered by the symbol they decode to."""
    basis = Basis(basis)
    bins = sorted(conclusive_bins(basis, dimension))
    return [ClickOutcome(det, b) for b in bins for det in DETECTORS[basis]]


def outcome_to_symbol(basis: Basis, outcome: ClickOutcome, dimension: int = 4) -> int | None:
    """Decode a click; ``None`` marks an inconclusive (post-selected) bin."""
    basis = Basis(basis)
    if outcome.detector not in DETECTORS[basis]:
        raise ValueError(f"detector {outcome.detector} does not belong to the {basis.value} arm")
    bins = sorted(conclusive_bins(basis, dimension))
    if outcome.bin not in bins:
        return None
    return 2 * bins.index(outcome.bin) + outcome.parity


def measure(state, basis: Basis, ifm: InterferometerSpec | None = None,
            dimension: int | None = None) -> dict[int | None, float]:
    """Distribution of decoded symbols (``None`` = inconclusive) in one arm."""
    basis = Basis(basis)
    if dimension is None:
        dimension = len(state)
    if ifm is None:
        ifm = arm(basis, dimension)
    dist: dict[int | None, float] = {s: 0.0 for s in range(dimension)}
    dist[None] = 0.0
    for outcome, p in propagate(state, ifm).items():
        dist[outcome_to_symbol(basis, outcome, dimension)] += p
    return dist


def sift(alice_basis: Basis, bob_basis: Basis, outcome: ClickOutcome | None,
         dimension: int = 4) -> int | None:
    """Return the kept symbol, or ``None`` when the event is discarded."""
    if outcome is None or Basis(alice_basis) is not Basis(bob_basis):
        return None
    if outcome.arm is not Basis(bob_basis):
        return None
    return outcome_to_symbol(bob_basis, outcome, dimension)
