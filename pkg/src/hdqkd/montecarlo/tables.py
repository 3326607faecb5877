"""Lookup tables and counter layout shared by both simulation kernels.

Every per-photon outcome is a "slot": conclusive slots come first (Z arm in
symbol order, then X arm), inconclusive slots after.  A photon draws its slot
by inverse CDF over ``photon_cum``; a draw past the last entry means the
photon was lost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import receiver
from ..link import INTENSITIES, IntensitySettings, LinkParams, transmittance
from ..states import Basis, encode

# draw indices within a frame
DRAW_INTENSITY = 0
DRAW_BASIS = 1
DRAW_SYMBOL = 2
DRAW_PHOTONS = 3
DRAW_CHOICE = 4
DRAW_DARK = 5  # one per conclusive slot, at most 8
DRAW_PHOTON0 = 16

# counter layout
SENT = 0
N_SIFT = 2
M_ERR = 6
PHOTON_BUCKET = 10
CLICK_MATCHED = 22
CONCLUSIVE_MATCHED = 24
N_COUNTERS = 26

_POISSON_MAX = 512


def counter_index(kind: int, basis: int = 0, intensity: int = 0, bucket: int = 0) -> int:
    if kind == PHOTON_BUCKET:
        return PHOTON_BUCKET + 6 * basis + 3 * intensity + bucket
    if kind in (N_SIFT, M_ERR):
        return kind + 2 * basis + intensity
    if kind == SENT:
        return SENT + intensity
    return kind + basis


@dataclass(frozen=True)
class KernelTables:
    dimension: int
    n_conclusive: int
    p_mu: float
    p_z: float
    p_dark: float
    poisson_cdf: np.ndarray   # (2, K)
    photon_cum: np.ndarray    # (2, d, n_slots)
    arm_mask: np.ndarray      # (2,) uint32
    slots: tuple

    @property
    def n_slots(self) -> int:
        return self.photon_cum.shape[2]


def poisson_cdf(mean: float) -> list[float]:
    p = math.exp(-mean)
    cdf = [p]
    n = 0
    while cdf[-1] < 1.0 and n < _POISSON_MAX:
        n += 1
        p *= mean / n
        nxt = cdf[-1] + p
        if nxt == cdf[-1] and n > mean:
            break
        cdf.append(nxt)
    return cdf


def slot_order(dimension: int) -> list[receiver.ClickOutcome]:
    conclusive = [o for b in Basis for o in receiver.conclusive_outcomes(b, dimension)]
    rest = []
    for b in Basis:
        ifm = receiver.arm(b, dimension)
        for o in sorted(receiver.propagate(encode(b, 0, dimension), ifm)):
            if o not in conclusive:
                rest.append(o)
    return conclusive + rest


def build_tables(settings: IntensitySettings, link: LinkParams, dimension: int = 4) -> KernelTables:
    slots = slot_order(dimension)
    index = {o: i for i, o in enumerate(slots)}
    survive = (transmittance(link) * 10 ** (-link.rx_excess_loss_db / 10) * link.detector_efficiency)
    cum = np.zeros((2, dimension, len(slots)))
    for bi, b in enumerate(Basis):
        m = link.misalignment_for(b)
        for s in range(dimension):
            probs = np.zeros(len(slots))
            for s2 in range(dimension):
                w = (1 - m) if s2 == s else m / (dimension - 1)
                for arm_basis in Basis:
                    dist = receiver.propagate(encode(b, s2, dimension), receiver.arm(arm_basis, dimension))
                    for o, p in dist.items():
                        probs[index[o]] += w * 0.5 * survive * p
            cum[bi, s] = np.cumsum(probs)
    cdfs = [poisson_cdf(settings.intensity(k)) for k in INTENSITIES]
    width = max(len(c) for c in cdfs)
    table = np.ones((2, width))
    for i, c in enumerate(cdfs):
        table[i, : len(c)] = c
    arm_mask = np.zeros(2, dtype=np.uint32)
    for i, o in enumerate(slots):
        arm_mask[0 if o.arm is Basis.Z else 1] |= np.uint32(1 << i)
    return KernelTables(
        dimension=dimension,
        n_conclusive=2 * dimension,
        p_mu=settings.p_mu,
        p_z=settings.p_z_alice,
        p_dark=link.dark_rate_hz * link.bin_width_s,
        poisson_cdf=table,
        photon_cum=np.ascontiguousarray(cum),
        arm_mask=arm_mask,
        slots=tuple(slots),
    )
