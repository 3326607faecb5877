"""Pure-numpy simulation kernel; bit-identical to the compiled one."""
from __future__ import annotations

import numpy as np

from . import rng
from .tables import (
    CLICK_MATCHED, CONCLUSIVE_MATCHED, DRAW_BASIS, DRAW_CHOICE, DRAW_DARK, DRAW_INTENSITY,
    DRAW_PHOTON0, DRAW_PHOTONS, DRAW_SYMBOL, M_ERR, N_COUNTERS, N_SIFT, PHOTON_BUCKET, SENT,
)

CHUNK = 1 << 16


def frame_arrays(key: int, start: int, count: int, tables) -> dict[str, np.ndarray]:
    """Simulate frames ``start .. start+count-1`` and return per-frame results.

    ``bob_slot`` is the chosen conclusive slot, or -1 when nothing conclusive
    clicked.
    """
    d = tables.dimension
    n_conc = tables.n_conclusive
    frames = np.arange(start, start + count, dtype=np.uint64)
    fk = rng.frame_keys(key, frames)

    intensity = (rng.uniforms(fk, DRAW_INTENSITY) >= tables.p_mu).astype(np.int64)
    basis = (rng.uniforms(fk, DRAW_BASIS) >= tables.p_z).astype(np.int64)
    symbol = (rng.uniforms(fk, DRAW_SYMBOL) * d).astype(np.int64)
    u_n = rng.uniforms(fk, DRAW_PHOTONS)
    photons = np.empty(count, dtype=np.int64)
    for i in range(2):
        sel = intensity == i
        photons[sel] = np.searchsorted(tables.poisson_cdf[i], u_n[sel], side="right")

    mask = np.zeros(count, dtype=np.uint64)
    cum = tables.photon_cum[basis, symbol]  # (count, n_slots)
    for p in range(int(photons.max(initial=0))):
        active = photons > p
        u = rng.uniforms(fk[active], DRAW_PHOTON0 + p)
        slot = (u[:, None] >= cum[active]).sum(axis=1)
        hit = slot < tables.n_slots
        bits = np.zeros(active.sum(), dtype=np.uint64)
        bits[hit] = np.uint64(1) << slot[hit].astype(np.uint64)
        mask[active] |= bits
    for s in range(n_conc):
        dark = rng.uniforms(fk, DRAW_DARK + s) < tables.p_dark
        mask[dark] |= np.uint64(1 << s)

    conc = mask & np.uint64((1 << n_conc) - 1)
    n_clicked = np.zeros(count, dtype=np.int64)
    for s in range(n_conc):
        n_clicked += ((conc >> np.uint64(s)) & np.uint64(1)).astype(np.int64)
    choice = (rng.uniforms(fk, DRAW_CHOICE) * n_clicked).astype(np.int64)
    bob_slot = np.full(count, -1, dtype=np.int64)
    seen = np.zeros(count, dtype=np.int64)
    for s in range(n_conc):
        bit = ((conc >> np.uint64(s)) & np.uint64(1)).astype(bool)
        pick = bit & (seen == choice) & (bob_slot < 0)
        bob_slot[pick] = s
        seen += bit
    arm = tables.arm_mask.astype(np.uint64)[basis]
    return {
        "intensity": intensity, "basis": basis, "symbol": symbol, "photons": photons,
        "mask": mask, "bob_slot": bob_slot,
        "click_matched": (mask & arm) != 0,
        "conclusive_matched": (conc & arm) != 0,
    }


def accumulate(fr: dict[str, np.ndarray], d: int, counts: np.ndarray) -> None:
    intensity, basis, symbol = fr["intensity"], fr["basis"], fr["symbol"]
    bob_slot = fr["bob_slot"]
    for k in range(2):
        counts[SENT + k] += int(np.count_nonzero(intensity == k))
    sifted = (bob_slot >= 0) & (bob_slot // d == basis)
    err = sifted & (bob_slot % d != symbol)
    bucket = np.minimum(fr["photons"], 2)
    for b in range(2):
        for k in range(2):
            sel = sifted & (basis == b) & (intensity == k)
            counts[N_SIFT + 2 * b + k] += int(np.count_nonzero(sel))
            counts[M_ERR + 2 * b + k] += int(np.count_nonzero(err & (basis == b) & (intensity == k)))
            for c in range(3):
                counts[PHOTON_BUCKET + 6 * b + 3 * k + c] += int(np.count_nonzero(sel & (bucket == c)))
        counts[CLICK_MATCHED + b] += int(np.count_nonzero(fr["click_matched"] & (basis == b)))
        counts[CONCLUSIVE_MATCHED + b] += int(np.count_nonzero(fr["conclusive_matched"] & (basis == b)))


def simulate_block(key: int, start: int, count: int, tables) -> np.ndarray:
    counts = np.zeros(N_COUNTERS, dtype=np.int64)
    done = 0
    while done < count:
        n = min(CHUNK, count - done)
        accumulate(frame_arrays(key, start + done, n, tables), tables.dimension, counts)
        done += n
    return counts
