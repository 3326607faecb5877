# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernel.  Same draws and arithmetic as ``_pykernel``."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, uint32_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL

# keep in sync with tables.py
DEF DRAW_INTENSITY = 0
DEF DRAW_BASIS = 1
DEF DRAW_SYMBOL = 2
DEF DRAW_PHOTONS = 3
DEF DRAW_CHOICE = 4
DEF DRAW_DARK = 5
DEF DRAW_PHOTON0 = 16
DEF SENT = 0
DEF N_SIFT = 2
DEF M_ERR = 6
DEF PHOTON_BUCKET = 10
DEF CLICK_MATCHED = 22
DEF CONCLUSIVE_MATCHED = 24
DEF N_COUNTERS = 26


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double unif(uint64_t fkey, int draw) noexcept nogil:
    cdef uint64_t z = mix64(fkey + <uint64_t>(draw + 1) * GOLDEN)
    return <double>(z >> 11) * 1.1102230246251565e-16


def simulate_block(uint64_t key, int64_t start, int64_t count, tables):
    cdef int d = tables.dimension
    cdef int n_conc = tables.n_conclusive
    cdef double p_mu = tables.p_mu
    cdef double p_z = tables.p_z
    cdef double p_dark = tables.p_dark
    cdef double[:, ::1] pcdf = np.ascontiguousarray(tables.poisson_cdf, dtype=np.float64)
    cdef double[:, :, ::1] cum = np.ascontiguousarray(tables.photon_cum, dtype=np.float64)
    cdef uint32_t[::1] arm_mask = np.ascontiguousarray(tables.arm_mask, dtype=np.uint32)
    cdef int n_slots = cum.shape[2]
    cdef int K = pcdf.shape[1]
    cdef uint64_t conc_bits = (1ULL << n_conc) - 1

    out = np.zeros(N_COUNTERS, dtype=np.int64)
    cdef int64_t[::1] counts = out
    cdef int64_t f
    cdef uint64_t fk, mask, conc, arm
    cdef int k, b, s, n, p, o, n_clicked, choice, seen, slot, bob_basis
    cdef double u

    with nogil:
        for f in range(start, start + count):
            fk = mix64(key ^ <uint64_t>f)
            k = 0 if unif(fk, DRAW_INTENSITY) < p_mu else 1
            b = 0 if unif(fk, DRAW_BASIS) < p_z else 1
            s = <int>(unif(fk, DRAW_SYMBOL) * d)
            u = unif(fk, DRAW_PHOTONS)
            n = 0
            while n < K and u >= pcdf[k, n]:
                n += 1

            mask = 0
            for p in range(n):
                u = unif(fk, DRAW_PHOTON0 + p)
                o = 0
                while o < n_slots and u >= cum[b, s, o]:
                    o += 1
                if o < n_slots:
                    mask |= 1ULL << o
            for o in range(n_conc):
                if unif(fk, DRAW_DARK + o) < p_dark:
                    mask |= 1ULL << o

            conc = mask & conc_bits
            n_clicked = 0
            for o in range(n_conc):
                n_clicked += <int>((conc >> o) & 1ULL)
            choice = <int>(unif(fk, DRAW_CHOICE) * n_clicked)

            counts[SENT + k] += 1
            arm = arm_mask[b]
            if mask & arm:
                counts[CLICK_MATCHED + b] += 1
            if conc & arm:
                counts[CONCLUSIVE_MATCHED + b] += 1
            if n_clicked == 0:
                continue
            slot = -1
            seen = 0
            for o in range(n_conc):
                if (conc >> o) & 1ULL:
                    if seen == choice:
                        slot = o
                        break
                    seen += 1
            bob_basis = slot // d
            if bob_basis != b:
                continue
            counts[N_SIFT + 2 * b + k] += 1
            if slot % d != s:
                counts[M_ERR + 2 * b + k] += 1
            counts[PHOTON_BUCKET + 6 * b + 3 * k + (n if n < 2 else 2)] += 1
    return out
