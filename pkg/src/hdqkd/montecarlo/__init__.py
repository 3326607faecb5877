"""Pulse-level Monte Carlo of the full link.

The hot loop lives in a compiled kernel (``_ckernel``); when the extension
is unavailable, or ``HDQKD_PURE_PYTHON=1`` is set, the numpy kernel is used
instead.  Both produce identical counters for the same seed.
"""
from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..link import IntensitySettings, LinkParams, TallySet
from ..states import Basis, check_dimension
from . import _pykernel
from .rng import stream_key
from .tables import (
    CLICK_MATCHED, CONCLUSIVE_MATCHED, M_ERR, N_SIFT, PHOTON_BUCKET, SENT, build_tables,
)

try:
    if os.environ.get("HDQKD_PURE_PYTHON"):
        raise ImportError("pure-Python kernel requested")
    from ._ckernel import simulate_block as _compiled_block
except ImportError:
    _compiled_block = None

BACKEND = "cython" if _compiled_block is not None else "numpy"
_BLOCKS = {"numpy": _pykernel.simulate_block}
if _compiled_block is not None:
    _BLOCKS["cython"] = _compiled_block


def available_backends() -> list[str]:
    return sorted(_BLOCKS)


def simulate_block(key, start, count, tables, backend: str | None = None) -> np.ndarray:
    return _BLOCKS[backend or BACKEND](key, start, count, tables)


@dataclass(frozen=True)
class TrialConfig:
    seed: int
    states_to_send: int
    settings: IntensitySettings = field(default_factory=IntensitySettings)
    link: LinkParams = field(default_factory=LinkParams)
    dimension: int = 4
    bookkeeping: bool = False

    def __post_init__(self):
        if self.states_to_send <= 0:
            raise ValueError("states_to_send must be > 0")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        check_dimension(self.dimension)


@dataclass
class SimReport:
    tallies: TallySet
    qber: dict
    gains: dict
    conclusive_fraction: dict
    true_counts: dict | None
    wall_time_s: float
    states_per_s: float
    backend: str
    workers: int = 1

    def deterministic_part(self) -> dict:
        d = asdict(self)
        for key in ("wall_time_s", "states_per_s", "backend", "workers"):
            d.pop(key)
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(asdict(self), **kw)


def _report(counts: np.ndarray, config: TrialConfig, elapsed: float, backend: str,
            workers: int) -> SimReport:
    c = [int(x) for x in counts]
    vals = {"sent_mu": c[SENT], "sent_nu": c[SENT + 1]}
    for bi, b in enumerate("zx"):
        for ki, k in enumerate(("mu", "nu")):
            vals[f"n_{b}_{k}"] = c[N_SIFT + 2 * bi + ki]
            vals[f"m_{b}_{k}"] = c[M_ERR + 2 * bi + ki]
    tallies = TallySet(**vals)
    qber = {f"{b.value}_{k}": tallies.qber(b, k) for b in Basis for k in ("mu", "nu")}
    qber.update({b.value: tallies.qber(b) for b in Basis})
    gains = {}
    for k in ("mu", "nu"):
        sent = getattr(tallies, f"sent_{k}")
        sifted = tallies.n(Basis.Z, k) + tallies.n(Basis.X, k)
        gains[k] = sifted / (0.5 * sent) if sent else 0.0
    frac = {}
    for bi, b in enumerate(Basis):
        clicked = c[CLICK_MATCHED + bi]
        frac[b.value] = c[CONCLUSIVE_MATCHED + bi] / clicked if clicked else 0.0
    true_counts = None
    if config.bookkeeping:
        true_counts = {}
        for bi, b in enumerate(Basis):
            for ki, k in enumerate(("mu", "nu")):
                base = PHOTON_BUCKET + 6 * bi + 3 * ki
                true_counts[f"{b.value}_{k}"] = {
                    "vacuum": c[base], "single": c[base + 1], "multi": c[base + 2]}
            true_counts[f"{b.value}_single"] = sum(
                true_counts[f"{b.value}_{k}"]["single"] for k in ("mu", "nu"))
            true_counts[f"{b.value}_vacuum"] = sum(
                true_counts[f"{b.value}_{k}"]["vacuum"] for k in ("mu", "nu"))
    return SimReport(
        tallies=tallies, qber=qber, gains=gains, conclusive_fraction=frac,
        true_counts=true_counts, wall_time_s=elapsed,
        states_per_s=config.states_to_send / elapsed if elapsed > 0 else math.inf,
        backend=backend, workers=workers,
    )


def run(config: TrialConfig, backend: str | None = None) -> SimReport:
    backend = backend or BACKEND
    tables = build_tables(config.settings, config.link, config.dimension)
    t0 = time.perf_counter()
    counts = simulate_block(stream_key(config.seed), 0, config.states_to_send, tables, backend)
    return _report(counts, config, time.perf_counter() - t0, backend, 1)


def _partition(total: int, workers: int) -> list[tuple[int, int]]:
    base, extra = divmod(total, workers)
    spans, start = [], 0
    for w in range(workers):
        n = base + (1 if w < extra else 0)
        if n:
            spans.append((start, n))
        start += n
    return spans


def _worker(args):
    key, start, count, tables, backend = args
    return simulate_block(key, start, count, tables, backend)


def run_partitioned(config: TrialConfig, workers: int = 1, backend: str | None = None) -> SimReport:
    """Split frames into contiguous spans simulated in separate processes.

    Counters are summed, so the report equals :func:`run` for any ``workers``.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1:
        return run(config, backend)
    backend = backend or BACKEND
    tables = build_tables(config.settings, config.link, config.dimension)
    key = stream_key(config.seed)
    jobs = [(key, s, n, tables, backend) for s, n in _partition(config.states_to_send, workers)]
    t0 = time.perf_counter()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_worker, jobs))
    counts = np.sum(parts, axis=0)
    return _report(counts, config, time.perf_counter() - t0, backend, workers)


def write_event_log(config: TrialConfig, path, limit: int | None = None) -> int:
    """Write one JSON line per frame with a conclusive click; returns lines written.

    Uses the numpy kernel's per-frame arrays, which match the compiled
    kernel's counters exactly.
    """
    tables = build_tables(config.settings, config.link, config.dimension)
    key = stream_key(config.seed)
    d = config.dimension
    total = config.states_to_send if limit is None else min(limit, config.states_to_send)
    names = [b.value for b in Basis]
    written = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for start in range(0, total, _pykernel.CHUNK):
            n = min(_pykernel.CHUNK, total - start)
            fr = _pykernel.frame_arrays(key, start, n, tables)
            for i in np.flatnonzero(fr["bob_slot"] >= 0):
                slot = int(fr["bob_slot"][i])
                o = tables.slots[slot]
                fh.write(json.dumps({
                    "frame_index": start + int(i),
                    "basis_a": names[fr["basis"][i]],
                    "symbol_a": int(fr["symbol"][i]),
                    "intensity": ("mu", "nu")[fr["intensity"][i]],
                    "basis_b": names[slot // d],
                    "outcome": {"detector": o.detector, "bin": o.bin, "symbol": slot % d},
                }) + "\n")
                written += 1
    return written
