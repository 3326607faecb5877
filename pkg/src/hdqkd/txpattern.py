"""Drive-pattern compiler for the injection-locked master/slave transmitter.

Per 3.2 ns frame the master laser is on for 3 ns (a fresh phase every
frame), the slave is gain-switched for 400 ps in the two bins of the state,
and a 200 ps bump on the master drive, centred between the two slave pulses,
flips the relative phase to pi.  The decoy intensity is carried on a
separate intensity-modulator channel, one level per frame.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .states import Basis, occupied_bins

MAGIC = b"HDTX"
VERSION = 1
_HEADER = struct.Struct("<4sHQQ")
INTENSITY_TAGS = ("signal", "decoy")
DEFAULT_SAMPLE_RATE = 80e9
MIN_SAMPLE_RATE = 10e9


class DecodeError(ValueError):
    def __init__(self, frame: int, reason: str):
        super().__init__(f"frame {frame}: {reason}")
        self.frame = frame
        self.reason = reason


@dataclass(frozen=True)
class LaserTimingParams:
    bin_pitch: float = 800e-12
    master_on_time: float = 3e-9
    master_on_start: float = 100e-12
    slave_on_time: float = 400e-12
    perturbation_width: float = 200e-12
    master_clock: float = 312.5e6

    def __post_init__(self):
        if not self.bin_pitch > 0:
            raise ValueError("bin_pitch must be positive")
        if not self.master_on_time < self.state_period:
            raise ValueError("master on-time must be shorter than the state period")
        if self.state_period - self.master_on_time < 200e-12 - 1e-15:
            raise ValueError("master needs >= 200 ps off per frame to randomize its phase")
        if not 0 <= self.master_on_start <= self.state_period - self.master_on_time:
            raise ValueError("master on-window must fit inside the frame")
        if not self.slave_on_time < self.bin_pitch:
            raise ValueError("slave on-time must be shorter than a bin")
        if not self.perturbation_width < self.bin_pitch:
            raise ValueError("perturbation must be shorter than a bin")
        if abs(self.master_clock * self.state_period - 1) > 1e-9:
            raise ValueError("master clock must equal one period per frame")

    @property
    def state_period(self) -> float:
        return 4 * self.bin_pitch

    def bin_center(self, index: int) -> float:
        return (index + 0.5) * self.bin_pitch


@dataclass(frozen=True)
class PerturbationSpec:
    amplitude_pi: float = 0.25
    im_decoy_level: float = 0.5

    def __post_init__(self):
        if not self.amplitude_pi > 0:
            raise ValueError("amplitude_pi must be > 0")
        if not 0 < self.im_decoy_level < 1:
            raise ValueError("im_decoy_level must be in (0, 1)")


@dataclass
class DriveTimeline:
    sample_rate: float
    master_samples: np.ndarray
    slave_samples: np.ndarray
    im_samples: np.ndarray

    def __post_init__(self):
        n = len(self.master_samples)
        if len(self.slave_samples) != n or len(self.im_samples) != n:
            raise ValueError("master, slave and IM channels must have equal length")

    def __len__(self) -> int:
        return len(self.master_samples)

    def frame_count(self, timing: LaserTimingParams) -> int:
        return len(self) // samples_per(timing.state_period, self.sample_rate)


def samples_per(duration: float, sample_rate: float) -> int:
    n = duration * sample_rate
    if abs(n - round(n)) > 1e-6:
        raise ValueError(f"{duration:g} s is not a whole number of samples at {sample_rate:g} Sa/s")
    return int(round(n))


def _check_rate(timing: LaserTimingParams, sample_rate: float) -> int:
    if sample_rate < MIN_SAMPLE_RATE:
        raise ValueError(f"sample rate {sample_rate:g} below {MIN_SAMPLE_RATE:g} Sa/s")
    for t in (timing.bin_pitch / 2, timing.slave_on_time / 2, timing.perturbation_width / 2,
              timing.master_on_start, timing.master_on_time):
        samples_per(t, sample_rate)
    return samples_per(timing.state_period, sample_rate)


def perturbation_center(basis: Basis, symbol: int, timing: LaserTimingParams) -> float | None:
    """Midpoint of the two slave pulses for pi-phase states, else ``None``."""
    if symbol % 2 == 0:
        return None
    a, b = occupied_bins(basis, symbol, 4)
    return (timing.bin_center(a) + timing.bin_center(b)) / 2


def _window(buf: np.ndarray, center: float, width: float, rate: float, value: float) -> None:
    lo = samples_per(center - width / 2, rate)
    hi = samples_per(center + width / 2, rate)
    buf[lo:hi] += value


@lru_cache(maxsize=256)
def _frame(basis: Basis, symbol: int, tag: str, timing: LaserTimingParams, rate: float,
           pert: PerturbationSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    spf = _check_rate(timing, rate)
    master = np.zeros(spf)
    slave = np.zeros(spf)
    start = samples_per(timing.master_on_start, rate)
    master[start:start + samples_per(timing.master_on_time, rate)] = 1.0
    for b in occupied_bins(basis, symbol, 4):
        _window(slave, timing.bin_center(b), timing.slave_on_time, rate, 1.0)
    center = perturbation_center(basis, symbol, timing)
    if center is not None:
        _window(master, center, timing.perturbation_width, rate, pert.amplitude_pi)
    im = np.full(spf, 1.0 if tag == "signal" else pert.im_decoy_level)
    for arr in (master, slave, im):
        arr.setflags(write=False)
    return master, slave, im


def compile_state(basis: Basis, symbol: int, intensity_tag: str = "signal",
                  timing: LaserTimingParams = LaserTimingParams(),
                  sample_rate: float = DEFAULT_SAMPLE_RATE,
                  perturbation: PerturbationSpec = PerturbationSpec()) -> DriveTimeline:
    basis = Basis(basis)
    if intensity_tag not in INTENSITY_TAGS:
        raise ValueError(f"intensity tag must be one of {INTENSITY_TAGS}")
    occupied_bins(basis, symbol, 4)
    master, slave, im = _frame(basis, int(symbol), intensity_tag, timing, float(sample_rate), perturbation)
    return DriveTimeline(sample_rate, master.copy(), slave.copy(), im.copy())


def compile_sequence(items, timing: LaserTimingParams = LaserTimingParams(),
                     sample_rate: float = DEFAULT_SAMPLE_RATE,
                     perturbation: PerturbationSpec = PerturbationSpec()) -> DriveTimeline:
    """Concatenate per-frame timelines; frame ``i`` starts at ``i * state_period``."""
    items = list(items)
    if not items:
        raise ValueError("sequence is empty")
    frames = []
    for basis, symbol, tag in items:
        basis = Basis(basis)
        if tag not in INTENSITY_TAGS:
            raise ValueError(f"intensity tag must be one of {INTENSITY_TAGS}")
        occupied_bins(basis, symbol, 4)
        frames.append(_frame(basis, int(symbol), tag, timing, float(sample_rate), perturbation))
    return DriveTimeline(
        sample_rate,
        np.concatenate([f[0] for f in frames]),
        np.concatenate([f[1] for f in frames]),
        np.concatenate([f[2] for f in frames]),
    )


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Half-open index ranges where ``mask`` is true."""
    edges = np.diff(np.concatenate(([0], mask.astype(np.int8), [0])))
    return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)))


def decode_timeline(t: DriveTimeline, timing: LaserTimingParams = LaserTimingParams(),
                    sample_rate: float | None = None,
                    perturbation: PerturbationSpec = PerturbationSpec()) -> list[tuple[Basis, int, str]]:
    """Recover ``(basis, symbol, intensity_tag)`` per frame.

    Raises :class:`DecodeError` naming the first malformed frame.
    """
    rate = t.sample_rate if sample_rate is None else sample_rate
    spf = _check_rate(timing, rate)
    if len(t) % spf:
        raise DecodeError(len(t) // spf, "timeline does not end on a frame boundary")
    tol = timing.perturbation_width / 2
    im_cut = (1.0 + perturbation.im_decoy_level) / 2
    out = []
    for f in range(len(t) // spf):
        sl = slice(f * spf, (f + 1) * spf)
        master = np.asarray(t.master_samples[sl], dtype=float)
        slave = np.asarray(t.slave_samples[sl], dtype=float)
        im = np.asarray(t.im_samples[sl], dtype=float)

        if len(_runs(master > 0.5)) != 1:
            raise DecodeError(f, "expected exactly one master on-window")
        pulses = _runs(slave > 0.5)
        if len(pulses) != 2:
            raise DecodeError(f, f"expected 2 slave pulses, found {len(pulses)}")
        bins = []
        for lo, hi in pulses:
            center = (lo + hi) / 2 / rate
            pos = center / timing.bin_pitch - 0.5
            if abs(pos - round(pos)) * timing.bin_pitch > tol:
                raise DecodeError(f, f"slave pulse at {center:.3e} s is off the bin grid")
            bins.append(int(round(pos)))
        a, b = bins
        if (a, b) in ((0, 1), (2, 3)):
            basis, first = Basis.Z, a // 2
        elif b - a == 2:
            basis, first = Basis.X, a
        else:
            raise DecodeError(f, f"bins t{a + 1}/t{b + 1} form no protocol state")

        bumps = _runs(master > 1.0 + perturbation.amplitude_pi / 2)
        if len(bumps) > 1:
            raise DecodeError(f, "more than one phase perturbation")
        phase = 0
        if bumps:
            lo, hi = bumps[0]
            center = (lo + hi) / 2 / rate
            expected = (timing.bin_center(a) + timing.bin_center(b)) / 2
            if abs(center - expected) > tol + 1e-15:
                raise DecodeError(f, f"perturbation {abs(center - expected):.3e} s off the pulse midpoint")
            phase = 1
        tag = "signal" if float(np.mean(im)) > im_cut else "decoy"
        out.append((basis, 2 * first + phase, tag))
    return out


# -- file formats ------------------------------------------------------------

def write_binary(t: DriveTimeline, path, timing: LaserTimingParams = LaserTimingParams()) -> None:
    """Little-endian ``HDTX`` header, then master, slave and IM channels as float32."""
    rate = int(round(t.sample_rate))
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, rate, t.frame_count(timing)))
        for arr in (t.master_samples, t.slave_samples, t.im_samples):
            fh.write(np.asarray(arr, dtype="<f4").tobytes())


def read_binary(path, timing: LaserTimingParams = LaserTimingParams()) -> DriveTimeline:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError("file too short for HDTX header")
    magic, version, rate, frames = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"unsupported HDTX version {version}")
    n = frames * samples_per(timing.state_period, rate)
    body = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    if body.size != 3 * n:
        raise ValueError(f"expected {3 * n} samples, found {body.size}")
    master, slave, im = (body[i * n:(i + 1) * n].astype(np.float64) for i in range(3))
    return DriveTimeline(float(rate), master, slave, im)


def sequence_to_json(items) -> str:
    frames = [{"basis": Basis(b).value, "symbol": int(s), "intensity": tag} for b, s, tag in items]
    return json.dumps({"frames": frames}, indent=2) + "\n"


def sequence_from_json(text: str) -> list[tuple[Basis, int, str]]:
    """Parse ``{"frames": [{"basis", "symbol", "intensity"}, ...]}``."""
    data = json.loads(text)
    if not isinstance(data, dict) or not isinstance(data.get("frames"), list):
        raise ValueError('sequence file needs a "frames" list')
    items = []
    for i, fr in enumerate(data["frames"]):
        try:
            basis = Basis(fr["basis"])
            symbol = fr["symbol"]
            tag = fr.get("intensity", "signal")
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"frame {i}: {exc}") from None
        if not isinstance(symbol, int) or isinstance(symbol, bool) or not 0 <= symbol < 4:
            raise ValueError(f"frame {i}: symbol must be an integer in 0..3")
        if tag not in INTENSITY_TAGS:
            raise ValueError(f"frame {i}: intensity must be one of {INTENSITY_TAGS}")
        items.append((basis, symbol, tag))
    return items


def demo_sequence() -> list[tuple[Basis, int, str]]:
    """All eight states, alternating signal and decoy."""
    return [(b, s, INTENSITY_TAGS[(2 * bi + s) % 2]) for bi, b in enumerate(Basis) for s in range(4)]
