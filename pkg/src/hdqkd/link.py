"""Analytic weak-coherent-pulse link: fiber loss, receiver loss, detectors.

Turns protocol and hardware parameters into expected sifted counts and error
counts per basis and intensity.  These expectations drive the key-rate
pipeline and serve as the reference the Monte Carlo simulator is checked
against.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

from .receiver import conclusive_bins
from .states import BIN_PITCH_S, Basis, check_dimension

P_BOB = 0.5  # passive 50:50 basis choice
POSTSELECTION_EFFICIENCY = 0.5
INTENSITIES = ("mu", "nu")


def frame_bins(dimension: int) -> int:
    return check_dimension(dimension)


def random_error(dimension: int) -> float:
    """Error probability of a uniformly random symbol."""
    return (check_dimension(dimension) - 1) / dimension


@dataclass(frozen=True)
class LinkParams:
    length_km: float = 0.0
    attenuation_db_per_km: float = 0.17
    rx_excess_loss_db: float = 3.0
    detector_efficiency: float = 0.75
    dark_rate_hz: float = 5.0
    bin_width_s: float = BIN_PITCH_S
    repetition_rate_hz: float | None = None
    misalignment: float = 0.025
    misalignment_x: float | None = None

    def __post_init__(self):
        if self.length_km < 0:
            raise ValueError("length_km must be >= 0")
        if self.attenuation_db_per_km < 0:
            raise ValueError("attenuation_db_per_km must be >= 0")
        if self.rx_excess_loss_db < 0:
            raise ValueError("rx_excess_loss_db must be >= 0")
        if not 0 < self.detector_efficiency <= 1:
            raise ValueError("detector_efficiency must be in (0, 1]")
        if self.dark_rate_hz < 0:
            raise ValueError("dark_rate_hz must be >= 0")
        if not self.bin_width_s > 0:
            raise ValueError("bin_width_s must be > 0")
        if self.repetition_rate_hz is not None and not self.repetition_rate_hz > 0:
            raise ValueError("repetition_rate_hz must be > 0")
        for name in ("misalignment", "misalignment_x"):
            m = getattr(self, name)
            if m is not None and not 0 <= m < 1:
                raise ValueError(f"{name} must be in [0, 1)")

    def rep_rate(self, dimension: int = 4) -> float:
        """Frame rate; defaults to one frame per ``d`` bins."""
        if self.repetition_rate_hz is not None:
            return self.repetition_rate_hz
        return 1.0 / (frame_bins(dimension) * self.bin_width_s)

    def check_timing(self, dimension: int = 4) -> None:
        if self.rep_rate(dimension) * frame_bins(dimension) * self.bin_width_s > 1 + 1e-9:
            raise ValueError(
                f"repetition rate {self.rep_rate(dimension):g} Hz leaves less than "
                f"{frame_bins(dimension)} bins of {self.bin_width_s:g} s per frame"
            )

    def misalignment_for(self, basis: Basis) -> float:
        if Basis(basis) is Basis.X and self.misalignment_x is not None:
            return self.misalignment_x
        return self.misalignment

    def with_length(self, length_km: float) -> "LinkParams":
        return replace(self, length_km=length_km)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class IntensitySettings:
    mu: float = 0.5
    nu: float = 0.18
    p_mu: float = 0.78
    p_x_alice: float = 0.1

    def __post_init__(self):
        if not 0 < self.nu < self.mu:
            raise ValueError(f"intensities must satisfy 0 < nu < mu (got mu={self.mu}, nu={self.nu})")
        if not 0 <= self.p_mu <= 1:
            raise ValueError("p_mu must be in [0, 1]")
        if not 0 <= self.p_x_alice <= 1:
            raise ValueError("p_x_alice must be in [0, 1]")

    @property
    def p_nu(self) -> float:
        return 1.0 - self.p_mu

    @property
    def p_z_alice(self) -> float:
        return 1.0 - self.p_x_alice

    p_x_bob = P_BOB
    p_z_bob = P_BOB

    def intensity(self, tag: str) -> float:
        return {"mu": self.mu, "nu": self.nu}[tag]

    def p_intensity(self, tag: str) -> float:
        return {"mu": self.p_mu, "nu": self.p_nu}[tag]

    def p_alice(self, basis: Basis) -> float:
        return self.p_z_alice if Basis(basis) is Basis.Z else self.p_x_alice


@dataclass
class TallySet:
    """Sifted conclusive counts ``n_*`` and error counts ``m_*``.

    Analytic tallies are real-valued expectations; simulated ones are
    integers.  ``sent_*`` counts states emitted at each intensity.
    """

    n_z_mu: float = 0.0
    n_z_nu: float = 0.0
    n_x_mu: float = 0.0
    n_x_nu: float = 0.0
    m_z_mu: float = 0.0
    m_z_nu: float = 0.0
    m_x_mu: float = 0.0
    m_x_nu: float = 0.0
    sent_mu: float = 0.0
    sent_nu: float = 0.0

    def __post_init__(self):
        for b in "zx":
            for k in INTENSITIES:
                n, m = getattr(self, f"n_{b}_{k}"), getattr(self, f"m_{b}_{k}")
                if n < 0 or m < 0 or m > n * (1 + 1e-12) + 1e-12:
                    raise ValueError(f"inconsistent tally for {b}/{k}: n={n}, m={m}")

    def n(self, basis: Basis, k: str) -> float:
        return getattr(self, f"n_{Basis(basis).value.lower()}_{k}")

    def m(self, basis: Basis, k: str) -> float:
        return getattr(self, f"m_{Basis(basis).value.lower()}_{k}")

    def n_total(self, basis: Basis) -> float:
        return self.n(basis, "mu") + self.n(basis, "nu")

    def m_total(self, basis: Basis) -> float:
        return self.m(basis, "mu") + self.m(basis, "nu")

    def qber(self, basis: Basis, k: str | None = None) -> float:
        n = self.n_total(basis) if k is None else self.n(basis, k)
        m = self.m_total(basis) if k is None else self.m(basis, k)
        return m / n if n > 0 else 0.0

    @property
    def states_sent(self) -> float:
        return self.sent_mu + self.sent_nu

    def scaled(self, factor: float) -> "TallySet":
        return TallySet(**{f.name: getattr(self, f.name) * factor for f in fields(self)})

    def __add__(self, other: "TallySet") -> "TallySet":
        return TallySet(**{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)})

    def to_dict(self) -> dict:
        return asdict(self)


def transmittance(link: LinkParams) -> float:
    """Fiber transmittance ``10^(-alpha L / 10)``."""
    if link.length_km < 0:
        raise ValueError("length_km must be >= 0")
    return 10 ** (-link.attenuation_db_per_km * link.length_km / 10)


def total_efficiency(link: LinkParams) -> float:
    """Probability that one emitted photon yields a conclusive click somewhere in the receiver."""
    return (transmittance(link) * 10 ** (-link.rx_excess_loss_db / 10)
            * link.detector_efficiency * POSTSELECTION_EFFICIENCY)


def dark_prob_frame(link: LinkParams, dimension: int = 4) -> float:
    """Dark-click probability per frame over every conclusive slot of both arms."""
    slots = 2 * len(conclusive_bins(Basis.Z, dimension)) * 2
    return link.dark_rate_hz * link.bin_width_s * slots


def detection_prob(k: float, link: LinkParams, dimension: int = 4) -> float:
    """Gain ``Q_k``: probability a state of mean photon number ``k`` gives a conclusive click."""
    if k < 0:
        raise ValueError("intensity must be >= 0")
    pd = dark_prob_frame(link, dimension)
    return 1.0 - (1.0 - pd) * math.exp(-k * total_efficiency(link))


def error_prob(k: float, link: LinkParams, dimension: int = 4, basis: Basis = Basis.Z) -> float:
    """Symbol error rate ``E_k`` among sifted events of intensity ``k``."""
    q = detection_prob(k, link, dimension)
    if q == 0:
        return 0.0
    signal = -math.expm1(-k * total_efficiency(link))
    pd = dark_prob_frame(link, dimension)
    return (random_error(dimension) * pd + link.misalignment_for(basis) * signal) / q


def expected_tallies(settings: IntensitySettings, link: LinkParams, states_sent: float,
                     dimension: int = 4) -> TallySet:
    if not states_sent > 0:
        raise ValueError("states_sent must be > 0")
    values = {}
    for k in INTENSITIES:
        intensity = settings.intensity(k)
        q = detection_prob(intensity, link, dimension)
        values[f"sent_{k}"] = states_sent * settings.p_intensity(k)
        for b in Basis:
            n = values[f"sent_{k}"] * settings.p_alice(b) * P_BOB * q
            key = f"{b.value.lower()}_{k}"
            values[f"n_{key}"] = n
            values[f"m_{key}"] = n * error_prob(intensity, link, dimension, b)
    return TallySet(**values)


def calibrate_misalignment(target_qber: float, settings: IntensitySettings, link: LinkParams,
                           dimension: int = 4, basis: Basis = Basis.Z) -> float:
    """Misalignment that makes the basis QBER (both intensities pooled) hit ``target_qber``."""
    pd = dark_prob_frame(link, dimension)
    eta = total_efficiency(link)
    num_dark = den = signal = 0.0
    for k in INTENSITIES:
        w = settings.p_intensity(k)
        intensity = settings.intensity(k)
        den += w * detection_prob(intensity, link, dimension)
        num_dark += w * random_error(dimension) * pd
        signal += w * -math.expm1(-intensity * eta)
    m = (target_qber * den - num_dark) / signal
    if not 0 <= m < 1:
        raise ValueError(f"QBER {target_qber} unreachable with this link (needs misalignment {m:.4g})")
    return m
