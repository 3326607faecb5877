"""Analytic key-rate pipeline: link expectations -> decoy bounds -> key length."""
from __future__ import annotations

from .finite_key import (
    KeyResult, SecurityParams, decoy_bounds_closed_form, key_length, lambda_ec,
)
from .link import INTENSITIES, P_BOB, IntensitySettings, LinkParams, detection_prob, expected_tallies
from .states import Basis


def states_per_block(settings: IntensitySettings, link: LinkParams, sec: SecurityParams,
                     dimension: int = 4) -> float:
    """Number of emitted states making up one privacy-amplification block.

    With ``block_semantics="detections"`` the block closes after
    ``block_size_N`` sifted Z detections; with ``"pulses"`` after that many
    emitted states.
    """
    if sec.block_semantics == "pulses":
        return sec.block_size_N
    per_state = sum(settings.p_intensity(k) * settings.p_z_alice * P_BOB
                    * detection_prob(settings.intensity(k), link, dimension) for k in INTENSITIES)
    if per_state <= 0:
        return float("inf")
    return sec.block_size_N / per_state


def analyze(settings: IntensitySettings, link: LinkParams, sec: SecurityParams,
            dimension: int = 4) -> KeyResult:
    """Full analytic evaluation at one operating point, with diagnostics."""
    link.check_timing(dimension)
    states = states_per_block(settings, link, sec, dimension)
    rep = link.rep_rate(dimension)
    if states == float("inf"):
        return KeyResult(0, 0.0, {"reason": "no Z detections"})
    tallies = expected_tallies(settings, link, states, dimension)
    bounds = decoy_bounds_closed_form(tallies, settings, sec, dimension)
    qber_z = tallies.qber(Basis.Z)
    lam = lambda_ec(tallies.n_total(Basis.Z), qber_z, dimension, sec)
    result = key_length(bounds, lam, sec, dimension, acquisition_time_s=states / rep)
    result.diagnostics.update({
        "states_per_block": states,
        "acquisition_time_s": states / rep,
        "qber_z": qber_z,
        "qber_x": tallies.qber(Basis.X),
        "n_z": tallies.n_total(Basis.Z),
        "n_x": tallies.n_total(Basis.X),
        "repetition_rate_hz": rep,
    })
    return result
