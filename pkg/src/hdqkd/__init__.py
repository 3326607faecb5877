"""Four-dimensional time-bin/phase BB84: states, transmitter patterns, receiver,
link model, one-decoy finite-key rates, Monte Carlo and parameter optimization."""

from .finite_key import DecoyBounds, KeyResult, SecurityParams
from .link import IntensitySettings, LinkParams, TallySet
from .pipeline import analyze
from .states import Basis, encode

__all__ = [
    "Basis", "DecoyBounds", "IntensitySettings", "KeyResult", "LinkParams",
    "SecurityParams", "TallySet", "analyze", "encode",
]
__version__ = "0.1.0"
