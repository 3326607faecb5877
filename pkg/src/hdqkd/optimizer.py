"""Derivative-free maximization of the analytic secret key rate.

A coarse grid over (mu, nu/mu, p_mu, p_x_alice) seeds a bounded Nelder-Mead
refinement.  Writing ``nu = r * mu`` with ``r`` in (0, 1) keeps every
evaluated point feasible.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from .finite_key import SecurityParams
from .link import IntensitySettings, LinkParams
from .pipeline import analyze

PARAMS = ("mu", "nu_ratio", "p_mu", "p_x_alice")
_EDGE = 1e-6


@dataclass(frozen=True)
class SearchSpace:
    mu: tuple[float, float] = (0.0, 1.0)
    nu_ratio: tuple[float, float] = (0.0, 1.0)
    p_mu: tuple[float, float] = (0.0, 1.0)
    p_x_alice: tuple[float, float] = (0.0, 1.0)
    grid_points: int = 8

    def __post_init__(self):
        for name in PARAMS:
            lo, hi = getattr(self, name)
            if not 0 <= lo < hi <= 1:
                raise ValueError(f"bounds for {name} must satisfy 0 <= lo < hi <= 1")
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")

    @property
    def min_budget(self) -> int:
        return self.grid_points ** len(PARAMS)

    def box(self) -> list[tuple[float, float]]:
        return [(lo + _EDGE, hi - _EDGE) if name != "mu" or hi < 1 else (lo + _EDGE, hi)
                for name, (lo, hi) in ((n, getattr(self, n)) for n in PARAMS)]

    def grid_axes(self) -> list[np.ndarray]:
        n = self.grid_points
        return [lo + (np.arange(n) + 0.5) / n * (hi - lo)
                for lo, hi in (getattr(self, p) for p in PARAMS)]


def to_settings(x) -> IntensitySettings:
    mu, r, p_mu, p_x = (float(v) for v in x)
    return IntensitySettings(mu=mu, nu=r * mu, p_mu=p_mu, p_x_alice=p_x)


def evaluate(params: IntensitySettings, link: LinkParams, sec: SecurityParams,
             dimension: int = 4) -> float:
    """Analytic SKR in bit/s at one parameter point."""
    return analyze(params, link, sec, dimension).skr_bps


@dataclass
class OptimResult:
    best_params: dict
    best_skr: float
    evaluations: int
    zero_rate: bool
    trace: list = field(default_factory=list)

    @property
    def settings(self) -> IntensitySettings:
        p = self.best_params
        return IntensitySettings(p["mu"], p["nu"], p["p_mu"], p["p_x_alice"])

    def to_json(self, **kw) -> str:
        d = asdict(self)
        d.pop("trace")
        return json.dumps(d, **kw)

    def write_trace_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", *PARAMS, "skr"])
            for i, x, skr in self.trace:
                w.writerow([i, *(repr(float(v)) for v in x), repr(skr)])


class _Tracker:
    def __init__(self, link, sec, dimension, box):
        self.link, self.sec, self.dimension, self.box = link, sec, dimension, box
        self.trace: list[tuple[int, tuple, float]] = []
        self.best_x: tuple | None = None
        self.best = -math.inf

    def __call__(self, x) -> float:
        x = tuple(float(min(max(v, lo), hi)) for v, (lo, hi) in zip(x, self.box))
        skr = evaluate(to_settings(x), self.link, self.sec, self.dimension)
        self.trace.append((len(self.trace), x, skr))
        if skr > self.best or (skr == self.best and x < self.best_x):
            self.best, self.best_x = skr, x
        return skr


def optimize(space: SearchSpace, link: LinkParams, sec: SecurityParams, budget: int | None = None,
             dimension: int = 4, max_simplex_iter: int = 200, rtol: float = 1e-4) -> OptimResult:
    """Grid scan then Nelder-Mead from the best grid point.

    ``budget`` caps the total number of SKR evaluations and must cover the
    full grid; whatever is left goes to the simplex.  A larger budget replays
    the same evaluations first, so the optimum never gets worse.
    """
    if budget is None:
        budget = space.min_budget + 2 * max_simplex_iter
    if budget < space.min_budget:
        raise ValueError(f"budget {budget} below grid size {space.min_budget}")
    box = space.box()
    track = _Tracker(link, sec, dimension, box)
    for x in itertools.product(*space.grid_axes()):
        track(x)
    remaining = budget - len(track.trace)
    if remaining > 0 and track.best > 0:
        start = np.array(track.best_x)
        minimize(lambda x: -track(x), start, method="Nelder-Mead", bounds=box,
                 options={"maxfev": remaining, "maxiter": max_simplex_iter,
                          "xatol": 1e-6, "fatol": max(rtol * track.best, 1e-12)})
    x = track.best_x
    s = to_settings(x)
    return OptimResult(
        best_params={"mu": s.mu, "nu": s.nu, "p_mu": s.p_mu, "p_x_alice": s.p_x_alice},
        best_skr=track.best,
        evaluations=len(track.trace),
        zero_rate=track.best <= 0,
        trace=track.trace,
    )
