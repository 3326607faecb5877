"""Linear-programming oracle for the decoy-state bounds.

Optimizes directly over photon-number yields subject to the Poissonian
mixing constraints at both intensities, using the same statistical
intervals as the closed form.  Its optima are the tightest bounds those
constraints allow, so a sound closed-form lower bound can never exceed the
LP minimum and a sound upper bound can never undercut the LP maximum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .finite_key import (
    SecurityParams, _check_intensities, scaled_counts, tau, vacuum_upper,
)
from .link import INTENSITIES, IntensitySettings, TallySet
from .states import Basis


class InconsistentTalliesError(RuntimeError):
    """No photon-number yields reproduce the tallies within their intervals."""


@dataclass(frozen=True)
class Interval:
    low: float
    high: float

    def contains(self, x: float, rtol: float = 1e-6, atol: float = 1e-6) -> bool:
        slack = rtol * max(abs(self.low), abs(self.high)) + atol
        return self.low - slack <= x <= self.high + slack


@dataclass(frozen=True)
class LPBounds:
    s_Z0: Interval
    s_Z1: Interval
    s_X1: Interval
    v_X1: Interval
    n_max: int


def _poisson_rows(settings: IntensitySettings, n_max: int) -> dict[str, np.ndarray]:
    ns = np.arange(n_max + 1)
    fact = np.array([math.factorial(int(n)) for n in ns], dtype=float)
    return {k: settings.intensity(k) ** ns / fact for k in INTENSITIES}


def _extremes(rows, intervals, index, caps, n_max):
    """Min and max of variable ``index`` with ``lo_k <= rows_k . x <= hi_k``, ``0 <= x <= caps``."""
    scale = max(max(abs(lo), abs(hi)) for lo, hi in intervals.values()) or 1.0
    a_ub, b_ub = [], []
    for k in INTENSITIES:
        lo, hi = intervals[k]
        a_ub.append(rows[k])
        b_ub.append(hi / scale)
        a_ub.append(-rows[k])
        b_ub.append(-lo / scale)
    bounds = [(0, None)] * (n_max + 1)
    for i, cap in caps.items():
        bounds[i] = (0, max(cap, 0.0) / scale)
    out = []
    for sign in (1.0, -1.0):
        c = np.zeros(n_max + 1)
        c[index] = sign
        res = linprog(c, A_ub=np.array(a_ub), b_ub=np.array(b_ub), bounds=bounds, method="highs")
        if res.status == 2:
            raise InconsistentTalliesError(
                f"no yields with n <= {n_max} reproduce the tallies")
        if res.status == 3:
            out.append(math.inf)
            continue
        if res.status != 0:
            raise InconsistentTalliesError(f"LP failed: {res.message}")
        out.append(sign * res.fun * scale)
    return Interval(out[0], out[1])


def decoy_bounds_lp(t: TallySet, settings: IntensitySettings, sec: SecurityParams,
                    dimension: int = 4, n_max: int = 20) -> LPBounds:
    """Certified intervals for vacuum/single-photon counts and single-photon X errors."""
    _check_intensities(settings)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    rows = _poisson_rows(settings, n_max)
    t0, t1 = tau(0, settings), tau(1, settings)
    found = {}
    for b in Basis:
        n = {k: t.n(b, k) for k in INTENSITIES}
        n_pm = scaled_counts(n, t.n_total(b), settings, sec.eps_term)
        # a photon-number class can never exceed everything observed
        total = t.n_total(b)
        caps = {0: min(vacuum_upper(t, b, settings, sec, dimension), total) / t0,
                1: total / t1}
        x1 = _extremes(rows, n_pm, 1, caps, n_max)
        found[b] = Interval(t1 * x1.low, t1 * x1.high)
        if b is Basis.Z:
            x0 = _extremes(rows, n_pm, 0, caps, n_max)
            found["Z0"] = Interval(t0 * x0.low, t0 * x0.high)
    m = {k: t.m(Basis.X, k) for k in INTENSITIES}
    m_pm = scaled_counts(m, t.m_total(Basis.X), settings, sec.eps_term)
    w1 = _extremes(rows, m_pm, 1, {1: t.m_total(Basis.X) / t1}, n_max)
    return LPBounds(
        s_Z0=found["Z0"], s_Z1=found[Basis.Z], s_X1=found[Basis.X],
        v_X1=Interval(t1 * w1.low, t1 * w1.high), n_max=n_max,
    )
