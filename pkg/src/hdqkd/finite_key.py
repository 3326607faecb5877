"""One-decoy finite-key analysis for the four- and two-dimensional protocols.

Statistical fluctuations use Hoeffding's inequality, the phase error uses a
Serfling-type random-sampling correction, and the key length follows the
composable bound with ``6 log2(19/eps_sec) + log2(2/eps_cor)`` overhead.
The security parameter is split evenly over the 19 failure events counted in
that overhead, so every fluctuation term is evaluated at ``eps_sec / 19``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .link import INTENSITIES, IntensitySettings, TallySet, random_error
from .states import Basis, check_dimension

N_EPS_TERMS = 19
BLOCK_SEMANTICS = ("pulses", "detections")


class IllConditionedError(ValueError):
    """Signal and decoy intensities too close to separate photon-number yields."""


@dataclass(frozen=True)
class SecurityParams:
    eps_sec: float = 1e-9
    eps_cor: float = 1e-10
    block_size_N: float = 1e11
    f_ec: float = 1.16
    block_semantics: str = "pulses"

    def __post_init__(self):
        for name in ("eps_sec", "eps_cor"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must be in (0, 1)")
        if not self.block_size_N > 0:
            raise ValueError("block_size_N must be > 0")
        if self.f_ec < 1:
            raise ValueError("f_ec must be >= 1")
        if self.block_semantics not in BLOCK_SEMANTICS:
            raise ValueError(f"block_semantics must be one of {BLOCK_SEMANTICS}")

    @property
    def eps_term(self) -> float:
        return self.eps_sec / N_EPS_TERMS

    def overhead_bits(self) -> float:
        return 6 * math.log2(N_EPS_TERMS / self.eps_sec) + math.log2(2 / self.eps_cor)


@dataclass
class DecoyBounds:
    D0_Z_low: float = 0.0
    D1_Z_low: float = 0.0
    s_X1_low: float = 0.0
    v_X1_up: float = 0.0
    phi_Z_up: float = 0.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("D0_Z_low", "D1_Z_low", "s_X1_low", "v_X1_up", "phi_Z_up"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class KeyResult:
    ell_bits: int
    skr_bps: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


# -- entropies ---------------------------------------------------------------

def _xlog2(x: float) -> float:
    return x * math.log2(x) if x > 0 else 0.0


def entropy_4d(x: float) -> float:
    """``-x log2(x/3) - (1-x) log2(1-x)`` on ``[0, 3/4]``."""
    if not 0 <= x <= 0.75 + 1e-15:
        raise ValueError(f"entropy_4d argument {x} outside [0, 3/4]")
    x = min(x, 0.75)
    return -_xlog2(x) + x * math.log2(3) - _xlog2(1 - x)


def entropy_2d(x: float) -> float:
    """Binary entropy on ``[0, 1/2]``."""
    if not 0 <= x <= 0.5 + 1e-15:
        raise ValueError(f"entropy_2d argument {x} outside [0, 1/2]")
    x = min(x, 0.5)
    return -_xlog2(x) - _xlog2(1 - x)


def entropy(x: float, dimension: int) -> float:
    return entropy_4d(x) if check_dimension(dimension) == 4 else entropy_2d(x)


def asymptotic_threshold(dimension: int, tol: float = 1e-9) -> float:
    """Error rate where the one-way asymptotic rate ``log2 d - 2 H_d(e)`` vanishes."""
    bits = math.log2(check_dimension(dimension))
    lo, hi = 0.0, random_error(dimension)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bits - 2 * entropy(mid, dimension) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- statistics --------------------------------------------------------------

def fluctuation_bound(n: float, eps: float) -> float:
    """Hoeffding deviation ``sqrt(n/2 ln(1/eps))``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if not 0 < eps < 1:
        raise ValueError("eps must be in (0, 1)")
    return math.sqrt(n / 2 * math.log(1 / eps))


def tau(n: int, settings: IntensitySettings) -> float:
    """Probability that Alice emits an ``n``-photon state."""
    return sum(settings.p_intensity(k) * math.exp(-settings.intensity(k))
               * settings.intensity(k) ** n / math.factorial(n) for k in INTENSITIES)


def scaled_counts(counts: dict[str, float], total: float, settings: IntensitySettings,
                  eps: float) -> dict[str, tuple[float, float]]:
    """``e^k/p_k (c_k -/+ delta)``, the per-intensity intervals used by every bound."""
    delta = fluctuation_bound(total, eps)
    out = {}
    for k in INTENSITIES:
        p = settings.p_intensity(k)
        if p <= 0:
            raise IllConditionedError(f"emission probability of {k} is zero")
        w = math.exp(settings.intensity(k)) / p
        out[k] = (w * (counts[k] - delta), w * (counts[k] + delta))
    return out


def _check_intensities(settings: IntensitySettings) -> None:
    if (settings.mu - settings.nu) / settings.mu < 1e-6:
        raise IllConditionedError(f"mu={settings.mu} and nu={settings.nu} are too close")


def vacuum_upper(t: TallySet, basis: Basis, settings: IntensitySettings,
                 sec: SecurityParams, dimension: int) -> float:
    """Vacuum events are bounded through the decoy errors: each errs with probability ``(d-1)/d``."""
    m = {k: t.m(basis, k) for k in INTENSITIES}
    m_pm = scaled_counts(m, t.m_total(basis), settings, sec.eps_term)
    return tau(0, settings) * m_pm["nu"][1] / random_error(dimension)


def _vacuum_lower(n_pm, settings, t0):
    mu, nu = settings.mu, settings.nu
    return t0 / (mu - nu) * (mu * n_pm["nu"][0] - nu * n_pm["mu"][1])


def _single_lower(n_pm, s0_up, settings, t0, t1):
    mu, nu = settings.mu, settings.nu
    bracket = (n_pm["nu"][0] - nu ** 2 / mu ** 2 * n_pm["mu"][1]
               - (mu ** 2 - nu ** 2) / mu ** 2 * s0_up / t0)
    return t1 * mu / (nu * (mu - nu)) * bracket


def serfling_gamma(eps: float, ratio: float, n_test: float, n_key: float) -> float:
    """Random-sampling correction between test (X) and key (Z) single-photon errors."""
    if ratio <= 0 or ratio >= 1:
        return 0.0
    c, d = n_test, n_key
    spread = (c + d) * (1 - ratio) * ratio / (c * d * math.log(2))
    arg = (c + d) / (c * d * (1 - ratio) * ratio) * (N_EPS_TERMS / eps) ** 2
    return math.sqrt(spread * max(0.0, math.log2(arg)))


def phase_error_upper(bounds: DecoyBounds, sec: SecurityParams, dimension: int = 4) -> float:
    """Upper bound on the Z phase error rate from X single-photon statistics."""
    cap = random_error(dimension)
    if bounds.s_X1_low <= 0 or bounds.D1_Z_low <= 0:
        return cap
    ratio = bounds.v_X1_up / bounds.s_X1_low
    if ratio >= cap:
        return cap
    phi = ratio + serfling_gamma(sec.eps_sec, ratio, bounds.s_X1_low, bounds.D1_Z_low)
    return min(max(phi, 0.0), cap)


def decoy_bounds_closed_form(t: TallySet, settings: IntensitySettings, sec: SecurityParams,
                             dimension: int = 4) -> DecoyBounds:
    """One-decoy bounds on vacuum/single-photon events and the phase error."""
    _check_intensities(settings)
    check_dimension(dimension)
    t0, t1 = tau(0, settings), tau(1, settings)
    mu, nu = settings.mu, settings.nu
    extra = {"tau_0": t0, "tau_1": t1}
    per_basis = {}
    for b in Basis:
        n = {k: t.n(b, k) for k in INTENSITIES}
        n_pm = scaled_counts(n, t.n_total(b), settings, sec.eps_term)
        s0_up = vacuum_upper(t, b, settings, sec, dimension)
        s0_low = _vacuum_lower(n_pm, settings, t0)
        s1_low = _single_lower(n_pm, s0_up, settings, t0, t1)
        total = t.n_total(b)
        per_basis[b] = (min(max(s0_low, 0.0), total), min(max(s1_low, 0.0), total))
        extra[f"s_{b.value}0_up"] = s0_up
        extra[f"n_{b.value}_pm"] = {k: list(v) for k, v in n_pm.items()}

    m = {k: t.m(Basis.X, k) for k in INTENSITIES}
    m_pm = scaled_counts(m, t.m_total(Basis.X), settings, sec.eps_term)
    v1_up = t1 / (mu - nu) * (m_pm["mu"][1] - m_pm["nu"][0])
    v1_up = min(max(v1_up, 0.0), t.m_total(Basis.X))
    extra["m_X_pm"] = {k: list(v) for k, v in m_pm.items()}

    bounds = DecoyBounds(
        D0_Z_low=per_basis[Basis.Z][0],
        D1_Z_low=per_basis[Basis.Z][1],
        s_X1_low=per_basis[Basis.X][1],
        v_X1_up=v1_up,
        extra=extra,
    )
    bounds.phi_Z_up = phase_error_upper(bounds, sec, dimension)
    return bounds


# -- key length --------------------------------------------------------------

def lambda_ec(n_z: float, qber_z: float, dimension: int, sec: SecurityParams) -> float:
    """Bits leaked by error correction: ``f_ec n_Z H_d(QBER_Z)``."""
    if n_z < 0:
        raise ValueError("n_z must be >= 0")
    return sec.f_ec * n_z * entropy(qber_z, dimension)


def _key_length(vacuum_bits: float, b: DecoyBounds, lam: float, sec: SecurityParams,
                dimension: int, acquisition_time_s: float) -> KeyResult:
    bits = math.log2(dimension)
    raw = (vacuum_bits * b.D0_Z_low + b.D1_Z_low * (bits - entropy(b.phi_Z_up, dimension))
           - lam - sec.overhead_bits())
    ell = max(0, math.floor(raw))
    diagnostics = {
        "D0_Z_low": b.D0_Z_low, "D1_Z_low": b.D1_Z_low, "s_X1_low": b.s_X1_low,
        "v_X1_up": b.v_X1_up, "phi_Z_up": b.phi_Z_up, "lambda_EC": lam,
        "overhead_bits": sec.overhead_bits(), "ell_unclamped": raw,
    }
    return KeyResult(ell, ell / acquisition_time_s, diagnostics)


def key_length_4d(b: DecoyBounds, lambda_ec: float, sec: SecurityParams,
                  acquisition_time_s: float = 1.0) -> KeyResult:
    """``2 D0 + D1 (2 - H(phi)) - lambda_EC - overheads``, floored and clamped at zero."""
    return _key_length(2.0, b, lambda_ec, sec, 4, acquisition_time_s)


def key_length_2d(b: DecoyBounds, lambda_ec: float, sec: SecurityParams,
                  acquisition_time_s: float = 1.0) -> KeyResult:
    return _key_length(1.0, b, lambda_ec, sec, 2, acquisition_time_s)


def key_length(b: DecoyBounds, lambda_ec: float, sec: SecurityParams, dimension: int,
               acquisition_time_s: float = 1.0) -> KeyResult:
    fn = key_length_4d if check_dimension(dimension) == 4 else key_length_2d
    return fn(b, lambda_ec, sec, acquisition_time_s)
