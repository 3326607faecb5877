import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from hdqkd.finite_key import (
    DecoyBounds, IllConditionedError, SecurityParams, asymptotic_threshold,
    decoy_bounds_closed_form, entropy_2d, entropy_4d, fluctuation_bound, key_length,
    key_length_2d, key_length_4d, lambda_ec, phase_error_upper, serfling_gamma, tau,
)
from hdqkd.link import IntensitySettings, LinkParams, TallySet, expected_tallies
from hdqkd.states import Basis

SEC = SecurityParams()


# values below come from mpmath at 30 digits
def test_entropy_4d_values():
    assert entropy_4d(0) == 0
    assert entropy_4d(0.75) == pytest.approx(2.0, abs=1e-15)
    assert entropy_4d(0.189) == pytest.approx(0.998932756600394, abs=1e-12)
    assert entropy_4d(0.025) == pytest.approx(0.208284994014699, abs=1e-12)


def test_entropy_2d_values():
    assert entropy_2d(0) == 0
    assert entropy_2d(0.5) == pytest.approx(1.0)
    assert entropy_2d(0.11) == pytest.approx(0.499915958164528, abs=1e-12)


@pytest.mark.parametrize("fn,x", [(entropy_4d, -0.01), (entropy_4d, 0.8), (entropy_2d, 0.51)])
def test_entropy_domain(fn, x):
    with pytest.raises(ValueError):
        fn(x)


def test_entropy_concave_and_maximal():
    xs = np.linspace(0, 0.75, 301)
    h = np.array([entropy_4d(x) for x in xs])
    assert np.all(np.diff(h, 2) <= 1e-12)
    assert h.argmax() == len(xs) - 1
    xs2 = np.linspace(0, 0.5, 201)
    h2 = np.array([entropy_2d(x) for x in xs2])
    assert np.all(np.diff(h2, 2) <= 1e-12)
    assert h2.max() == pytest.approx(1)


def test_fluctuation_bound():
    assert fluctuation_bound(0, 0.1) == 0
    assert fluctuation_bound(1e6, 1e-9) == pytest.approx(3218.94903943402, rel=1e-12)
    assert max(0.0, 10 - fluctuation_bound(10, 1e-9)) == 0


def test_thresholds():
    assert asymptotic_threshold(4) == pytest.approx(0.189, abs=0.001)
    assert asymptotic_threshold(2) == pytest.approx(0.110, abs=0.001)
    assert 2 - 2 * entropy_4d(0) == math.log2(4)
    assert 1 - 2 * entropy_2d(0) == math.log2(2)


def test_tau_sums_to_one():
    s = IntensitySettings(0.5, 0.18, 0.78, 0.1)
    assert sum(tau(n, s) for n in range(40)) == pytest.approx(1)


def test_zero_tallies_give_zero_bounds():
    b = decoy_bounds_closed_form(TallySet(), IntensitySettings(), SEC)
    assert b.D0_Z_low == b.D1_Z_low == b.s_X1_low == b.v_X1_up == 0
    assert b.phi_Z_up == 0.75


def test_bounds_dominated_by_totals():
    s = IntensitySettings(0.5, 0.18, 0.78, 0.3)
    for length in (0, 50, 150, 250):
        t = expected_tallies(s, LinkParams(length_km=length), 1e10)
        b = decoy_bounds_closed_form(t, s, SEC)
        assert b.D0_Z_low + b.D1_Z_low <= t.n_total(Basis.Z) * (1 + 1e-12)
        assert b.s_X1_low <= t.n_total(Basis.X)
        assert b.v_X1_up <= t.m_total(Basis.X)


def test_bounds_monotone_in_counts():
    s = IntensitySettings(0.5, 0.18, 0.78, 0.3)
    base = expected_tallies(s, LinkParams(length_km=100), 1e10)
    more = base.scaled(1.0)
    more.n_z_nu *= 1.01
    assert decoy_bounds_closed_form(more, s, SEC).D1_Z_low >= decoy_bounds_closed_form(base, s, SEC).D1_Z_low


def test_degenerate_intensities():
    s = IntensitySettings(0.5, 0.5 * (1 - 1e-9), 0.78, 0.1)
    t = expected_tallies(s, LinkParams(), 1e9)
    with pytest.raises(IllConditionedError):
        decoy_bounds_closed_form(t, s, SEC)


def test_phase_error_limits():
    b = DecoyBounds(D1_Z_low=1e30, s_X1_low=1e30, v_X1_up=0.02e30)
    assert phase_error_upper(b, SEC) == pytest.approx(0.02, abs=1e-9)
    assert phase_error_upper(DecoyBounds(D1_Z_low=10, s_X1_low=0), SEC) == 0.75
    assert phase_error_upper(DecoyBounds(D1_Z_low=10, s_X1_low=0), SEC, 2) == 0.5


def test_phase_error_decreases_with_larger_eps():
    b = DecoyBounds(D1_Z_low=1e6, s_X1_low=1e4, v_X1_up=200)
    loose = phase_error_upper(b, SecurityParams(eps_sec=1e-3))
    strict = phase_error_upper(b, SecurityParams(eps_sec=1e-12))
    assert loose < strict


@given(st.floats(1e2, 1e12), st.floats(1e-3, 0.5))
def test_gamma_nonnegative_and_vanishing(n, ratio):
    g = serfling_gamma(1e-9, ratio, n, n)
    assert g >= 0
    assert serfling_gamma(1e-9, ratio, n * 1e6, n * 1e6) <= g + 1e-15


def test_key_length_structure():
    b = DecoyBounds(D0_Z_low=0, D1_Z_low=1e6, phi_Z_up=0)
    overhead = 6 * math.log2(19 / 1e-9) + math.log2(2 / 1e-10)
    assert overhead == pytest.approx(239.090963153453, abs=1e-9)
    assert key_length_4d(b, 0, SEC).ell_bits == 2_000_000 - 240
    assert key_length_2d(b, 0, SEC).ell_bits == 1_000_000 - 240
    assert key_length_4d(DecoyBounds(), 0, SEC).ell_bits == 0
    assert key_length_2d(DecoyBounds(), 0, SEC).ell_bits == 0


def test_skr_is_ell_over_time():
    b = DecoyBounds(D1_Z_low=1e6)
    r = key_length(b, 0, SEC, 4, acquisition_time_s=320)
    assert r.skr_bps == pytest.approx(r.ell_bits / 320)


def test_lambda_ec():
    assert lambda_ec(1e6, 0, 4, SEC) == 0
    one = SecurityParams(f_ec=1.0)
    assert lambda_ec(1e6, 0.025, 4, one) == pytest.approx(1e6 * 0.208284994014699, rel=1e-12)
    assert lambda_ec(2e6, 0.03, 2, SEC) == pytest.approx(2 * lambda_ec(1e6, 0.03, 2, SEC))
    with pytest.raises(ValueError):
        lambda_ec(1e6, 0.8, 4, SEC)


@hsettings(max_examples=200)
@given(st.floats(0, 1e7), st.floats(0, 1e7), st.floats(0, 0.75), st.floats(0, 1e6),
       st.floats(0, 1e6), st.floats(0, 0.2))
def test_key_length_monotone(d0, d1, phi, lam, delta, dphi):
    base = key_length_4d(DecoyBounds(D0_Z_low=d0, D1_Z_low=d1, phi_Z_up=phi), lam, SEC).ell_bits
    worse_phi = min(phi + dphi, 0.75)
    assert key_length_4d(DecoyBounds(D0_Z_low=d0, D1_Z_low=d1, phi_Z_up=worse_phi), lam, SEC).ell_bits <= base
    assert key_length_4d(DecoyBounds(D0_Z_low=d0, D1_Z_low=d1, phi_Z_up=phi), lam + delta, SEC).ell_bits <= base
    assert key_length_4d(DecoyBounds(D0_Z_low=d0 + delta, D1_Z_low=d1, phi_Z_up=phi), lam, SEC).ell_bits >= base
    assert key_length_4d(DecoyBounds(D0_Z_low=d0, D1_Z_low=d1 + delta, phi_Z_up=phi), lam, SEC).ell_bits >= base


def test_rate_invariant_under_scaling():
    # same tallies per unit time -> same SKR when the block and its duration scale together
    s = IntensitySettings(0.5, 0.18, 0.78, 0.3)
    link = LinkParams(length_km=50)
    t = expected_tallies(s, link, 1e10)
    r1 = key_length(decoy_bounds_closed_form(t, s, SEC), 0, SEC, 4, acquisition_time_s=32)
    inf_sec = SecurityParams(eps_sec=0.5, eps_cor=0.5)
    a = key_length(decoy_bounds_closed_form(t.scaled(1e6), s, inf_sec), 0, inf_sec, 4, 32e6).skr_bps
    b = key_length(decoy_bounds_closed_form(t.scaled(2e6), s, inf_sec), 0, inf_sec, 4, 64e6).skr_bps
    assert a == pytest.approx(b, rel=1e-3)
    assert r1.skr_bps > 0


def test_security_params_validation():
    for kw in ({"eps_sec": 0}, {"eps_cor": 1}, {"block_size_N": 0}, {"f_ec": 0.9},
               {"block_semantics": "frames"}):
        with pytest.raises(ValueError):
            SecurityParams(**kw)
