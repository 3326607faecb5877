import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hdqkd.states import Basis, TimeBin, encode, overlap, verify_mub, basis_states
from oracles import handwritten_states

S = 1 / math.sqrt(2)


@pytest.mark.parametrize("basis,symbol,expected", [
    ("Z", 0, [S, S, 0, 0]),
    ("Z", 3, [0, 0, S, -S]),
    ("X", 1, [S, 0, -S, 0]),
])
def test_encode_examples(basis, symbol, expected):
    np.testing.assert_allclose(encode(basis, symbol, 4), expected, atol=1e-15)


def test_encode_matches_hand_written_states():
    ref = handwritten_states()
    for b in Basis:
        for s in range(4):
            np.testing.assert_array_equal(encode(b, s), ref[b.value][s])


@pytest.mark.parametrize("args", [("Z", 4, 4), ("X", -1, 4), ("Z", 2, 2), ("Z", 0, 3), ("Y", 0, 4)])
def test_encode_rejects_bad_arguments(args):
    with pytest.raises(ValueError):
        encode(*args)


def test_overlap_basics():
    assert overlap(encode("Z", 0), encode("Z", 0)) == pytest.approx(1)
    assert overlap(encode("Z", 0), encode("Z", 1)) == pytest.approx(0)
    for n in range(4):
        for m in range(4):
            assert abs(overlap(encode("Z", n), encode("X", m))) ** 2 == pytest.approx(0.25, abs=1e-12)


def test_overlap_is_conjugate_linear_in_first_argument():
    a = np.array([1j, 0])
    b = np.array([1, 0])
    assert overlap(a, b) == pytest.approx(-1j)


def test_overlap_length_mismatch():
    with pytest.raises(ValueError):
        overlap(encode("Z", 0, 4), encode("Z", 0, 2))


@pytest.mark.parametrize("d", [2, 4])
def test_verify_mub(d):
    ok, table = verify_mub(d)
    assert ok
    np.testing.assert_allclose(table, 1 / d, atol=1e-12)


def test_verify_mub_detects_perturbation():
    states = {b: basis_states(b) for b in Basis}
    states[Basis.X][2] = states[Basis.X][2].copy()
    states[Basis.X][2][1] += 1e-3
    ok, table = verify_mub(4, states)
    assert not ok
    assert abs(table[0, 2] - 0.25) > 1e-4


def test_two_dimensional_states_use_quadrature_phases():
    np.testing.assert_allclose(encode("X", 0, 2), [S, 1j * S], atol=1e-15)
    np.testing.assert_allclose(encode("X", 1, 2), [S, -1j * S], atol=1e-15)


@pytest.mark.parametrize("d", [2, 4])
def test_gram_identity_and_encode_injective(d):
    seen = set()
    for b in Basis:
        g = np.array([[overlap(u, v) for v in basis_states(b, d)] for u in basis_states(b, d)])
        np.testing.assert_allclose(g, np.eye(d), atol=1e-12)
        for s in range(d):
            seen.add(tuple(np.round(encode(b, s, d), 12)))
    assert len(seen) == 2 * d


@given(st.sampled_from(list(Basis)), st.integers(0, 3))
def test_protocol_state_structure(basis, symbol):
    v = encode(basis, symbol)
    assert np.linalg.norm(v) == pytest.approx(1, abs=1e-12)
    nz = np.flatnonzero(np.abs(v) > 0)
    assert len(nz) == 2
    np.testing.assert_allclose(np.abs(v[nz]), S, atol=1e-15)
    rel = v[nz[1]] / v[nz[0]]
    assert rel == pytest.approx(1 if symbol % 2 == 0 else -1)


def test_time_bin_bounds():
    assert TimeBin(3).label == "t4"
    with pytest.raises(ValueError):
        TimeBin(4)
    with pytest.raises(ValueError):
        TimeBin(0, duration=0)
