"""Quantum numbers, degeneracies and single-state drifts.

Provenance tags: [TRIVIAL] direct consequence of a definition, [PAPER] printed
value, [DERIVED] checked against an independent computation (brute-force
product space, exact rationals, or the sympy closed form).
"""
import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import assume, given
from hypothesis import strategies as st

from superrad.dicke import (
    NO_BOUNDARY,
    DickeIndex,
    HalfInt,
    RateSet,
    boundary_j,
    degeneracy_Dj,
    degeneracy_dm,
    delay_time_pure,
    dephasing_threshold,
    derivative_coefficients,
    dicke_space_size,
    emission_rate,
    enumerate_dicke_space,
    ladder_coefficient,
    state_derivatives,
)

rates_st = st.builds(RateSet,
                     st.floats(0, 50, allow_nan=False), st.floats(0, 50, allow_nan=False),
                     st.floats(0, 50, allow_nan=False))


@st.composite
def dicke_point(draw, n_max=80):
    N = draw(st.integers(1, n_max))
    tj = draw(st.sampled_from(range(N, -1, -2)))
    tm = draw(st.sampled_from(range(-tj, tj + 1, 2)))
    return N, HalfInt(tj), HalfInt(tm)


# --- HalfInt / DickeIndex ---------------------------------------------------

def test_halfint_exact_value():
    h = HalfInt.of("49/2")
    assert h.doubled == 49 and h.value == Fraction(49, 2)
    assert HalfInt.of(Fraction(3, 2)) == HalfInt.of(1.5) == HalfInt(3)


def test_halfint_rejects_quarters():
    with pytest.raises(ValueError):
        HalfInt.of(Fraction(1, 4))


@given(st.integers(-10**6, 10**6), st.integers(-10**6, 10**6))
def test_halfint_order_matches_value(a, b):
    assert (HalfInt(a) < HalfInt(b)) == (Fraction(a, 2) < Fraction(b, 2))
    assert (HalfInt(a) + HalfInt(b)).value == Fraction(a + b, 2)


def test_dicke_index_validity():
    assert DickeIndex.of(1, 0).is_valid(2)
    assert not DickeIndex.of(1, 0).is_valid(3)  # j - N/2 not integer
    assert not DickeIndex.of("1/2", "3/2").is_valid(3)
    with pytest.raises(ValueError):
        DickeIndex.of(2, 0).validate(2)


# --- enumeration --------------------------------------------------------------

def test_enumerate_single_spin():
    # [TRIVIAL]
    assert enumerate_dicke_space(1) == [DickeIndex.of("1/2", "1/2"), DickeIndex.of("1/2", "-1/2")]


def test_enumerate_two_spins():
    # [TRIVIAL] triplet + singlet
    assert enumerate_dicke_space(2) == [DickeIndex.of(1, 1), DickeIndex.of(1, 0), DickeIndex.of(1, -1),
                                        DickeIndex.of(0, 0)]


def test_enumerate_four_spins():
    # [DERIVED] counted by hand from the invariants
    states = enumerate_dicke_space(4)
    assert len(states) == 9
    assert [sum(1 for s in states if s.j == HalfInt(tj)) for tj in (4, 2, 0)] == [5, 3, 1]


def test_enumerate_rejects_zero():
    with pytest.raises(ValueError):
        enumerate_dicke_space(0)


@given(st.integers(1, 200))
def test_enumeration_count_and_order(N):
    states = enumerate_dicke_space(N)
    assert len(states) == dicke_space_size(N) == sum(tj + 1 for tj in range(N, -1, -2))
    keys = [(s.j.doubled, s.m.doubled) for s in states]
    assert keys == sorted(keys, reverse=True)
    assert all(s.is_valid(N) for s in states)


def test_space_size_even():
    # (N/2 + 1)^2 for even N
    assert dicke_space_size(50) == 676


# --- degeneracies -------------------------------------------------------------

def test_dj_top_is_one():
    for N in (1, 7, 64, 300):
        assert degeneracy_Dj(N, HalfInt(N)) == 1


def _brute_multiplicities(N):
    """Count j-multiplicities by diagonalizing J^2 in the product space."""
    from superrad.oracle import build_operators

    ops = build_operators(N)
    ev = np.linalg.eigvalsh(ops.j2.matrix.toarray())
    jj = np.rint(ev * 4).astype(int)  # 4 j(j+1) is an integer
    counts = {}
    for v in jj:
        counts[v] = counts.get(v, 0) + 1
    out = {}
    for tj in range(N, -1, -2):
        key = tj * (tj + 2)  # 4 j (j+1)
        out[tj] = counts.get(key, 0) // (tj + 1)
    return out


def test_dj_against_product_space():
    # [DERIVED] brute-force diagonalization, N = 4: D_1 = 3, D_0 = 2
    mult = _brute_multiplicities(4)
    assert mult == {4: 1, 2: 3, 0: 2}
    assert degeneracy_Dj(4, 1) == 3 and degeneracy_Dj(4, 0) == 2


@pytest.mark.parametrize("N", [3, 5, 6])
def test_dj_against_product_space_more(N):
    mult = _brute_multiplicities(N)
    for tj, count in mult.items():
        assert degeneracy_Dj(N, HalfInt(tj)) == count


def test_dm_examples():
    assert degeneracy_dm(4, 0) == 6  # [PAPER] binomial form
    assert degeneracy_dm(9, HalfInt(9)) == 1
    # [DERIVED] product states of 6 spins with four up
    assert degeneracy_dm(6, 1) == sum(1 for k in range(64) if bin(k).count("1") == 4) == 15


def test_degeneracy_invalid():
    with pytest.raises(ValueError):
        degeneracy_Dj(4, HalfInt(3))
    with pytest.raises(ValueError):
        degeneracy_dm(4, HalfInt(1))
    with pytest.raises(ValueError):
        degeneracy_dm(4, 3)


def test_degeneracies_are_big_ints():
    D = degeneracy_Dj(400, 0)
    assert isinstance(D, int) and D.bit_length() > 300


@pytest.mark.parametrize("N", range(1, 65))
def test_partition_and_shell_identities(N):
    Dj = {tj: degeneracy_Dj(N, HalfInt(tj)) for tj in range(N, -1, -2)}
    assert sum(D * (tj + 1) for tj, D in Dj.items()) == 2**N
    for tm in range(-N, N + 1, 2):
        assert degeneracy_dm(N, HalfInt(tm)) == sum(D for tj, D in Dj.items() if tj >= abs(tm))


# --- ladder and emission --------------------------------------------------------

def test_ladder_examples():
    assert ladder_coefficient(3, 3, "+") == 0.0
    assert ladder_coefficient(Fraction(1, 2), Fraction(-1, 2), "+") == 1.0
    assert ladder_coefficient(25, 0, "-") == pytest.approx(math.sqrt(650), rel=1e-15)
    with pytest.raises(ValueError):
        ladder_coefficient(1, 0, "x")


def test_ladder_matches_matrix_rep():
    # [DERIVED] explicit spin-j matrix of J-
    j = 3
    ms = np.arange(j, -j - 1, -1)
    Jm = np.zeros((2 * j + 1, 2 * j + 1))
    for k, m in enumerate(ms[:-1]):
        Jm[k + 1, k] = math.sqrt(j * (j + 1) - m * (m - 1))
    for k, m in enumerate(ms):
        col = Jm[:, k]
        assert np.linalg.norm(col) == pytest.approx(ladder_coefficient(j, m, "-"), abs=1e-14)


def test_emission_examples():
    N = 12
    assert emission_rate(N / 2, N / 2, 1.0) == N  # [PAPER] fully excited state
    assert emission_rate(N / 2, 0, 2.0) == 2.0 * (N / 2) * (N / 2 + 1)  # [PAPER] superradiant equator
    assert emission_rate(4, -4, 3.0) == 0.0


@pytest.mark.parametrize("N", range(1, 31))
def test_emission_is_ladder_squared(N):
    for s in enumerate_dicke_space(N):
        assert emission_rate(s.j, s.m, 1.7) == pytest.approx(1.7 * ladder_coefficient(s.j, s.m, "-") ** 2,
                                                             rel=1e-12, abs=1e-12)


# --- drifts -------------------------------------------------------------------

def test_ground_state_is_stationary():
    for N in (1, 2, 9, 40):
        d = state_derivatives(N / 2, -N / 2, RateSet(1.3, 0.7, 2.9), N)
        assert d.dm_dt == 0 and d.dj_dt == 0


def test_table_square_dm():
    # [PAPER] square column: -gamma_L N / 4
    N = 40
    d = state_derivatives(N / 4, -N / 4, RateSet(0, 2.0, 0), N)
    assert d.dm_dt == -2.0 * N / 4


def test_table_star_dj():
    # [PAPER] star column: (gamma_D/2 + gamma_L) N
    N = 40
    d = state_derivatives(0, 0, RateSet(0, 1.5, 3.0), N)
    assert d.dj_dt == pytest.approx(3.0 * N / 2 + 1.5 * N, rel=1e-15)


def test_derivative_coefficients_exact_types():
    c = derivative_coefficients(HalfInt(4), HalfInt(-2), 8)
    assert all(isinstance(x, Fraction) for x in c)
    assert c[1] == Fraction(-3)


def test_derivative_coefficients_symbolic():
    import sympy

    N = sympy.Symbol("N", positive=True)
    cS, cLm, cD, cLj = derivative_coefficients(N / 2, N / 2, N)
    assert sympy.simplify(cS + N) == 0
    assert sympy.simplify(cLj + N * (N - 1) / (N + 1)) == 0


@given(dicke_point(), rates_st)
def test_dm_never_positive(point, rates):
    N, j, m = point
    assert state_derivatives(j, m, rates, N).dm_dt <= 1e-9


@given(dicke_point(), rates_st)
def test_channel_split_adds_up(point, rates):
    N, j, m = point
    d = state_derivatives(j, m, rates, N)
    assert d.dm_dt == pytest.approx(d.dm_S + d.dm_L)
    assert d.dj_dt == pytest.approx(d.dj_D + d.dj_L)


# --- boundary -----------------------------------------------------------------

def test_boundary_pure_dephasing_m0():
    # [DERIVED] j^2 + j = N/2
    N = 30
    j = boundary_j(0, RateSet(0, 0, 1), N)
    assert j == pytest.approx((-1 + math.sqrt(1 + 2 * N)) / 2, rel=1e-14)


def test_boundary_pure_loss_m0():
    # [DERIVED] j^2 + j = N
    N = 30
    j = boundary_j(0, RateSet(0, 1, 0), N)
    assert j * j + j == pytest.approx(N, rel=1e-13)


def test_boundary_requires_rates():
    with pytest.raises(ValueError):
        boundary_j(0, RateSet(1, 0, 0), 10)


def test_boundary_no_root():
    # gamma_D = 0: rhs = N - (N-1) m - m^2 < 0 near the top of the triangle
    assert boundary_j(10, RateSet(0, 1, 0), 20) is NO_BOUNDARY


@pytest.mark.parametrize("ratio", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("N", [20, 101])
def test_boundary_sign_flip(ratio, N):
    # [TRIVIAL] simple root of the quadratic
    rates = RateSet(0.0, ratio, 1.0)
    eps = 1e-3
    for tm in range(-N, N + 1, 2):
        m = tm / 2
        j = boundary_j(m, rates, N)
        if j is NO_BOUNDARY or j < eps:
            continue
        lo = state_derivatives(j - eps, m, rates, N).dj_dt
        hi = state_derivatives(j + eps, m, rates, N).dj_dt
        assert lo * hi < 0


# --- time scales --------------------------------------------------------------

def test_delay_time():
    assert delay_time_pure(1000, 1.0) == pytest.approx(6.9078e-3, rel=1e-4)  # [PAPER]
    assert delay_time_pure(2, 1.0) == math.log(2) / 2
    with pytest.raises(ValueError):
        delay_time_pure(1, 1.0)


@given(st.integers(2, 10**6), st.floats(1e-3, 1e3), st.floats(1e-2, 1e2))
def test_delay_time_scaling(N, g, c):
    assert delay_time_pure(N, c * g) == pytest.approx(delay_time_pure(N, g) / c, rel=1e-12)


def test_dephasing_threshold():
    # [PAPER] quoted as ~380.3; the formula itself gives 1000 / sqrt(ln 1000) = 380.48
    assert dephasing_threshold(1000, 1.0) == pytest.approx(1000 / math.sqrt(math.log(1000)), rel=1e-15)
    assert dephasing_threshold(1000, 1.0) == pytest.approx(380.3, rel=1e-3)
    assert dephasing_threshold(10**4, 1.0) == pytest.approx(3294, rel=1e-3)
    vals = [dephasing_threshold(N, 1.0) for N in range(3, 2000)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_rateset_validation():
    with pytest.raises(ValueError):
        RateSet(-1, 0, 0)
    with pytest.raises(ValueError):
        RateSet(0, 0, 0).require_evolution()
    with pytest.raises(ValueError):
        RateSet(math.nan, 0, 0)
