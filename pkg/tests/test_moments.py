"""Moment hierarchy: hand-coded closures, general equation, generator, integration."""
import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from superrad.dicke import RateSet, emission_rate
from superrad.moments import (
    GD,
    GL,
    GS,
    NSYM,
    W0,
    BoundViolation,
    ClosureError,
    MomentKey,
    MomentState,
    Monomial,
    Z,
    C,
    _close,
    _first_order,
    _second_order,
    generate_system,
    integrate,
    key_equation,
    key_to_polynomial,
    monomial_equation,
    peel_closure,
    polynomial_to_keys,
    rhs_first_order,
    rhs_second_order,
    tracked_monomials,
)
from superrad.oracle import build_operators, lindblad_rhs

SYMS = dict(zip(("Jz", "J2", "Jz2"), sympy.symbols("Jz J2 Jz2")))


def excited(N):
    return {"Jz": N / 2, "J2": N / 2 * (N / 2 + 1), "Jz2": N * N / 4}


# --- hand-coded systems -------------------------------------------------------

def test_first_order_excited():
    # [PAPER] fully excited state
    N = 40
    d = rhs_first_order(excited(N), RateSet(1.3, 0.4, 7.0), N)
    assert d["Jz"] == pytest.approx(-(1.3 + 0.4) * N, rel=1e-14)


def test_first_order_superradiant_point():
    # [PAPER] superradiant equator: -gamma_S N/2 (N/2 + 1)
    N = 40
    d = rhs_first_order({"Jz": 0.0, "J2": N / 2 * (N / 2 + 1)}, RateSet(gamma_S=1.0), N)
    assert d["Jz"] == -N / 2 * (N / 2 + 1)


@pytest.mark.parametrize("N", [1, 8, 33])
def test_ground_state_stationary(N):
    g = {"Jz": -N / 2, "J2": N / 2 * (N / 2 + 1), "Jz2": N * N / 4}
    r = RateSet(1.1, 2.2, 3.3)
    assert all(v == 0 for v in rhs_first_order(g, r, N).values())
    assert all(v == pytest.approx(0, abs=1e-12) for v in rhs_second_order(g, r, N).values())


def test_second_order_reduces_to_first():
    jz, j2 = sympy.symbols("jz j2")
    a = _first_order(jz, j2, GS, GL, GD, NSYM)
    b = _second_order(jz, j2, jz**2, GS, GL, GD, NSYM)
    assert sympy.simplify(a[0] - b[0]) == 0 and sympy.simplify(a[1] - b[1]) == 0


def test_second_order_excited_leading():
    # [DERIVED] -gamma_S N^2 + lower order at the excited state, gamma_L = 0
    jz, j2, jz2 = NSYM / 2, NSYM / 2 * (NSYM / 2 + 1), NSYM**2 / 4
    d = sympy.expand(_second_order(jz, j2, jz2, 1, 0, 0, NSYM)[2])
    assert sympy.Poly(d, NSYM).LC() == -1 and sympy.degree(d, NSYM) == 2


def test_second_order_excited_matches_oracle():
    # the excited state is a product state, so the closure is exact there
    N = 6
    ops = build_operators(N)
    rho = np.zeros((64, 64), complex)
    rho[0, 0] = 1
    rates = RateSet(1.0, 0.0, 0.0)
    Jz = ops.jz.matrix.toarray()
    d = lindblad_rhs(rho, rates, ops)
    ref = np.trace(Jz @ Jz @ d).real
    assert rhs_second_order(excited(N), rates, N)["Jz2"] == pytest.approx(ref, rel=1e-12)


# --- general equation ---------------------------------------------------------

def _oracle_moment(ops, p, r, q):
    Jp = ops.jp.matrix.toarray()
    Jm = ops.jm.matrix.toarray()
    Jz = ops.jz.matrix.toarray()
    mp = np.linalg.matrix_power
    return mp(Jp, p) @ mp(Jz, r) @ mp(Jm, q)


@pytest.mark.parametrize("key", [MomentKey(p, r, q) for p in range(3) for r in range(3) for q in range(3)])
def test_general_equation_against_oracle(key, rng):
    N = 4
    ops = build_operators(N)
    X = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    rho = X @ X.conj().T
    rho /= np.trace(rho).real
    vals = dict(gamma_S=0.8, gamma_L=1.3, gamma_D=0.5, omega_0=0.9)
    rates = RateSet(**vals)
    lhs = np.trace(_oracle_moment(ops, *key) @ lindblad_rhs(rho, rates, ops))
    subs = {NSYM: N, GS: vals["gamma_S"], GL: vals["gamma_L"], GD: vals["gamma_D"], W0: vals["omega_0"]}
    rhs = sum(complex(c.subs(subs)) * np.trace(_oracle_moment(ops, *k) @ rho) for k, c in key_equation(key).items())
    assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(lhs))


def test_omega_drops_out_for_diagonal_keys():
    for k in (MomentKey(0, 1, 0), MomentKey(1, 0, 1), MomentKey(2, 1, 2)):
        for c in key_equation(k).values():
            assert W0 not in c.free_symbols


@pytest.mark.parametrize("key", [MomentKey(p, r, p) for p in range(4) for r in range(4)])
def test_key_polynomial_roundtrip(key):
    back = polynomial_to_keys(key_to_polynomial(key))
    assert {k: sympy.simplify(v) for k, v in back.items() if sympy.simplify(v) != 0} == {key: 1}


def test_key_polynomial_jpjm():
    # J+J- = J^2 - Jz^2 + Jz
    assert sympy.expand(key_to_polynomial(MomentKey(1, 0, 1)) - (C - Z**2 + Z)) == 0
    with pytest.raises(ValueError):
        key_to_polynomial(MomentKey(1, 0, 0))


def test_monomial_equation_jz_is_printed_line():
    # [PAPER] d<Jz>/dt before closure
    expr = monomial_equation(Monomial(1, 0))
    expected = -GS * (C - Z**2 + Z) - GL * (Z + NSYM / 2)
    assert sympy.expand(expr - expected) == 0


# --- generator ----------------------------------------------------------------

def test_tracked_sets():
    assert tracked_monomials(1) == [Monomial(1, 0), Monomial(0, 1)]
    assert tracked_monomials(2) == [Monomial(1, 0), Monomial(0, 1), Monomial(2, 0)]
    assert Monomial(1, 1) in tracked_monomials(3)
    with pytest.raises(ValueError):
        tracked_monomials(0)


def test_peel_closure_order2():
    t = frozenset(tracked_monomials(2))
    jz, j2, jz2 = (m.symbol() for m in (Monomial(1, 0), Monomial(0, 1), Monomial(2, 0)))
    assert peel_closure(Monomial(3, 0), t) == jz * jz2
    assert peel_closure(Monomial(1, 1), t) == jz * j2
    assert peel_closure(Monomial(2, 0), frozenset(tracked_monomials(1))) == jz**2


def test_closure_error_names_key():
    def never(mono, tracked):
        return None if mono not in tracked else mono.symbol()

    with pytest.raises(ClosureError, match="Jz"):
        _close(sympy.Poly(Z**3, Z, C).as_expr(), frozenset(tracked_monomials(1)), never)


@pytest.mark.parametrize("K", [1, 2])
def test_generator_matches_hand_coded(K):
    s = generate_system(K)
    jz, j2, jz2 = (SYMS[n] for n in ("Jz", "J2", "Jz2"))
    hand = _first_order(jz, j2, GS, GL, GD, NSYM) if K == 1 else _second_order(jz, j2, jz2, GS, GL, GD, NSYM)
    for mono, h in zip(s.tracked, hand):
        assert sympy.simplify(s.equations[mono] - h) == 0


def test_generator_text_export():
    text = generate_system(2).to_text()
    lines = text.strip().splitlines()
    assert lines[0].startswith("# order=2 closure=peel")
    assert [ln.split(" = ")[0] for ln in lines[1:]] == ["d<Jz>/dt", "d<J2>/dt", "d<Jz2>/dt"]


@pytest.mark.parametrize("g", [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 0.1, 1), (1, 0.1, 10)])
def test_unclosed_rhs_exact_on_dicke_states(g):
    from superrad.oracle import build_dicke_basis, dicke_mixture

    N = 6
    ops = build_operators(N)
    basis = build_dicke_basis(N)
    rates = RateSet(*g)
    s2 = generate_system(2)
    Zm, Cm = ops.jz.matrix.toarray(), ops.j2.matrix.toarray()
    mp = np.linalg.matrix_power
    for j, m in [(3, 3), (3, 0), (2, 1), (1, -1), (0, 0)]:
        rho = dicke_mixture(basis, j, m)
        drho = lindblad_rhs(rho, rates, ops)
        got = s2.evaluate_unclosed(lambda mo: float(m) ** mo.a * (j * (j + 1)) ** mo.b, rates, N)
        for mono, v in got.items():
            ref = np.trace(mp(Zm, mono.a) @ mp(Cm, mono.b) @ drho).real
            assert v == pytest.approx(ref, abs=1e-9, rel=1e-9)


def test_generated_order3_short_time_and_breakdown():
    # peel closure beyond order 2 is experimental: exact at t=0 on a Dicke state,
    # accurate for a short while, then flagged by the bound guard rather than clamped
    from superrad.piqs import evolve_populations, initial_dicke_state

    s3 = generate_system(3)
    N, r = 30, RateSet(1, 0.1, 1)
    t = np.linspace(0, 0.02, 11)
    out = integrate(s3, MomentState.from_dicke(N, 15, 15, s3), r, t)
    ref = evolve_populations(initial_dicke_state(N, 15, 15), r, t)
    assert out.meta["solver"].startswith("generated")
    assert np.max(np.abs(out["Jz"] - ref["Jz"])) / 15 < 1e-2
    with pytest.raises(BoundViolation):
        integrate(s3, MomentState.from_dicke(N, 15, 15, s3), r, np.linspace(0, 1, 11))


# --- integration --------------------------------------------------------------

def test_state_identity():
    s = MomentState.from_dicke(10, 4, 2)
    assert s.values["Jz2"] == 4 and s.JpJm == s.values["J2"] - 4 + 2


@pytest.mark.parametrize("order", [1, 2])
def test_ground_constant(order):
    N = 20
    out = integrate(order, MomentState.from_dicke(N, 10, -10, order), RateSet(1, 2, 3), np.linspace(0, 2, 5))
    assert np.ptp(out["Jz"]) == 0 and np.ptp(out["J2"]) == 0


def test_pair_identity_in_output():
    out = integrate(2, MomentState.from_dicke(20, 10, 10), RateSet(1, 0.1, 1), np.linspace(0, 1, 21))
    assert np.allclose(out["JpJm"], out["J2"] - out["Jz2"] + out["Jz"], rtol=0, atol=1e-12)


def test_normalized_units():
    N = 50
    out = integrate(1, MomentState.from_dicke(N, 25, 25, 1), RateSet(1), np.linspace(0, 0.1, 3))
    n = out.normalized()
    assert n["Jz"][0] == 1.0 and n["J2"][0] == 1.0
    assert n["JpJm"][0] == pytest.approx(N / (N / 2 * (N / 2 + 1)))


def test_large_n_closures_overlap():
    # [PAPER] strong loss and dephasing: closures overlap at large N
    r = RateSet(1, 10, 100)
    t = np.linspace(0, 0.4, 401)
    a = integrate(1, MomentState.from_dicke(10**4, 5000, 5000, 1), r, t).normalized()
    b = integrate(2, MomentState.from_dicke(10**4, 5000, 5000, 2), r, t).normalized()
    assert max(np.max(np.abs(a[k] - b[k])) for k in a) < 5e-3


def test_exponential_decay_at_strong_dephasing():
    # [PAPER] <J+J-> decays with t0 = 1/(gS + gL) when dephasing dominates
    r = RateSet(1, 0.1, 100)
    t = np.linspace(0, 3, 301)
    out = integrate(2, MomentState.from_dicke(50, 25, 25), r, t)
    w = (t > 0.2) & (t < 3)
    rate = -np.polyfit(t[w], np.log(out["JpJm"][w]), 1)[0]
    assert rate == pytest.approx(1.1, rel=0.1)


def test_bound_violation_aborts():
    # <J2> = 0 with <Jz> = N/2 is outside the triangle; <J+J-> < 0 drives Jz upward
    y0 = MomentState({"Jz": 5.0, "J2": 0.0}, 10)
    with pytest.raises(BoundViolation, match="Jz above"):
        integrate(1, y0, RateSet(1), np.linspace(0, 1, 5))


def test_rtol_range():
    with pytest.raises(ValueError):
        integrate(1, MomentState.from_dicke(4, 2, 2, 1), RateSet(1), [0, 1], rtol=1e-2)


def test_unknown_system():
    with pytest.raises(ValueError):
        integrate(3, MomentState.from_dicke(4, 2, 2, 1), RateSet(1), [0, 1])


@given(st.integers(10, 400), st.floats(0.01, 5), st.floats(0, 5), st.floats(0, 50))
def test_first_order_stays_physical(N, gS, gL, gD):
    r = RateSet(gS, gL, gD)
    out = integrate(1, MomentState.from_dicke(N, N / 2, N / 2, 1), r, np.linspace(0, 2 / (gS + 0.1), 21))
    n = out.normalized()
    assert np.all(np.abs(n["Jz"]) <= 1 + 1e-4) and np.all(n["J2"] >= -1e-4)
    assert np.all(np.diff(out["Jz"]) <= 1e-6 * N)


def test_emission_rate_consistency():
    # d<Jz>/dt of a Dicke state in first order with gamma_L = 0 is minus the emission rate
    N, j, m = 30, 12, 3
    d = rhs_first_order({"Jz": m, "J2": j * (j + 1)}, RateSet(gamma_S=2.0), N)
    assert d["Jz"] == -emission_rate(j, m, 2.0)
