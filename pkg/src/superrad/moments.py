"""Truncated moment hierarchy for the collective spin.

Two hand-written closed systems (first order: ``<Jz^2> ~ <Jz>^2``; second
order: ``<Jz^3> ~ <Jz><Jz^2>`` and ``<Jz J^2> ~ <Jz><J^2>``) and a symbolic
generator that expands the evolution equation of any normal-ordered product
``J+^p Jz^r J-^q`` and closes it at a chosen order.

Generated systems work with the commuting monomials ``Jz^a (J^2)^b``. For
p = q every normal-ordered key is a polynomial in Jz and J^2, because

    J+^p Jz^r J-^p = (Jz - p)^r  prod_{k<p} [J^2 - (Jz - k)(Jz - k - 1)],

so the two descriptions span the same space; the monomial form makes the
factorization rules one-liners. Order K tracks ``Jz^a (J^2)^b`` with
``a + 2b <= K`` plus ``J^2`` itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple

import numpy as np
import sympy
from scipy.integrate import solve_ivp

from .dicke import RateSet
from .timeseries import SolverError, TimeSeries

__all__ = [
    "MomentKey",
    "Monomial",
    "MomentState",
    "SymbolicSystem",
    "ClosureError",
    "BoundViolation",
    "rhs_first_order",
    "rhs_second_order",
    "key_equation",
    "key_to_polynomial",
    "polynomial_to_keys",
    "monomial_equation",
    "tracked_monomials",
    "peel_closure",
    "generate_system",
    "integrate",
    "Z",
    "C",
    "NSYM",
    "GS",
    "GL",
    "GD",
    "W0",
]

Z, C = sympy.symbols("Jz J2")
NSYM = sympy.Symbol("N", positive=True)
GS, GL, GD = sympy.symbols("gamma_S gamma_L gamma_D", nonnegative=True)
W0 = sympy.Symbol("omega_0", real=True)


class MomentKey(NamedTuple):
    """Normal-ordered moment <J+^p Jz^r J-^q>."""

    p: int
    r: int
    q: int

    def __str__(self) -> str:
        return f"<J+^{self.p} Jz^{self.r} J-^{self.q}>"


class Monomial(NamedTuple):
    """Commuting monomial <Jz^a (J^2)^b>."""

    a: int
    b: int

    @property
    def weight(self) -> int:
        return self.a + 2 * self.b

    def symbol(self) -> sympy.Symbol:
        return sympy.Symbol(self.name)

    @property
    def name(self) -> str:
        parts = []
        if self.a:
            parts.append("Jz" if self.a == 1 else f"Jz{self.a}")
        if self.b:
            parts.append("J2" if self.b == 1 else f"J2^{self.b}")
        return "_".join(parts) or "1"

    def expr(self) -> sympy.Expr:
        return Z**self.a * C**self.b


# ---------------------------------------------------------------------------
# hand-coded closed systems


def _first_order(jz, j2, gS, gL, gD, N):
    djz = -gS * (j2 - jz * jz + jz) - gL * (jz + N / 2)
    dj2 = -gD * (j2 - jz * jz - N / 2) - gL * (j2 + (N - 1) * jz + jz * jz - N)
    return djz, dj2


def _second_order(jz, j2, jz2, gS, gL, gD, N):
    djz = -gS * (j2 - jz2 + jz) - gL * (jz + N / 2)
    dj2 = -gD * (j2 - jz2 - N / 2) - gL * (j2 + (N - 1) * jz + jz2 - N)
    djz2 = gS * (j2 + jz - 3 * jz2 + 2 * jz * jz2 - 2 * jz * j2) - gL * ((N - 1) * jz + 2 * jz2 - N / 2)
    return djz, dj2, djz2


def rhs_first_order(state: Mapping[str, float], rates: RateSet, N) -> dict[str, float]:
    """d<Jz>/dt and d<J^2>/dt with <Jz^2> replaced by <Jz>^2."""
    djz, dj2 = _first_order(state["Jz"], state["J2"], rates.gamma_S, rates.gamma_L, rates.gamma_D, N)
    return {"Jz": djz, "J2": dj2}


def rhs_second_order(state: Mapping[str, float], rates: RateSet, N) -> dict[str, float]:
    """Derivatives of <Jz>, <J^2>, <Jz^2> with third-order products factorized."""
    djz, dj2, djz2 = _second_order(
        state["Jz"], state["J2"], state["Jz2"], rates.gamma_S, rates.gamma_L, rates.gamma_D, N
    )
    return {"Jz": djz, "J2": dj2, "Jz2": djz2}


# ---------------------------------------------------------------------------
# symbolic expansion of the general product-operator equation


def _zpoly_keys(a: int, poly: sympy.Expr, b: int, coeff) -> dict[MomentKey, sympy.Expr]:
    """J+^a poly(Jz) J-^b as a combination of keys."""
    out: dict[MomentKey, sympy.Expr] = {}
    if a < 0 or b < 0:
        return out
    P = sympy.Poly(sympy.expand(poly), Z)
    for (k,), c in P.terms():
        key = MomentKey(a, k, b)
        out[key] = out.get(key, 0) + coeff * c
    return out


def key_equation(key: MomentKey) -> dict[MomentKey, sympy.Expr]:
    """Expand d<J+^p Jz^r J-^q>/dt into a linear combination of keys.

    Coefficients are sympy expressions in N and the channel rates.
    """
    p, r, q = key
    terms: list[dict] = []
    X = Z**r
    terms.append(_zpoly_keys(p, X, q, sympy.I * W0 * (q - p)))
    # dephasing
    terms.append(_zpoly_keys(p, X, q, -GD * sympy.Rational(p + q, 2)))
    if p and q:
        terms.append(_zpoly_keys(p - 1, (Z - 1) ** r * (NSYM / 2 + Z), q - 1, GD * p * q))
    # collective emission
    terms.append(_zpoly_keys(p + 1, Z**r - (Z + 1) ** r, q + 1, GS))
    terms.append(_zpoly_keys(p, Z ** (r + 1), q, GS * (p + q)))
    terms.append(_zpoly_keys(p, X, q, GS * sympy.Rational(p * (p - 1) + q * (q - 1), 2)))
    # local loss
    terms.append(_zpoly_keys(p, (Z - 1) ** r * (Z + NSYM / 2) - Z ** (r + 1), q, GL))
    terms.append(_zpoly_keys(p, X, q, -GL * (p + q + NSYM) / 2))

    out: dict[MomentKey, sympy.Expr] = {}
    for t in terms:
        for k, c in t.items():
            out[k] = out.get(k, 0) + c
    return {k: s for k, c in out.items() if (s := sympy.expand(c)) != 0}


def key_to_polynomial(key: MomentKey) -> sympy.Expr:
    """Write a p = q key as a polynomial in Jz and J^2."""
    p, r, q = key
    if p != q:
        raise ValueError(f"{key} has p != q and is not a function of Jz and J^2")
    expr = (Z - p) ** r
    for k in range(p):
        expr *= C - (Z - k) * (Z - k - 1)
    return sympy.expand(expr)


def polynomial_to_keys(poly: sympy.Expr) -> dict[MomentKey, sympy.Expr]:
    """Inverse of :func:`key_to_polynomial` on polynomials in Jz and J^2."""
    rest = sympy.Poly(sympy.expand(poly), Z, C)
    out: dict[MomentKey, sympy.Expr] = {}
    while not rest.is_zero:
        # leading term in (C-degree, Z-degree) order
        (a, b), c = max(rest.terms(), key=lambda t: (t[0][1], t[0][0]))
        key = MomentKey(b, a, b)
        out[key] = out.get(key, 0) + c
        rest = rest - sympy.Poly(c * key_to_polynomial(key), Z, C)
    return out


def monomial_equation(mono: Monomial) -> sympy.Expr:
    """Unclosed d<Jz^a (J^2)^b>/dt as a polynomial in Jz, J^2 (read as expectation values of monomials)."""
    total = 0
    for key, c in polynomial_to_keys(mono.expr()).items():
        for k2, c2 in key_equation(key).items():
            total += c * c2 * key_to_polynomial(k2)
    return sympy.expand(total)


# ---------------------------------------------------------------------------
# closure and generated systems


class ClosureError(ValueError):
    """The closure rule could not express a moment through tracked ones."""


ClosureRule = Callable[[Monomial, frozenset], "sympy.Expr | None"]


def tracked_monomials(K: int) -> list[Monomial]:
    """Jz^a (J^2)^b with a + 2b <= K, plus J^2; ordered by weight, J^2 first among ties."""
    if K < 1:
        raise ValueError("order must be >= 1")
    monos = {Monomial(a, b) for b in range(K // 2 + 1) for a in range(K - 2 * b + 1)}
    monos.discard(Monomial(0, 0))
    monos.add(Monomial(0, 1))
    return sorted(monos, key=lambda m: (m.weight, -m.b, m.a))


def peel_closure(mono: Monomial, tracked: frozenset) -> sympy.Expr | None:
    """Split one Jz (else one J^2) off an untracked monomial, recursively.

    At order 2 this gives <Jz^3> ~ <Jz><Jz^2> and <Jz J^2> ~ <Jz><J^2>; at
    order 1, <Jz^2> ~ <Jz>^2. Beyond order 2 the rule is experimental.
    """
    if mono == Monomial(0, 0):
        return sympy.Integer(1)
    if mono in tracked:
        return mono.symbol()
    if mono.a >= 1:
        head, rest = Monomial(1, 0), Monomial(mono.a - 1, mono.b)
    else:
        head, rest = Monomial(0, 1), Monomial(mono.a, mono.b - 1)
    if head not in tracked:
        return None
    tail = peel_closure(rest, tracked)
    return None if tail is None else head.symbol() * tail


CLOSURES: dict[str, ClosureRule] = {"peel": peel_closure}


def _close(poly: sympy.Expr, tracked: frozenset, rule: ClosureRule) -> sympy.Expr:
    P = sympy.Poly(poly, Z, C)
    out = 0
    for (a, b), c in P.terms():
        mono = Monomial(a, b)
        repl = rule(mono, tracked)
        if repl is None:
            raise ClosureError(f"closure cannot reduce <{mono.expr()}> with tracked set {sorted(tracked)}")
        out += c * repl
    return sympy.expand(out)


@dataclass
class SymbolicSystem:
    """Closed moment equations at truncation order ``order``.

    ``equations[mono]`` is the closed right-hand side in the symbols of the
    tracked monomials; ``unclosed[mono]`` the exact right-hand side as a
    polynomial in Jz, J^2 whose monomials stand for their expectation values.
    """

    order: int
    closure: str
    tracked: list[Monomial]
    equations: dict[Monomial, sympy.Expr]
    unclosed: dict[Monomial, sympy.Expr]
    tracked_rule: str = "Jz^a (J^2)^b with a + 2b <= K, plus J^2"
    _numeric: Callable | None = field(default=None, repr=False)

    def to_text(self) -> str:
        """One closed equation per line, tracked monomials in canonical order."""
        lines = [f"# order={self.order} closure={self.closure} tracked: {self.tracked_rule}"]
        for mono in self.tracked:
            lines.append(f"d<{mono.name}>/dt = {sympy.sstr(sympy.collect(self.equations[mono], [GS, GL, GD]))}")
        return "\n".join(lines) + "\n"

    def numeric(self) -> Callable:
        """Callable ``f(y, N, gS, gL, gD) -> dy`` with y in tracked order."""
        if self._numeric is None:
            syms = [m.symbol() for m in self.tracked]
            exprs = [self.equations[m] for m in self.tracked]
            self._numeric = sympy.lambdify((syms, NSYM, GS, GL, GD), exprs, "numpy")
        return self._numeric

    def evaluate_unclosed(self, moments: Callable[[Monomial], float], rates: RateSet, N) -> dict[Monomial, float]:
        """Exact right-hand sides given every needed monomial expectation value."""
        subs = {NSYM: N, GS: rates.gamma_S, GL: rates.gamma_L, GD: rates.gamma_D, W0: rates.omega_0}
        out = {}
        for mono, poly in self.unclosed.items():
            P = sympy.Poly(poly.subs(subs), Z, C)
            out[mono] = float(sum(float(c) * moments(Monomial(a, b)) for (a, b), c in P.terms()))
        return out


def generate_system(K: int, closure: str | ClosureRule = "peel") -> SymbolicSystem:
    """Expand the general moment equation for every tracked monomial and close it at order K."""
    tracked = tracked_monomials(K)
    tset = frozenset(tracked)
    rule = CLOSURES[closure] if isinstance(closure, str) else closure
    name = closure if isinstance(closure, str) else getattr(closure, "__name__", "custom")
    unclosed = {m: monomial_equation(m) for m in tracked}
    equations = {m: _close(unclosed[m], tset, rule) for m in tracked}
    return SymbolicSystem(K, name, tracked, equations, unclosed)


# ---------------------------------------------------------------------------
# states and integration


@dataclass
class MomentState:
    """Tracked expectation values; ``J2`` is the total spin <J^2>."""

    values: dict[str, float]
    N: int
    time: float = 0.0

    @classmethod
    def from_dicke(cls, N: int, j, m, order: int | SymbolicSystem = 2) -> "MomentState":
        """Moments of a Dicke state, which are exact products: <Jz^a (J^2)^b> = m^a (j(j+1))^b."""
        j, m = float(j), float(m)
        jj = j * (j + 1)
        monos = order.tracked if isinstance(order, SymbolicSystem) else tracked_monomials(order)
        return cls({mono.name: m**mono.a * jj**mono.b for mono in monos}, N)

    @property
    def JpJm(self) -> float:
        jz = self.values["Jz"]
        jz2 = self.values.get("Jz2", jz * jz)
        return self.values["J2"] - jz2 + jz


class BoundViolation(SolverError):
    """Closed moments left the physical region (closure breakdown)."""


class _BudgetExceeded(Exception):
    pass


ABORT_TOL = 1e-4
WARN_TOL = 1e-6


def integrate(
    system: int | SymbolicSystem,
    y0: MomentState,
    rates: RateSet,
    t_grid,
    rtol: float = 1e-9,
    method: str = "DOP853",
    dense: bool = False,
    max_explicit_evals: int = 200_000,
) -> TimeSeries:
    """Integrate a closed moment system.

    ``system`` is 1 or 2 for the hand-coded closures, or a generated
    :class:`SymbolicSystem`. Output columns are raw ``Jz, J2, JpJm, Jz2``
    (for order 1, ``Jz2`` is the closed value ``Jz^2``); use
    :meth:`TimeSeries.normalized` for plotting units. The run aborts with
    :class:`BoundViolation` if ``|Jz|/(N/2)`` or ``J2/((N/2)(N/2+1))`` leave
    [-1, 1] or [0, 1] by more than 1e-4.
    """
    if not 1e-12 <= rtol <= 1e-3:
        raise ValueError("rtol must lie in [1e-12, 1e-3]")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("t_grid must be a non-empty 1-d array")
    N = y0.N
    half = N / 2
    jmax2 = half * (half + 1)
    gS, gL, gD = rates.gamma_S, rates.gamma_L, rates.gamma_D

    if system == 1:
        names = ["Jz", "J2"]
        label = "cumulant1"

        def rhs(t, y):
            return _first_order(y[0], y[1], gS, gL, gD, N)
    elif system == 2:
        names = ["Jz", "J2", "Jz2"]
        label = "cumulant2"

        def rhs(t, y):
            return _second_order(y[0], y[1], y[2], gS, gL, gD, N)
    elif isinstance(system, SymbolicSystem):
        names = [m.name for m in system.tracked]
        label = f"generated(K={system.order},{system.closure})"
        f = system.numeric()

        def rhs(t, y):
            return f(list(y), N, gS, gL, gD)
    else:
        raise ValueError(f"unknown moment system {system!r}")

    y_init = np.array([y0.values[n] for n in names], dtype=float)
    scale = np.array([_scale(n, half, jmax2) for n in names])
    atol = 1e-12 * scale
    iz, ij = names.index("Jz"), names.index("J2")

    def ev_jz_hi(t, y):
        return 1 + ABORT_TOL - y[iz] / half

    def ev_jz_lo(t, y):
        return 1 + ABORT_TOL + y[iz] / half

    def ev_j2_hi(t, y):
        return 1 + ABORT_TOL - y[ij] / jmax2

    def ev_j2_lo(t, y):
        return ABORT_TOL + y[ij] / jmax2

    events = [ev_jz_hi, ev_jz_lo, ev_j2_hi, ev_j2_lo]
    for e in events:
        e.terminal = True
        e.direction = -1

    used = method
    counter = [0]

    def counted(t, y):
        counter[0] += 1
        if counter[0] > max_explicit_evals:
            raise _BudgetExceeded
        return rhs(t, y)

    span = (y0.time, float(t_grid[-1]))
    if t_grid.size == 1:
        Y = y_init[None, :]
        sol = None
    else:
        # rejected trial steps of stiff large-N runs may overflow; the step control discards them
        with np.errstate(over="ignore", invalid="ignore"):
            try:
                sol = solve_ivp(counted, span, y_init, method=method, t_eval=t_grid, rtol=rtol, atol=atol,
                                events=events, dense_output=dense)
            except _BudgetExceeded:
                used = "LSODA"
                sol = solve_ivp(rhs, span, y_init, method="LSODA", t_eval=t_grid, rtol=rtol, atol=atol,
                                events=events, dense_output=dense)
        if sol.status == 1:
            which = next(i for i, te in enumerate(sol.t_events) if len(te))
            what = ["Jz above N/2", "Jz below -N/2", "J2 above its maximum", "J2 negative"][which]
            raise BoundViolation(f"closure breakdown at t={sol.t_events[which][0]:.6g}: {what}")
        if not sol.success:
            raise SolverError(f"moment integration failed: {sol.message}")
        Y = sol.y.T

    cols = {n: Y[:, k] for k, n in enumerate(names)}
    out = {"Jz": cols["Jz"], "J2": cols["J2"]}
    jz2 = cols["Jz2"] if "Jz2" in cols else cols["Jz"] ** 2
    out["JpJm"] = out["J2"] - jz2 + out["Jz"]
    out["Jz2"] = jz2
    nz = out["Jz"] / half
    nj = out["J2"] / jmax2
    excess = max(float(np.max(np.abs(nz))) - 1, float(np.max(nj)) - 1, -float(np.min(nj)), 0.0)
    meta = {
        "solver": label,
        "N": N,
        "rates": rates.as_dict(),
        "rtol": rtol,
        "method": used,
        "nfev": 0 if sol is None else int(sol.nfev),
        "tracked": names,
        "max_bound_excess": excess,
        "bound_warning": excess > WARN_TOL,
        "normalization": "raw",
    }
    extras = {"tracked": {n: cols[n] for n in names}}
    if dense and sol is not None:
        extras["dense"] = sol.sol
        extras["dense_index"] = {n: k for k, n in enumerate(names)}
    return TimeSeries(t_grid, out, meta, extras)


def _scale(name: str, half: float, jmax2: float) -> float:
    mono = _parse_name(name)
    return max(half ** (mono.a) * jmax2 ** (mono.b), 1.0)


def _parse_name(name: str) -> Monomial:
    a = b = 0
    for part in name.split("_"):
        if part.startswith("Jz"):
            a = int(part[2:] or 1)
        elif part.startswith("J2"):
            b = int(part[3:]) if part.startswith("J2^") else 1
    return Monomial(a, b)
