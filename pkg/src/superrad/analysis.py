"""Post-processing of runs: delay times, phase-diagram sweeps, trajectories and triangle maps."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable

import numpy as np
import sympy
from scipy.optimize import brentq

from .config import RunConfig, run
from .dicke import (
    NO_BOUNDARY,
    DickeIndex,
    HalfInt,
    RateSet,
    boundary_j,
    delay_time_pure,
    derivative_coefficients,
    dephasing_threshold,
    incoherent_time,
)
from .timeseries import SolverError, TimeSeries

__all__ = [
    "NOT_REACHED",
    "effective_delay_time",
    "SweepRow",
    "sweep_phase_diagram",
    "sweep_to_csv",
    "trajectory_jm",
    "EmissionField",
    "emission_field",
    "BoundaryCurve",
    "boundary_curves",
    "Table1Entry",
    "table1_report",
    "format_table1",
]

NOT_REACHED = None
"""Returned by :func:`effective_delay_time` when <Jz> never changes sign."""


# ---------------------------------------------------------------------------
# delay time


def effective_delay_time(series: TimeSeries, jz_at: Callable[[float], float] | None = None):
    """First time at which <Jz> reaches zero (half filling).

    The first sign change on the sample grid is located and linearly
    interpolated. If ``jz_at`` is given (an interpolant or a tighter re-solve
    returning <Jz>(t)), the crossing is instead bracketed by the two samples
    and polished with Brent's method. When the series carries a dense
    interpolant from :func:`superrad.moments.integrate` it is used
    automatically.

    Returns
    -------
    float or None
        ``t_d^eff``, or :data:`NOT_REACHED` if <Jz> stays positive.
    """
    jz = series["Jz"]
    t = series.t
    if jz.size == 0 or jz[0] <= 0:
        raise ValueError("<Jz> must start positive")
    below = np.nonzero(jz <= 0)[0]
    if below.size == 0:
        return NOT_REACHED
    i = below[0]
    t_lo, t_hi = t[i - 1], t[i]
    if jz_at is None and "dense" in series.extras:
        sol, k = series.extras["dense"], series.extras["dense_index"]["Jz"]

        def jz_at(x):
            return float(sol(x)[k])

    if jz_at is not None and jz[i] < 0:
        return float(brentq(jz_at, t_lo, t_hi, xtol=1e-14 * max(t_hi, 1.0), rtol=1e-12))
    return float(t_lo + (t_hi - t_lo) * jz[i - 1] / (jz[i - 1] - jz[i]))


# ---------------------------------------------------------------------------
# phase diagram


@dataclass
class SweepRow:
    N: int
    gamma_D: float
    coherence_ratio: float
    t_d_eff: float | None
    t_d: float
    t0: float
    t_max: float
    error: str | None = None

    def as_list(self) -> list:
        return [self.N, self.gamma_D, self.coherence_ratio, self.t_d_eff, self.t_d, self.t0, self.t_max,
                self.error or ""]


SWEEP_COLUMNS = ("N", "gamma_D", "N_gS_over_gD", "t_d_eff", "t_d", "t0", "t_max", "error")


def _default_t_max(N: int, rates: RateSet) -> float:
    # comfortably past both the collective and the incoherent crossing
    return 4.0 * max(delay_time_pure(N, rates.gamma_S), incoherent_time(rates))


def _sweep_point(args) -> SweepRow:
    N, gD, base, solver, samples, rtol, t_max, extensions = args
    rates = replace(base, gamma_D=gD)
    t_d = delay_time_pure(N, rates.gamma_S)
    t0 = incoherent_time(rates)
    ratio = N * rates.gamma_S / gD if gD > 0 else math.inf
    t_max = t_max or _default_t_max(N, rates)
    try:
        for _ in range(extensions + 1):
            cfg = RunConfig(solver=solver, N=N, rates=rates, initial=DickeIndex(HalfInt(N), HalfInt(N)),
                            t_max=t_max, samples=samples, rtol=rtol)
            series = run(cfg, dense=True)
            tde = effective_delay_time(series)
            if tde is not NOT_REACHED:
                return SweepRow(N, gD, ratio, tde, t_d, t0, t_max)
            t_max *= 2
        return SweepRow(N, gD, ratio, None, t_d, t0, t_max, "not reached")
    except (SolverError, ValueError) as exc:
        return SweepRow(N, gD, ratio, None, t_d, t0, t_max, f"{type(exc).__name__}: {exc}")


def sweep_phase_diagram(
    N_grid,
    gammaD_grid,
    rates: RateSet,
    solver: str = "cumulant2",
    relative: bool = False,
    jobs: int = 1,
    samples: int = 2001,
    rtol: float = 1e-9,
    t_max: float | None = None,
    extensions: int = 3,
) -> list[SweepRow]:
    """t_d^eff over an (N, gamma_D) grid, every point started fully excited.

    With ``relative=True`` the dephasing grid is read in units of the
    threshold gamma_S N / sqrt(ln N) of each N. Points whose <Jz> has not
    crossed zero by ``t_max`` are re-run with the window doubled, up to
    ``extensions`` times. Failures are reported in the row's ``error`` field
    and do not stop the sweep. Rows come back in grid order (N outer) no
    matter how many worker processes run them.
    """
    N_grid = [int(n) for n in N_grid]
    gammaD_grid = [float(g) for g in gammaD_grid]
    if not N_grid or not gammaD_grid:
        raise ValueError("sweep grids must be non-empty")
    tasks = []
    for N in N_grid:
        scale = dephasing_threshold(N, rates.gamma_S) if relative else 1.0
        for g in gammaD_grid:
            tasks.append((N, g * scale, rates, solver, samples, rtol, t_max, extensions))
    if jobs <= 1 or len(tasks) == 1:
        return [_sweep_point(a) for a in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_point, tasks))


def sweep_to_csv(rows: list[SweepRow], path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow(["" if v is None else (format(v, ".17g") if isinstance(v, float) else v)
                        for v in r.as_list()])


# ---------------------------------------------------------------------------
# trajectories and maps over the triangle


def trajectory_jm(series: TimeSeries) -> TimeSeries:
    """(j(t), m(t)) with m = <Jz> and j the non-negative root of j(j+1) = <J^2>."""
    j2 = series["J2"]
    if np.any(j2 < 0):
        warnings.warn(f"<J^2> dipped to {j2.min():.3g}; clamped to 0", RuntimeWarning, stacklevel=2)
        j2 = np.maximum(j2, 0.0)
    j = (-1 + np.sqrt(1 + 4 * j2)) / 2
    meta = dict(series.meta)
    meta["derived"] = "trajectory_jm"
    return TimeSeries(series.t, {"j": j, "m": series["Jz"].copy()}, meta)


@dataclass
class EmissionField:
    """gamma_S (j^2 + j - m^2 + m) / (N^2 gamma_S) on a regular (j, m) grid; NaN outside |m| <= j."""

    N: int
    j: np.ndarray
    m: np.ndarray
    value: np.ndarray

    def rows(self):
        for a, jv in enumerate(self.j):
            for b, mv in enumerate(self.m):
                if not np.isnan(self.value[a, b]):
                    yield float(jv), float(mv), float(self.value[a, b])


def emission_field(N: int, gamma_S: float = 1.0, resolution: int = 101) -> EmissionField:
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if gamma_S <= 0:
        raise ValueError("gamma_S must be positive")
    half = N / 2
    j = np.linspace(0.0, half, resolution)
    m = np.linspace(-half, half, 2 * resolution - 1)
    J, M = np.meshgrid(j, m, indexing="ij")
    val = gamma_S * (J * J + J - M * M + M) / (N * N * gamma_S)
    val[np.abs(M) > J + 1e-12 * half] = np.nan
    return EmissionField(N, j, m, val)


@dataclass
class BoundaryCurve:
    """dj/dt = 0 locus j(m); ``inside`` is False where the root is absent or falls outside |m| <= j <= N/2."""

    label: str
    rates: RateSet
    m: np.ndarray
    j: np.ndarray
    inside: np.ndarray


def boundary_curves(N: int, ratios, samples: int | None = None) -> list[BoundaryCurve]:
    """Tabulate the j-drift boundary for each gamma_L / gamma_D ratio.

    ``ratios`` may contain positive numbers or the strings ``"dephasing"``
    (gamma_L = 0) and ``"loss"`` (gamma_D = 0). The m grid defaults to the
    N + 1 allowed values of m.
    """
    m = np.linspace(-N / 2, N / 2, samples or N + 1)
    curves = []
    for r in ratios:
        if r == "dephasing":
            rates, label = RateSet(0.0, 0.0, 1.0), "dephasing"
        elif r == "loss":
            rates, label = RateSet(0.0, 1.0, 0.0), "loss"
        else:
            r = float(r)
            if r <= 0:
                raise ValueError("ratios must be positive or 'dephasing' / 'loss'")
            rates, label = RateSet(0.0, r, 1.0), f"{r:g}"
        j = np.full(m.shape, np.nan)
        for k, mv in enumerate(m):
            b = boundary_j(mv, rates, N)
            if b is not NO_BOUNDARY:
                j[k] = b
        inside = ~np.isnan(j) & (j >= np.abs(m) - 1e-12) & (j <= N / 2 + 1e-12)
        curves.append(BoundaryCurve(label, rates, m, j, inside))
    return curves


# ---------------------------------------------------------------------------
# characteristic points of the triangle

_NS = sympy.Symbol("N", positive=True)

# (symbol, j(N), m(N), leading dm/dt per channel, leading dj/dt per channel), rates per unit gamma
_TABLE1 = [
    ("circle", "|N/2, N/2>", (_NS / 2, _NS / 2),
     {"S": -_NS, "L": -_NS}, {"D": 0, "L": -_NS}),
    ("square_filled", "|N/4, N/4>", (_NS / 4, _NS / 4),
     {"S": -_NS / 2, "L": -3 * _NS / 4}, {"D": sympy.Rational(1, 2), "L": -3 * _NS / 4}),
    ("odot", "|N/2, 0>", (_NS / 2, 0),
     {"S": -_NS**2 / 4, "L": -_NS / 2}, {"D": -_NS / 4, "L": -_NS / 4}),
    ("star", "|0, 0>", (0, 0),
     {"S": 0, "L": -_NS / 2}, {"D": _NS / 2, "L": _NS}),
    ("square", "|N/4, -N/4>", (_NS / 4, -_NS / 4),
     {"S": 0, "L": -_NS / 4}, {"D": sympy.Rational(1, 2), "L": _NS / 4}),
]


@dataclass
class Table1Entry:
    """One cell of the characteristic-point table, resolved by channel.

    ``exact`` / ``leading`` map channel -> coefficient at the evaluated N
    (Fractions); ``symbolic`` holds the exact coefficient as a function of N.
    ``rel_error`` is the largest per-channel relative deviation of the exact
    value from the leading-order form.
    """

    symbol: str
    state: str
    quantity: str
    N: int
    exact: dict[str, Fraction]
    leading: dict[str, Fraction]
    symbolic: dict[str, sympy.Expr]
    leading_symbolic: dict[str, sympy.Expr]
    rel_error: float
    identical: bool = field(default=False)

    def passes(self, tol: float) -> bool:
        return self.rel_error <= tol


def _frac(expr, N: int) -> Fraction:
    v = sympy.nsimplify(sympy.sympify(expr).subs(_NS, N))
    return Fraction(int(v.p), int(v.q))


def table1_report(N: int = 400) -> list[Table1Entry]:
    """Exact drifts at the five characteristic states next to their leading-order forms."""
    if N % 4:
        raise ValueError("the characteristic states need N divisible by 4")
    entries = []
    for sym, label, (js, ms), lead_m, lead_j in _TABLE1:
        cS, cLm, cD, cLj = (sympy.simplify(c) for c in derivative_coefficients(js, ms, _NS))
        exact_sym = {"dm/dt": {"S": cS, "L": cLm}, "dj/dt": {"D": cD, "L": cLj}}
        for quantity, lead in (("dm/dt", lead_m), ("dj/dt", lead_j)):
            ex_s = exact_sym[quantity]
            lead_s = {k: sympy.sympify(v) for k, v in lead.items()}
            j_num = HalfInt.of(_frac(js, N))
            m_num = HalfInt.of(_frac(ms, N))
            num = derivative_coefficients(j_num, m_num, N)
            ex = dict(zip(("S", "L"), num[:2])) if quantity == "dm/dt" else dict(zip(("D", "L"), num[2:]))
            ld = {k: _frac(v, N) for k, v in lead_s.items()}
            errs = []
            for ch in ex:
                if ld[ch] == 0:
                    errs.append(0.0 if ex[ch] == 0 else math.inf)
                else:
                    errs.append(float(abs(ex[ch] - ld[ch]) / abs(ld[ch])))
            identical = all(sympy.simplify(ex_s[c] - lead_s[c]) == 0 for c in ex_s)
            entries.append(Table1Entry(sym, label, quantity, N, ex, ld, ex_s, lead_s, max(errs), identical))
    return entries


def format_table1(entries: list[Table1Entry], tol: float | None = None) -> str:
    lines = []
    for e in entries:
        tol_e = 2 / e.N if tol is None else tol
        lead = " + ".join(f"g{c}*({sympy.sstr(v)})" for c, v in e.leading_symbolic.items() if v != 0) or "0"
        exact = " + ".join(f"g{c}*({sympy.sstr(sympy.factor(v))})" for c, v in e.symbolic.items() if v != 0) or "0"
        at_n = ", ".join(f"g{c}: {float(v):.6g}" for c, v in e.exact.items())
        tag = "exact" if e.identical else f"rel.err {e.rel_error:.3g}"
        verdict = "ok" if (e.identical or e.passes(tol_e)) else "MISMATCH"
        lines.append(f"{e.symbol:14s} {e.state:12s} {e.quantity}  leading: {lead}")
        lines.append(f"{'':27s} exact:   {exact}")
        lines.append(f"{'':27s} N={e.N}: {at_n}  [{tag}; {verdict} at tol {tol_e:.3g}]")
    return "\n".join(lines)
