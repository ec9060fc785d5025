"""Bright/dark bosonic description of the weakly excited corner of the triangle.

Near the ground state the excitations behave as one bright mode, coupled
to light with a collectively enhanced dipole, and an aggregate of N-1 dark
modes. Dephasing scatters bright into dark, every channel empties the
bright mode, and only loss empties the dark ones:

    dn_b/dt = -(N gS + gD + gL) n_b
    dn_d/dt = -gL n_d + gD n_b
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .dicke import DickeIndex, HalfInt, RateSet
from .piqs import evolve_populations, initial_dicke_state
from .timeseries import SolverError, TimeSeries

__all__ = [
    "BrightDarkState",
    "DILUTE_THRESHOLD",
    "map_exact",
    "map_leading",
    "bright_decay_rate",
    "closed_form",
    "evolve_bright_dark",
    "ValidationReport",
    "validate_against_full",
    "invert_j",
    "fit_decay_rate",
]

DILUTE_THRESHOLD = 0.1


@dataclass(frozen=True)
class BrightDarkState:
    n_b: float
    n_d: float
    N: int
    time: float = 0.0

    def __post_init__(self):
        if self.n_b < 0 or self.n_d < 0:
            raise ValueError("bright and dark populations must be non-negative")

    @property
    def excitations(self) -> float:
        return self.n_b + self.n_d

    def is_dilute(self, threshold: float = DILUTE_THRESHOLD) -> bool:
        return self.excitations / self.N < threshold


def map_exact(j, m, N) -> tuple[float, float]:
    """(n_b, n_d) of |j, m>: n_b = [j(j+1) - m^2 + m] / N, n_d = m + N/2 - n_b."""
    j, m = float(j), float(m)
    nb = (j * (j + 1) - m * m + m) / N
    return nb, m - nb + N / 2


def map_leading(j, m, N) -> tuple[float, float]:
    """Dominant-order mapping (j + m, N/2 - j)."""
    j, m = float(j), float(m)
    return j + m, N / 2 - j


def bright_decay_rate(rates: RateSet, N) -> float:
    return N * rates.gamma_S + rates.gamma_D + rates.gamma_L


def closed_form(state0: BrightDarkState, rates: RateSet, t) -> tuple[np.ndarray, np.ndarray]:
    """Analytic n_b(t), n_d(t) of the bright/dark rate equations."""
    t = np.asarray(t, dtype=float) - state0.time
    gb = bright_decay_rate(rates, state0.N)
    gl = rates.gamma_L
    nb = state0.n_b * np.exp(-gb * t)
    diff = gb - gl
    if abs(diff) <= 1e-12 * max(gb, 1.0):
        fed = state0.n_b * rates.gamma_D * t
    else:
        # (1 - exp(-diff t)) / diff, written with expm1 for small diff t
        fed = state0.n_b * rates.gamma_D * (-np.expm1(-diff * t)) / diff
    nd = np.exp(-gl * t) * (state0.n_d + fed)
    return nb, nd


def evolve_bright_dark(
    state0: BrightDarkState,
    rates: RateSet,
    t_grid,
    rtol: float = 1e-11,
    atol: float = 1e-14,
) -> TimeSeries:
    """Integrate the linear rate equations; the analytic solution is stored next to it.

    Columns ``nb, nd`` come from the numerical integration; ``extras`` holds
    the closed form and ``meta['max_closed_form_deviation']`` their largest
    difference.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    N = state0.N
    gb = bright_decay_rate(rates, N)
    gl, gd = rates.gamma_L, rates.gamma_D
    A = np.array([[-gb, 0.0], [gd, -gl]])
    y0 = np.array([state0.n_b, state0.n_d])
    if t_grid.size > 1:
        sol = solve_ivp(lambda t, y: A @ y, (state0.time, t_grid[-1]), y0, method="DOP853",
                        t_eval=t_grid, rtol=rtol, atol=atol)
        if not sol.success:
            raise SolverError(f"bright/dark integration failed: {sol.message}")
        Y = sol.y
    else:
        Y = y0[:, None]
    nb_cf, nd_cf = closed_form(state0, rates, t_grid)
    dev = float(max(np.max(np.abs(Y[0] - nb_cf)), np.max(np.abs(Y[1] - nd_cf))))
    meta = {
        "solver": "bosonic",
        "N": N,
        "rates": rates.as_dict(),
        "bright_decay_rate": gb,
        "dilute": state0.is_dilute(),
        "max_closed_form_deviation": dev,
        "normalization": "raw",
    }
    return TimeSeries(t_grid, {"nb": Y[0], "nd": Y[1]}, meta, {"nb_closed": nb_cf, "nd_closed": nd_cf})


def invert_j(j2) -> np.ndarray:
    """Non-negative root of j(j+1) = <J^2>; negative inputs are clamped to 0."""
    j2 = np.maximum(np.asarray(j2, dtype=float), 0.0)
    return (-1 + np.sqrt(1 + 4 * j2)) / 2


def fit_decay_rate(t, y, efolds: float = 3.0) -> float:
    """Least-squares exponential rate of ``y`` over its first ``efolds`` e-foldings.

    The window stops where ``y`` first drops below ``y[0] exp(-efolds)``, so
    slow feeding terms that only matter in the far tail do not bias the fit.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if y[0] <= 0:
        raise ValueError("series must start positive")
    below = np.nonzero(y < y[0] * math.exp(-efolds))[0]
    stop = below[0] if below.size else y.size
    if stop < 3:
        raise ValueError("too few samples inside the fit window; refine the time grid")
    slope = np.polyfit(t[:stop], np.log(y[:stop]), 1)[0]
    return float(-slope)


@dataclass
class ValidationReport:
    N: int
    k: int
    rates: RateSet
    t: np.ndarray
    full: dict[str, np.ndarray]
    reduced: dict[str, np.ndarray]
    max_deviation: dict[str, float]
    relative_deviation: dict[str, float]

    def to_json(self) -> dict:
        return {
            "parameters": {"N": self.N, "k": self.k, **self.rates.as_dict()},
            "max_deviation": self.max_deviation,
            "relative_deviation": self.relative_deviation,
            "series": {
                "t": "t",
                "full": sorted(self.full),
                "reduced": sorted(self.reduced),
            },
        }


def validate_against_full(N: int, k: int, rates: RateSet, t_grid, max_fraction: float = 0.05) -> ValidationReport:
    """Compare the bright/dark equations with the full population dynamics.

    The full run starts from the symmetric k-excitation state |N/2, -N/2 + k>.
    Its (<J^2>, <Jz>) trajectory is turned into (j(t), m(t)) and mapped with
    :func:`map_exact`; the populations' own expectation values
    ``<J+J->/N`` and ``<Jz> + N/2 - <J+J->/N`` are reported as ``nb_mean``
    and ``nd_mean``. Relative deviations are max |full - reduced| divided by
    max |reduced|.
    """
    if k < 1:
        raise ValueError("need at least one excitation")
    if k / N > max_fraction:
        raise ValueError(f"k/N = {k / N:.3g} is outside the dilute regime (limit {max_fraction})")
    t_grid = np.asarray(t_grid, dtype=float)
    start = DickeIndex(HalfInt(N), HalfInt(-N + 2 * k))
    full = evolve_populations(initial_dicke_state(N, start.j, start.m), rates, t_grid, rtol=1e-10, atol=1e-14)
    jt = invert_j(full["J2"])
    mt = full["Jz"]
    nb_traj = (jt * (jt + 1) - mt * mt + mt) / N
    nd_traj = mt - nb_traj + N / 2
    nb_mean = full["JpJm"] / N
    nd_mean = full["Jz"] + N / 2 - nb_mean

    nb0, nd0 = map_exact(start.j, start.m, N)
    red = evolve_bright_dark(BrightDarkState(nb0, max(nd0, 0.0), N), rates, t_grid)
    reduced = {"nb": red["nb"], "nd": red["nd"]}
    fulls = {"nb": nb_traj, "nd": nd_traj, "nb_mean": nb_mean, "nd_mean": nd_mean}
    max_dev, rel_dev = {}, {}
    for name, series in fulls.items():
        ref = reduced[name.split("_")[0]]
        diff = float(np.max(np.abs(series - ref)))
        max_dev[name] = diff
        scale = float(np.max(np.abs(ref)))
        rel_dev[name] = diff / scale if scale > 0 else (0.0 if diff == 0 else math.inf)
    return ValidationReport(N, k, rates, t_grid, fulls, reduced, max_dev, rel_dev)
