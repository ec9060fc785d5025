"""Population dynamics over the Dicke triangle.

For initial states diagonal in the Dicke basis (and uniform over alpha) the
master equation closes on the populations p(j, m), giving a linear rate
equation ``dp/dt = A p`` with O(N^2) unknowns. ``A`` is assembled from the
closed-form channel rates in :func:`channel_rate_closed_form`; see
``docs/rates.md`` for their derivation and the checks that pin them down.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .dicke import DickeIndex, HalfInt, RateSet, enumerate_dicke_space
from .timeseries import SolverError, TimeSeries

__all__ = [
    "CHANNELS",
    "PopulationVector",
    "RateMatrix",
    "channel_rate_closed_form",
    "transition_rates",
    "build_rate_matrix",
    "initial_dicke_state",
    "evolve_populations",
    "population_observables",
    "load_triplets",
    "expand_populations",
    "totally_excited",
    "dicke_count",
]

CHANNELS = ("S", "L", "D")


def _local_rates(N, j, m):
    """Per-unit-rate local transfer coefficients for arrays j, m.

    Returns dicts keyed by dj in (+1, 0, -1) for the loss channel (m -> m-1)
    and the dephasing channel (m -> m). Entries whose formula divides by j
    vanish at j = 0 and are set to zero there.
    """
    j = np.asarray(j, dtype=float)
    m = np.asarray(m, dtype=float)
    nz = j > 0
    js = np.where(nz, j, 1.0)
    up = (N / 2 - j) / (2 * (j + 1) * (2 * j + 1))
    loss = {
        +1: up * (j - m + 1) * (j - m + 2),
        0: np.where(nz, (N + 2) * (j + m) * (j - m + 1) / (4 * js * (js + 1)), 0.0),
        -1: np.where(nz, (j + m) * (j + m - 1) * (N + 2 * j + 2) / (4 * js * (2 * js + 1)), 0.0),
    }
    deph = {
        +1: up * (j - m + 1) * (j + m + 1),
        0: np.where(nz, m * m * (N + 2) / (4 * js * (js + 1)), 0.0),
        -1: np.where(nz, (j - m) * (j + m) * (N + 2 * j + 2) / (4 * js * (2 * js + 1)), 0.0),
    }
    return loss, deph


def channel_rate_closed_form(N: int, j, m, channel: str, destination, gamma: float = 1.0) -> float:
    """Rate of population transfer from (j, m) to ``destination`` through one channel.

    ``destination`` is a :class:`DickeIndex` (or a (j', m') pair). Allowed
    moves: S to (j, m-1); L to (j + dj, m-1); D to (j + dj, m), dj in {-1, 0, 1}.
    """
    src = DickeIndex.of(j, m).validate(N)
    dest = destination if isinstance(destination, DickeIndex) else DickeIndex.of(*destination)
    dest.validate(N)
    dj2 = dest.j.doubled - src.j.doubled
    dm2 = dest.m.doubled - src.m.doubled
    jf, mf = float(src.j), float(src.m)
    if channel == "S":
        if dj2 != 0 or dm2 != -2:
            raise ValueError(f"channel S only connects (j, m) -> (j, m-1), got {src} -> {dest}")
        return gamma * (jf + mf) * (jf - mf + 1)
    if channel not in ("L", "D"):
        raise ValueError(f"channel must be one of {CHANNELS}, got {channel!r}")
    want_dm2 = -2 if channel == "L" else 0
    if dm2 != want_dm2 or dj2 not in (-2, 0, 2):
        raise ValueError(f"channel {channel} cannot connect {src} -> {dest}")
    loss, deph = _local_rates(N, jf, mf)
    table = loss if channel == "L" else deph
    return gamma * float(table[dj2 // 2])


def _index_arrays(N: int):
    states = enumerate_dicke_space(N)
    tj = np.array([s.j.doubled for s in states])
    tm = np.array([s.m.doubled for s in states])
    return states, tj, tm


def _offsets(N: int) -> dict[int, int]:
    off, pos = {}, 0
    for tj in range(N, -1, -2):
        off[tj] = pos
        pos += tj + 1
    return off


def transition_rates(N: int, rates: RateSet):
    """All nonzero off-diagonal transfers as arrays (channel, src, dest, rate).

    Indices refer to :func:`enumerate_dicke_space` order. Self-transitions of
    the dephasing channel are dropped since they do not move population.
    """
    states, tj, tm = _index_arrays(N)
    off = _offsets(N)
    j, m = tj / 2, tm / 2
    loss, deph = _local_rates(N, j, m)
    src = np.arange(len(states))

    def index_of(tj_new, tm_new):
        base = np.array([off.get(int(a), -1) for a in tj_new])
        return base + (tj_new - tm_new) // 2

    out = []

    def add(channel, gamma, mask, tj_new, tm_new, values):
        if gamma == 0:
            return
        mask = mask & (values > 0)
        if not np.any(mask):
            return
        dest = index_of(tj_new[mask], tm_new[mask])
        out.append((channel, src[mask], dest, gamma * values[mask]))

    valid = lambda a, b: (a >= 0) & (a <= N) & (np.abs(b) <= a)  # noqa: E731
    emit = (j + m) * (j - m + 1)
    add("S", rates.gamma_S, valid(tj, tm - 2), tj, tm - 2, emit)
    for dj in (+1, 0, -1):
        a = tj + 2 * dj
        add("L", rates.gamma_L, valid(a, tm - 2), a, tm - 2, loss[dj])
        if dj != 0:
            add("D", rates.gamma_D, valid(a, tm), a, tm, deph[dj])
    return out


@dataclass
class RateMatrix:
    """Generator of the population dynamics, split by channel (A = A_S + A_L + A_D)."""

    N: int
    states: list[DickeIndex]
    A: sp.csr_matrix
    parts: dict[str, sp.csr_matrix]
    rates: RateSet

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def column_sums(self) -> np.ndarray:
        return np.asarray(self.A.sum(axis=0)).ravel()

    def dump_triplets(self, path) -> Path:
        """Text dump, one ``row col value`` line per nonzero, preceded by a comment header."""
        path = Path(path)
        coo = self.A.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with path.open("w") as fh:
            fh.write(f"# N={self.N} dim={self.dim} nnz={coo.nnz}\n")
            fh.write("# states (index 2j 2m): " + " ".join(
                f"{i}:{s.j.doubled},{s.m.doubled}" for i, s in enumerate(self.states)) + "\n")
            for k in order:
                fh.write(f"{coo.row[k]} {coo.col[k]} {coo.data[k]:.17g}\n")
        return path


def load_triplets(path) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    dim = None
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("dim="):
                    dim = int(tok[4:])
            continue
        r, c, v = line.split()
        rows.append(int(r))
        cols.append(int(c))
        vals.append(float(v))
    return sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))


def build_rate_matrix(N: int, rates: RateSet, m_max=None) -> RateMatrix:
    """Assemble the sparse generator on the Dicke triangle.

    With ``m_max`` the matrix is restricted to states with m <= m_max. No
    channel raises m, so this block is closed and exact for initial states
    supported below m_max.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    states, tj, tm = _index_arrays(N)
    n = len(states)
    parts = {}
    triplets = transition_rates(N, rates)
    for ch in CHANNELS:
        rows, cols, vals = [np.zeros(0, int)], [np.zeros(0, int)], [np.zeros(0)]
        for c, s, d, v in triplets:
            if c != ch:
                continue
            rows += [d, s]
            cols += [s, s]
            vals += [v, -v]
        parts[ch] = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        )
    if m_max is not None:
        keep = np.nonzero(tm <= HalfInt.of(m_max).doubled)[0]
        states = [states[k] for k in keep]
        parts = {ch: M[keep][:, keep].tocsr() for ch, M in parts.items()}
    A = (parts["S"] + parts["L"] + parts["D"]).tocsr()
    return RateMatrix(N, states, A, parts, rates)


@dataclass
class PopulationVector:
    """Probabilities over the Dicke triangle, aggregated over alpha."""

    N: int
    p: np.ndarray
    states: list[DickeIndex]
    time: float = 0.0

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self.p.shape != (len(self.states),):
            raise ValueError("population vector and state list differ in length")

    def __getitem__(self, idx) -> float:
        idx = idx if isinstance(idx, DickeIndex) else DickeIndex.of(*idx)
        return float(self.p[self.states.index(idx)])

    @property
    def total(self) -> float:
        return float(self.p.sum())

    def as_dict(self) -> dict[DickeIndex, float]:
        return dict(zip(self.states, self.p.tolist()))


def initial_dicke_state(N: int, j, m) -> PopulationVector:
    """Unit population on (j, m); for D_j > 1 this is the uniform mixture over alpha."""
    target = DickeIndex.of(j, m).validate(N)
    states = enumerate_dicke_space(N)
    p = np.zeros(len(states))
    p[states.index(target)] = 1.0
    return PopulationVector(N, p, states)


def population_observables(states: list[DickeIndex], P: np.ndarray) -> dict[str, np.ndarray]:
    """Collective moments from populations; ``P`` has one row per time sample."""
    j = np.array([float(s.j) for s in states])
    m = np.array([float(s.m) for s in states])
    jj = j * (j + 1)
    return {
        "Jz": P @ m,
        "J2": P @ jj,
        "JpJm": P @ (jj - m * m + m),
        "Jz2": P @ (m * m),
    }


class _BudgetExceeded(Exception):
    pass


NORMALIZATION_LIMIT = 1e-6


def evolve_populations(
    p0: PopulationVector,
    rates: RateSet,
    t_grid,
    rtol: float = 1e-9,
    atol: float = 1e-14,
    method: str = "DOP853",
    max_explicit_evals: int = 400_000,
    restrict: bool = True,
) -> TimeSeries:
    """Integrate dp/dt = A p and sample populations and collective moments.

    The explicit embedded Runge-Kutta pair is tried first; if it needs more
    than ``max_explicit_evals`` right-hand-side evaluations (stiff rate
    ratios) the run is redone with the implicit Radau scheme and the fallback
    is recorded in ``meta['method']``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("t_grid must be a non-empty 1-d array")
    if t_grid.size > 1 and not np.all(np.diff(t_grid) > 0):
        raise ValueError("t_grid must be strictly increasing")
    if abs(p0.total - 1) > 1e-10:
        raise ValueError(f"initial populations sum to {p0.total}, expected 1")
    N = p0.N
    states = p0.states
    p = p0.p
    m_max = None
    if restrict:
        support = np.nonzero(p0.p)[0]
        m_max = max(states[k].m for k in support)
        R = build_rate_matrix(N, rates, m_max=m_max)
        pos = {s: i for i, s in enumerate(states)}
        keep = [pos[s] for s in R.states]
        p = p0.p[keep]
    else:
        R = build_rate_matrix(N, rates)
    A = R.A
    t0 = p0.time

    used = method
    nfev = 0
    if t_grid.size == 1 and t_grid[0] == t0:
        P = p[None, :]
    else:
        span = (t0, float(t_grid[-1]))
        counter = [0]

        def f(t, y):
            counter[0] += 1
            if counter[0] > max_explicit_evals:
                raise _BudgetExceeded
            return A @ y

        try:
            sol = solve_ivp(f, span, p, method=method, t_eval=t_grid, rtol=rtol, atol=atol)
        except _BudgetExceeded:
            used = "Radau"
            sol = solve_ivp(lambda t, y: A @ y, span, p, method="Radau", t_eval=t_grid,
                            rtol=rtol, atol=atol, jac=A.tocsc())
        if not sol.success:
            raise SolverError(f"population integration failed: {sol.message}")
        P = sol.y.T
        nfev = int(sol.nfev)

    drift = np.abs(P.sum(axis=1) - 1)
    if drift.max() > NORMALIZATION_LIMIT:
        raise SolverError(f"normalization drift {drift.max():.3g} exceeds {NORMALIZATION_LIMIT}")
    cols = population_observables(R.states, P)
    meta = {
        "solver": "piqs",
        "N": N,
        "rates": rates.as_dict(),
        "rtol": rtol,
        "atol": atol,
        "method": used,
        "nfev": nfev,
        "dim": R.dim,
        "m_max": None if m_max is None else float(m_max),
        "max_normalization_drift": float(drift.max()),
        "min_population": float(P.min()),
        "normalization": "raw",
    }
    return TimeSeries(t_grid, cols, meta, {"populations": P, "states": R.states})


def expand_populations(series: TimeSeries, N: int) -> np.ndarray:
    """Populations of a (possibly restricted) run embedded in the full triangle order."""
    full = enumerate_dicke_space(N)
    pos = {s: i for i, s in enumerate(full)}
    P = series.extras["populations"]
    out = np.zeros((P.shape[0], len(full)))
    for k, s in enumerate(series.extras["states"]):
        out[:, pos[s]] = P[:, k]
    return out


def totally_excited(N: int) -> PopulationVector:
    return initial_dicke_state(N, HalfInt(N), HalfInt(N))


def dicke_count(N: int) -> int:
    return (N // 2 + 1) * (N // 2 + 1) if N % 2 == 0 else (N + 1) * (N + 3) // 4

