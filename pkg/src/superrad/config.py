"""Run configuration and a single entry point that dispatches to the solver tiers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .dicke import DickeIndex, HalfInt, RateSet

__all__ = ["SOLVERS", "ConfigError", "RunConfig", "run", "time_grid"]

SOLVERS = ("oracle", "piqs", "cumulant1", "cumulant2", "bosonic")


class ConfigError(ValueError):
    """Inconsistent run request (bad solver/N pairing, invalid initial state, ...)."""


@dataclass(frozen=True)
class RunConfig:
    """Everything a single deterministic run depends on.

    ``initial`` is a :class:`DickeIndex`, or for the bosonic solver either a
    DickeIndex (mapped exactly to bright/dark populations) or a pair
    ``(n_b, n_d)``. ``None`` means the totally excited state.
    """

    solver: str
    N: int
    rates: RateSet
    initial: DickeIndex | tuple[float, float] | None = None
    t_max: float = 1.0
    samples: int = 1001
    rtol: float = 1e-9
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}; choose from {', '.join(SOLVERS)}")
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ConfigError(f"N must be a positive integer, got {self.N!r}")
        if not (self.t_max > 0 and math.isfinite(self.t_max)):
            raise ConfigError("t_max must be positive and finite")
        if self.samples < 2:
            raise ConfigError("need at least two samples")
        if not 1e-13 <= self.rtol <= 1e-3:
            raise ConfigError("rtol must lie in [1e-13, 1e-3]")
        try:
            self.rates.require_evolution()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.solver == "oracle":
            from .oracle import BASIS_CAP, OPERATOR_CAP

            if self.N > min(OPERATOR_CAP, BASIS_CAP):
                raise ConfigError(f"oracle solver is capped at N={OPERATOR_CAP}")
        init = self.initial
        if isinstance(init, DickeIndex):
            if not init.is_valid(self.N):
                raise ConfigError(f"{init} is not a Dicke state for N={self.N}")
        elif init is not None:
            if self.solver != "bosonic":
                raise ConfigError("bright/dark initial populations need the bosonic solver")
            if len(init) != 2 or min(init) < 0:
                raise ConfigError("bright/dark initial state must be two non-negative numbers")
        if self.solver == "bosonic":
            from .bosonic import BrightDarkState

            if not BrightDarkState(*self.bright_dark(), self.N).is_dilute():
                raise ConfigError("bosonic solver needs a dilute initial state (excitations/N < 0.1)")

    @property
    def initial_index(self) -> DickeIndex:
        if self.initial is None:
            return DickeIndex(HalfInt(self.N), HalfInt(self.N))
        if not isinstance(self.initial, DickeIndex):
            raise ConfigError("initial state is not a Dicke index")
        return self.initial

    def bright_dark(self) -> tuple[float, float]:
        from .bosonic import map_exact

        if self.initial is None or isinstance(self.initial, DickeIndex):
            idx = self.initial_index
            nb, nd = map_exact(idx.j, idx.m, self.N)
            return nb, max(nd, 0.0)
        return float(self.initial[0]), float(self.initial[1])

    def echo(self) -> dict:
        if isinstance(self.initial, tuple):
            init = {"n_b": self.initial[0], "n_d": self.initial[1]}
        else:
            idx = self.initial_index
            init = {"j": str(idx.j), "m": str(idx.m), "doubled": list(idx.doubled)}
        return {
            "solver": self.solver,
            "N": int(self.N),
            "rates": self.rates.as_dict(),
            "initial": init,
            "t_max": self.t_max,
            "samples": self.samples,
            "rtol": self.rtol,
            "version": __version__,
        }


def time_grid(cfg: RunConfig) -> np.ndarray:
    return np.linspace(0.0, cfg.t_max, cfg.samples)


def run(cfg: RunConfig, dense: bool = False) -> "TimeSeries":
    """Run one configuration and return its time series with ``meta['config']`` filled in.

    ``dense`` keeps the continuous interpolant of moment solvers (used for
    root polishing); it is ignored by the other tiers.
    """
    t = time_grid(cfg)
    if cfg.solver == "piqs":
        from .piqs import evolve_populations, initial_dicke_state

        idx = cfg.initial_index
        series = evolve_populations(initial_dicke_state(cfg.N, idx.j, idx.m), cfg.rates, t, rtol=cfg.rtol)
    elif cfg.solver in ("cumulant1", "cumulant2"):
        from .moments import MomentState, integrate

        order = int(cfg.solver[-1])
        idx = cfg.initial_index
        series = integrate(order, MomentState.from_dicke(cfg.N, idx.j, idx.m, order), cfg.rates, t,
                           rtol=cfg.rtol, dense=dense)
    elif cfg.solver == "oracle":
        from .oracle import build_dicke_basis, build_operators, dicke_mixture, evolve

        idx = cfg.initial_index
        basis = build_dicke_basis(cfg.N)
        rho0 = dicke_mixture(basis, idx.j, idx.m)
        series = evolve(rho0, cfg.rates, t, ops=build_operators(cfg.N), rtol=cfg.rtol, basis=basis)
    else:
        from .bosonic import BrightDarkState, evolve_bright_dark

        nb, nd = cfg.bright_dark()
        series = evolve_bright_dark(BrightDarkState(nb, nd, cfg.N), cfg.rates, t,
                                    rtol=min(cfg.rtol, 1e-11))
    series.meta["config"] = cfg.echo()
    return series
