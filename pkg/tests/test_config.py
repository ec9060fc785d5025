"""Run configuration validation and dispatch."""
import numpy as np
import pytest

from superrad.config import ConfigError, RunConfig, run, time_grid
from superrad.dicke import DickeIndex, HalfInt, RateSet

R = RateSet(1.0, 0.1, 1.0)


def idx(j, m):
    return DickeIndex(HalfInt.of(j), HalfInt.of(m))


@pytest.mark.parametrize("kwargs", [
    dict(solver="nope", N=4),
    dict(solver="piqs", N=0),
    dict(solver="piqs", N=4, t_max=-1),
    dict(solver="piqs", N=4, samples=1),
    dict(solver="piqs", N=4, rtol=1e-1),
    dict(solver="oracle", N=11),
    dict(solver="piqs", N=4, initial=idx(3, 0)),
    dict(solver="piqs", N=4, initial=(1.0, 0.0)),
    dict(solver="bosonic", N=100, initial=(1.0, -1.0)),
    dict(solver="bosonic", N=100),
])
def test_rejected(kwargs):
    kwargs.setdefault("rates", R)
    with pytest.raises(ConfigError):
        RunConfig(**kwargs)


def test_no_channel_rejected():
    with pytest.raises(ConfigError):
        RunConfig("piqs", 4, RateSet(0, 0, 0))


def test_defaults_and_echo():
    c = RunConfig("piqs", 5, R)
    assert c.initial_index == idx("5/2", "5/2")
    e = c.echo()
    assert e["initial"] == {"j": "5/2", "m": "5/2", "doubled": [5, 5]} and e["solver"] == "piqs"
    assert len(time_grid(c)) == 1001


def test_bright_dark_from_dicke():
    c = RunConfig("bosonic", 100, R, idx(50, -48))
    nb, nd = c.bright_dark()
    assert nb == pytest.approx((50 * 51 - 48 * 48 - 48) / 100)
    assert nb + nd == pytest.approx(2)


@pytest.mark.parametrize("solver", ["oracle", "piqs", "cumulant1", "cumulant2"])
def test_run_dispatch_agrees_at_t0(solver):
    c = RunConfig(solver, 4, R, idx(2, 1), t_max=0.5, samples=11)
    s = run(c)
    assert s["Jz"][0] == pytest.approx(1.0) and s.meta["config"]["solver"] == solver
    assert s.t[-1] == 0.5


def test_run_oracle_matches_piqs():
    a = run(RunConfig("oracle", 4, R, idx(1, 1), t_max=1.0, samples=11, rtol=1e-11))
    b = run(RunConfig("piqs", 4, R, idx(1, 1), t_max=1.0, samples=11, rtol=1e-11))
    assert np.max(np.abs(a["Jz"] - b["Jz"])) < 1e-8


def test_run_bosonic_pair():
    s = run(RunConfig("bosonic", 100, R, (2.0, 1.0), t_max=0.1, samples=5))
    assert s["nb"][0] == 2.0 and s["nd"][0] == 1.0
