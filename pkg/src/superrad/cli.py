"""Command-line driver: ``superrad {run,sweep,trajectory,boundary,field,table1,validate}``.

Exit codes: 0 success, 2 invalid configuration, 3 solver failure,
4 validation-suite failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .config import SOLVERS, ConfigError, RunConfig, run
from .dicke import DickeIndex, HalfInt, RateSet
from .timeseries import SolverError, TimeSeries

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VALIDATION = 0, 2, 3, 4


def _half(text: str) -> HalfInt:
    """Parse '49/2', '24.5' or '25' into an exact half-integer."""
    try:
        return HalfInt.of(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"{text!r} is not a half-integer") from exc


def _rate(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError("rates must be non-negative")
    return value


def _common(p: argparse.ArgumentParser, multi_n: bool = False, multi_gd: bool = False) -> None:
    p.add_argument("--n", type=int, nargs="+" if multi_n else None, required=True, help="number of emitters")
    p.add_argument("--gamma-s", type=_rate, default=1.0, help="collective emission rate (default 1)")
    p.add_argument("--gamma-l", type=_rate, default=0.0, help="local nonradiative loss rate")
    p.add_argument("--gamma-d", type=_rate, nargs="+" if multi_gd else None, default=[0.0] if multi_gd else 0.0,
                   help="local pure-dephasing rate")
    p.add_argument("--omega0", type=float, default=0.0, help="transition frequency (drops out of all outputs)")


def _run_flags(p: argparse.ArgumentParser, default_solver: str = "piqs") -> None:
    p.add_argument("--solver", choices=SOLVERS, default=default_solver)
    p.add_argument("--j0", type=_half, help="initial j (default N/2)")
    p.add_argument("--m0", type=_half, help="initial m (default j0)")
    p.add_argument("--nb0", type=float, help="initial bright population (bosonic solver)")
    p.add_argument("--nd0", type=float, default=0.0, help="initial dark population (bosonic solver)")
    p.add_argument("--t-max", type=float, help="end of the time window (default from t_d and t0)")
    p.add_argument("--samples", type=int, default=1001)
    p.add_argument("--rtol", type=float, default=1e-9)


def _out_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, help="output file (default: CSV on stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="superrad", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single time evolution")
    _common(p)
    _run_flags(p)
    _out_flags(p)

    p = sub.add_parser("trajectory", help="(j(t), m(t)) of a run")
    _common(p)
    _run_flags(p, default_solver="cumulant2")
    _out_flags(p)

    p = sub.add_parser("sweep", help="effective delay time over an (N, gamma_D) grid")
    _common(p, multi_n=True, multi_gd=True)
    p.add_argument("--solver", choices=("piqs", "cumulant1", "cumulant2", "oracle"), default="cumulant2")
    p.add_argument("--relative", action="store_true", help="read --gamma-d in units of gamma_S N / sqrt(ln N)")
    p.add_argument("--t-max", type=float, help="initial time window (doubled until <Jz> crosses zero)")
    p.add_argument("--samples", type=int, default=2001)
    p.add_argument("--rtol", type=float, default=1e-9)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    _out_flags(p)

    p = sub.add_parser("boundary", help="dj/dt = 0 curves for several gamma_L/gamma_D")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ratios", nargs="+", default=["0.1", "1", "10"],
                   help="gamma_L/gamma_D values, or 'dephasing' / 'loss'")
    p.add_argument("--samples", type=int, help="m grid size (default N+1)")
    _out_flags(p)

    p = sub.add_parser("field", help="photon emission rate over the triangle, in units of N^2 gamma_S")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--gamma-s", type=_rate, default=1.0)
    p.add_argument("--resolution", type=int, default=101)
    _out_flags(p)

    p = sub.add_parser("table1", help="drifts at the characteristic states")
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("validate", help="run the cross-solver acceptance suite")
    p.add_argument("--only", type=int, nargs="+", help="criterion numbers to run")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=Path, help="write a JSON summary")
    return parser


# ---------------------------------------------------------------------------


def _config_from(args, gamma_D: float | None = None) -> RunConfig:
    from .dicke import delay_time_pure, incoherent_time

    rates = RateSet(args.gamma_s, args.gamma_l, args.gamma_d if gamma_D is None else gamma_D, args.omega0)
    N = args.n
    if args.nb0 is not None:
        if args.solver != "bosonic":
            raise ConfigError("--nb0/--nd0 need --solver bosonic")
        initial = (args.nb0, args.nd0)
    elif args.j0 is not None or args.m0 is not None:
        j0 = args.j0 if args.j0 is not None else HalfInt(N)
        m0 = args.m0 if args.m0 is not None else j0
        initial = DickeIndex(j0, m0)
    else:
        initial = None
    t_max = args.t_max
    if t_max is None:
        scales = []
        if rates.gamma_S + rates.gamma_L > 0:
            scales.append(incoherent_time(rates))
        if rates.gamma_S > 0 and N >= 2:
            scales.append(delay_time_pure(N, rates.gamma_S))
        t_max = 5 * max(scales) if scales else 5 / max(rates.gamma_D, 1e-300)
    return RunConfig(args.solver, N, rates, initial, t_max, args.samples, args.rtol)


def _emit_series(series: TimeSeries, args) -> None:
    if args.out is None:
        w = csv.writer(sys.stdout)
        names = series.ordered_names()
        w.writerow(["t", *names])
        for k in range(len(series)):
            w.writerow([format(float(series.t[k]), ".17g")] + [format(float(series[n][k]), ".17g") for n in names])
    elif args.format == "json":
        series.to_json(args.out)
    else:
        series.to_csv(args.out)


def _emit_rows(header, rows, args) -> None:
    if args.format == "json":
        payload = [dict(zip(header, r)) for r in rows]
        text = json.dumps(payload, indent=1, default=float)
        if args.out is None:
            print(text)
        else:
            args.out.write_text(text)
        return
    fh = sys.stdout if args.out is None else open(args.out, "w", newline="")
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else (format(v, ".17g") if isinstance(v, float) else v) for v in r])
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_run(args) -> int:
    _emit_series(run(_config_from(args)), args)
    return EXIT_OK


def cmd_trajectory(args) -> int:
    from .analysis import trajectory_jm

    series = run(_config_from(args))
    if "J2" not in series:
        raise ConfigError("trajectory needs a solver that tracks <J^2>")
    tr = trajectory_jm(series)
    tr.columns = {"j": tr["j"], "m": tr["m"], "Jz": series["Jz"], "J2": series["J2"]}
    _emit_series(tr, args)
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .analysis import SWEEP_COLUMNS, sweep_phase_diagram

    rates = RateSet(args.gamma_s, args.gamma_l, 0.0, args.omega0)
    if args.gamma_s <= 0:
        raise ConfigError("the sweep reference delay time needs --gamma-s > 0")
    rows = sweep_phase_diagram(args.n, args.gamma_d, rates, solver=args.solver, relative=args.relative,
                               jobs=args.jobs, samples=args.samples, rtol=args.rtol, t_max=args.t_max)
    _emit_rows(SWEEP_COLUMNS, [r.as_list() for r in rows], args)
    failed = [r for r in rows if r.error]
    for r in failed:
        print(f"warning: N={r.N} gamma_D={r.gamma_D:g}: {r.error}", file=sys.stderr)
    return EXIT_SOLVER if failed and len(failed) == len(rows) else EXIT_OK


def cmd_boundary(args) -> int:
    from .analysis import boundary_curves

    ratios = [r if r in ("dephasing", "loss") else float(r) for r in args.ratios]
    rows = []
    for c in boundary_curves(args.n, ratios, args.samples):
        for m, j, ok in zip(c.m, c.j, c.inside):
            rows.append([c.label, float(m), None if np.isnan(j) else float(j), int(bool(ok))])
    _emit_rows(("ratio", "m", "j", "inside"), rows, args)
    return EXIT_OK


def cmd_field(args) -> int:
    from .analysis import emission_field

    f = emission_field(args.n, args.gamma_s, args.resolution)
    _emit_rows(("j", "m", "rate_over_N2gS"), [list(r) for r in f.rows()], args)
    return EXIT_OK


def cmd_table1(args) -> int:
    from .analysis import format_table1, table1_report

    entries = table1_report(args.n)
    if args.format == "json":
        text = json.dumps([
            {
                "symbol": e.symbol, "state": e.state, "quantity": e.quantity, "N": e.N,
                "exact": {c: str(v) for c, v in e.exact.items()},
                "leading": {c: str(v) for c, v in e.leading.items()},
                "exact_symbolic": {c: str(v) for c, v in e.symbolic.items()},
                "leading_symbolic": {c: str(v) for c, v in e.leading_symbolic.items()},
                "rel_error": e.rel_error, "identical": e.identical,
            } for e in entries], indent=1)
    else:
        text = format_table1(entries)
    if args.out is None:
        print(text)
    else:
        args.out.write_text(text + "\n")
    return EXIT_OK


def cmd_validate(args) -> int:
    from . import validation

    if args.only:
        unknown = sorted(set(args.only) - set(validation.CRITERIA))
        if unknown:
            raise ConfigError(f"no criteria numbered {unknown}")
    if args.jobs > 1:
        validation.CRITERIA[8] = lambda: validation.criterion_8(jobs=args.jobs)
    results = validation.run_suite(args.only, echo=lambda line: print(line, flush=True))
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    if args.out is not None:
        args.out.write_text(json.dumps([
            {"criterion": r.number, "title": r.title, "passed": r.passed, "detail": r.detail,
             "seconds": r.seconds} for r in results], indent=1))
    return EXIT_OK if passed == len(results) else EXIT_VALIDATION


COMMANDS = {
    "run": cmd_run,
    "trajectory": cmd_trajectory,
    "sweep": cmd_sweep,
    "boundary": cmd_boundary,
    "field": cmd_field,
    "table1": cmd_table1,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            return COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
