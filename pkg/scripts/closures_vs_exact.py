"""Exact population dynamics next to the first- and second-order closures.

Writes one CSV per dephasing rate with normalized <Jz>, <J^2> and <J+J->
for the three solvers, at N=50 (gamma_S=1, gamma_L=0.1), and a second set
at large N (gamma_L=10, gamma_D=100) where only the closures are run.
"""
import argparse
from pathlib import Path

import numpy as np

from superrad.config import RunConfig, run
from superrad.timeseries import TimeSeries


def compare(N, rates, t_max, samples, solvers):
    out = {}
    for solver in solvers:
        s = run(RunConfig(solver, N, rates, t_max=t_max, samples=samples))
        for name, values in s.normalized().items():
            out[f"{name}_{solver}"] = values
        t = s.t
    return TimeSeries(t, out, {"N": N, "rates": rates.as_dict()})


def main():
    from superrad.dicke import RateSet

    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("out/closures"))
    p.add_argument("--samples", type=int, default=801)
    args = p.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    for gD in (1.0, 10.0, 100.0):
        rates = RateSet(1.0, 0.1, gD)
        s = compare(50, rates, 3.0 / 1.1, args.samples, ("piqs", "cumulant1", "cumulant2"))
        s.to_csv(args.out / f"N50_gD{gD:g}.csv")
        err1 = np.max(np.abs(s["Jz_cumulant1"] - s["Jz_piqs"]))
        err2 = np.max(np.abs(s["Jz_cumulant2"] - s["Jz_piqs"]))
        print(f"N=50 gD={gD:g}: L_inf <Jz> error 1st {err1:.4f}, 2nd {err2:.4f}")

    for N in (100, 1000, 10000):
        rates = RateSet(1.0, 10.0, 100.0)
        s = compare(N, rates, 0.4, args.samples, ("cumulant1", "cumulant2"))
        s.to_csv(args.out / f"N{N}_large.csv")
        diff = max(np.max(np.abs(s[f"{k}_cumulant1"] - s[f"{k}_cumulant2"])) for k in ("Jz", "J2", "JpJm"))
        print(f"N={N}: max normalized |1st - 2nd| = {diff:.3e}")


if __name__ == "__main__":
    main()
