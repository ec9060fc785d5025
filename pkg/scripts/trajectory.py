"""(j(t), m(t)) path through the Dicke triangle, with the dj/dt = 0 boundaries.

Default parameters sit on the incoherent side (strong dephasing and loss):
the path first falls toward small j, then drifts to the ground state.
"""
import argparse
from pathlib import Path

from superrad.analysis import boundary_curves, trajectory_jm
from superrad.config import RunConfig, run
from superrad.dicke import RateSet


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--gamma-l", type=float, default=10.0)
    p.add_argument("--gamma-d", type=float, default=1000.0)
    p.add_argument("--t-max", type=float, default=0.5)
    p.add_argument("--out", type=Path, default=Path("out/trajectory"))
    args = p.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    rates = RateSet(1.0, args.gamma_l, args.gamma_d)
    series = run(RunConfig("cumulant2", args.n, rates, t_max=args.t_max, samples=2001))
    tr = trajectory_jm(series)
    tr.to_csv(args.out / "jm.csv")
    with open(args.out / "boundaries.csv", "w") as fh:
        fh.write("ratio,m,j\n")
        for c in boundary_curves(args.n, [args.gamma_l / args.gamma_d, "dephasing", "loss"]):
            for m, j, ok in zip(c.m, c.j, c.inside):
                if ok:
                    fh.write(f"{c.label},{m:.17g},{j:.17g}\n")
    k = int(tr["j"].argmin())
    print(f"lowest j = {tr['j'].min():.2f} (N/2 = {args.n / 2:g}) at t = {tr.t[k]:.4g}; "
          f"final (j, m) = ({tr['j'][-1]:.2f}, {tr['m'][-1]:.2f})")


if __name__ == "__main__":
    main()
