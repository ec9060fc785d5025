"""Exact drifts at the five characteristic states next to their leading-order forms."""
import argparse

from superrad.analysis import format_table1, table1_report


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--tol", type=float, help="relative tolerance (default 2/N)")
    args = p.parse_args()
    print(format_table1(table1_report(args.n), args.tol))


if __name__ == "__main__":
    main()
