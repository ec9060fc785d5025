"""Run the acceptance suite and print one PASS/FAIL line per criterion.

    python3 scripts/acceptance.py            # all criteria
    python3 scripts/acceptance.py 4 6        # a subset
"""
import sys

from superrad.validation import run_suite


def main(argv):
    which = [int(a) for a in argv] or None
    results = run_suite(which)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return 0 if passed == len(results) else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
