"""Sweep the counting inequalities behind the Par_k analysis and print the tallies as JSON."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from adaptest.lab import check_appendix_bounds, check_even_deviation, check_par_query_bound


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--k-max", type=int, default=6)
    parser.add_argument("--m-max", type=int, default=200)
    parser.add_argument("--n-max", type=int, default=40)
    args = parser.parse_args()

    report = check_appendix_bounds(range(2, args.k_max + 1), args.m_max, args.n_max)
    query_bound = {
        f"k={k}": all(check_par_query_bound(k, m) for m in range(2 * k * k + 1, args.m_max + 1))
        for k in range(2, args.k_max + 1)
    }
    grid = [Fraction(i, 8) for i in range(5)]
    summary = {
        "ok": report.ok,
        "checked": report.checked,
        "counterexamples": [{"bound": case.bound, **case.values} for case in report.counterexamples],
        "par_query_bound": query_bound,
        "even_deviation_failures": [[str(p) for p in ps] for ps in check_even_deviation(grid)],
    }
    print(json.dumps(summary, indent=2))
    if not report.ok:
        sys.exit(1)


if __name__ == "__main__":
    main()
