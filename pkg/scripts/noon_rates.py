"""Heralded NOON-state success probability against q for N = 3, 4, 5.

Writes one CSV with an analytic column per N and, with --shots, a Monte Carlo
column and Wilson interval per N.
"""

import argparse
import csv
import sys

import numpy as np

from qforge.factor import noon_plan
from qforge.sample import analytic_curve, sweep_q


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--q-max", type=float, default=0.3)
    ap.add_argument("--points", type=int, default=30)
    ap.add_argument("--shots", type=int, default=0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("-o", "--output", default="-")
    args = ap.parse_args()

    qs = np.linspace(args.q_max / args.points, args.q_max, args.points)
    ns = (3, 4, 5)
    columns = {f"analytic_N{N}": analytic_curve(noon_plan(N), qs) for N in ns}
    if args.shots:
        for N in ns:
            reports = sweep_q(noon_plan(N), qs, args.shots, args.seed)
            columns[f"mc_N{N}"] = [r.empirical_rate for r in reports]
            columns[f"mc_lo_N{N}"] = [r.wilson_interval[0] for r in reports]
            columns[f"mc_hi_N{N}"] = [r.wilson_interval[1] for r in reports]

    out = sys.stdout if args.output == "-" else open(args.output, "w", newline="")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["q", *columns])
    for i, q in enumerate(qs):
        writer.writerow([repr(float(q)), *(repr(float(col[i])) for col in columns.values())])
    if out is not sys.stdout:
        out.close()


if __name__ == "__main__":
    main()
