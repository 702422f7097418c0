"""Normalised boundary integral of c3 on the annuli R < |z| < 1/R over a sweep of R.

For each R the closed-form value, the value from extracted coefficients and
the distance to the gap constant are written as CSV. Pass --h to add a
discrete column (solver on R^2 < |z| < 1, the same annulus scaled by R; the
value is scale-free).

    python scripts/gap_sweep.py --out gap.csv
    python scripts/gap_sweep.py --R 0.5 0.3 --h 0.015625
"""

import argparse
import csv
import sys

import numpy as np

from llab import expansion as ex
from llab import geometry as geo
from llab import models
from llab import solver
from llab.models import ClosedFormSolution as CFS


def sweep_row(R, n_samples, h=None):
    sol = CFS.annulus(R)
    traces = ex.trace_domain(sol, sol.domain(), n_samples)
    row = {"R": R, "formula": models.gap_value(R),
           "extracted_outer": traces[0].normalized, "extracted_inner": traces[1].normalized}
    row["margin"] = models.GAP_CONSTANT - row["extracted_inner"]
    if h is not None:
        dom = geo.annulus(R * R, 1.0)
        disc = solver.solve(dom, solver.SolverConfig(h=h))
        row["discrete_inner"] = ex.trace_curve(disc, dom.holes[0], n_samples, index=1).normalized
    return row


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--R", type=float, nargs="+",
                   default=[0.9, 0.8, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05, 0.01, 1e-3])
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--h", type=float, default=None, help="also solve on the grid at this spacing")
    p.add_argument("--out", default="-")
    args = p.parse_args(argv)

    rows = [sweep_row(R, args.samples, args.h) for R in args.R]
    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.DictWriter(out, fieldnames=list(rows[0]))
    w.writeheader()
    for r in rows:
        w.writerow({k: format(v, ".17g") for k, v in r.items()})
    if out is not sys.stdout:
        out.close()
    margins = np.array([r["margin"] for r in rows])
    print(f"gap constant {models.GAP_CONSTANT:.6f}; smallest margin {margins.min():.3e} at R = "
          f"{args.R[int(np.argmin(margins))]}", file=sys.stderr)


if __name__ == "__main__":
    main()
