"""Grid convergence of the solver and of discrete c3 extraction.

Solves on B_2 minus closed B_R for each h and reports the max nodal error
against the closed form, the inner-circle c3 from both extraction methods,
and observed orders between successive levels.

    python scripts/convergence_study.py                  # h = 1/32 .. 1/128
    python scripts/convergence_study.py --levels 32 64 128 256 --out conv.csv
"""

import argparse
import csv
import sys
import time

import numpy as np

from llab import conformal as cf
from llab import expansion as ex
from llab import geometry as geo
from llab import models
from llab import solver
from llab.models import ClosedFormSolution as CFS


def exact_annulus(R, outer):
    """Closed form on B_outer minus closed B_R and its dilation factor.

    The family annulus(rho) lives on rho < |z| < 1/rho, so rho = sqrt(R/outer)
    and the dilation is sqrt(R * outer).
    """
    rho, k = np.sqrt(R / outer), np.sqrt(R * outer)
    return cf.rescale(CFS.annulus(rho), k), rho, k


def run_level(dom, exact, n, n_samples):
    t0 = time.perf_counter()
    sol = solver.solve(dom, solver.SolverConfig(h=1.0 / n))
    elapsed = time.perf_counter() - t0
    xy = sol.grid.xy
    err = float(np.max(np.abs(sol.values - exact.value(xy[:, 0], xy[:, 1]))))
    tr = ex.trace_curve(sol, dom.holes[0], n_samples, index=1)
    return {"n": n, "h": 1.0 / n, "unknowns": sol.grid.n, "newton_steps": len(sol.history) - 1,
            "max_error": err, "c3_fit": float(np.mean(tr.c3)), "c3_laplacian": float(np.mean(tr.c3_laplacian)),
            "c3_jitter": tr.jitter, "seconds": elapsed}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--levels", type=int, nargs="+", default=[32, 64, 128], help="1/h values")
    p.add_argument("--R", type=float, default=0.5)
    p.add_argument("--outer", type=float, default=2.0)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--out", default="-")
    args = p.parse_args(argv)

    dom = geo.annulus(args.R, args.outer)
    exact, rho, k = exact_annulus(args.R, args.outer)
    target = models.model_c3(CFS.annulus(rho), "inner") / k**2
    rows = []
    for n in sorted(args.levels):
        row = run_level(dom, exact, n, args.samples)
        row["c3_rel_error"] = abs(row["c3_fit"] - target) / abs(target)
        if rows:
            prev = rows[-1]
            ratio = prev["h"] / row["h"]
            row["order_field"] = np.log(prev["max_error"] / row["max_error"]) / np.log(ratio)
            row["order_c3"] = np.log(prev["c3_rel_error"] / row["c3_rel_error"]) / np.log(ratio)
        else:
            row["order_field"] = row["order_c3"] = float("nan")
        rows.append(row)
        print(f"h=1/{n}: error {row['max_error']:.3e}, c3 {row['c3_fit']:.6f} "
              f"({row['c3_rel_error']:.2%}), {row['seconds']:.1f} s", file=sys.stderr)

    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.DictWriter(out, fieldnames=list(rows[0]))
    w.writeheader()
    for r in rows:
        w.writerow({k: (v if isinstance(v, int) else format(v, ".17g")) for k, v in r.items()})
    if out is not sys.stdout:
        out.close()
    print(f"target c3 {target:.10f}", file=sys.stderr)


if __name__ == "__main__":
    main()
