"""Command line front end: ``llab {models, solve, extract, verify, corollary}``.

Exit codes: 0 success / all checks pass, 2 a check failed or Newton diverged,
3 a check was inconclusive, 64 usage or parameter error, 65 malformed input.
``LLAB_THREADS`` caps BLAS/OpenMP threads when set before the process starts.
"""

from __future__ import annotations

import os

_threads = os.environ.get("LLAB_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse  # noqa: E402
import csv  # noqa: E402
import json  # noqa: E402
import logging  # noqa: E402
import sys  # noqa: E402

import numpy as np  # noqa: E402

from . import conformal as cf  # noqa: E402
from . import expansion as ex  # noqa: E402
from . import geometry as geo  # noqa: E402
from . import models  # noqa: E402
from . import solver  # noqa: E402
from . import verify as vf  # noqa: E402
from .serial import canonical_hash, file_hash, fmt, write_json  # noqa: E402

EXIT_OK, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_USAGE, EXIT_DATA = 0, 2, 3, 64, 65
VERDICT_EXIT = {vf.PASS: EXIT_OK, vf.FAIL: EXIT_FAIL, vf.INCONCLUSIVE: EXIT_INCONCLUSIVE}
VERIFY_CHECKS = ("lemma", "sign", "rigidity", "gap", "count", "comparison", "scaling", "corollary")

log = logging.getLogger("llab")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- manifest -----------------------------------------------------------------

def make_manifest(args, inputs: list[str], outputs: dict) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "verbose")}
    hashes = {}
    for p in inputs:
        try:
            hashes[p] = file_hash(p)
        except OSError as exc:
            raise DataError(f"cannot read {p}: {exc}") from exc
    m = {"subcommand": args.command, "inputs": hashes, "config": config,
         "outputs": {k: v for k, v in outputs.items() if v}}
    m["hash"] = canonical_hash(m)
    return m


def _write_csv(path, header, rows, manifest_hash):
    rows = list(rows)
    for r in rows:
        if len(r) != len(header):
            raise RuntimeError("CSV row does not match its header")
    with open(path, "w", newline="") as fh:
        fh.write(f"# manifest_hash={manifest_hash}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) for x in r])


def _emit(obj: dict, path, required=()):
    if path:
        write_json(path, obj, required)
    else:
        from .serial import dumps
        sys.stdout.write(dumps(obj) + "\n")


# -- solution sources -----------------------------------------------------------

def add_source_args(p, suffix: str = ""):
    g = p.add_argument_group(f"solution source{(' ' + suffix) if suffix else ''}")
    g.add_argument(f"--family{suffix}", choices=models.FAMILIES)
    g.add_argument(f"--R{suffix}", type=float)
    g.add_argument(f"--z0{suffix}", type=float, nargs=2, metavar=("RE", "IM"))
    g.add_argument(f"--L{suffix}", type=float)
    g.add_argument(f"--domain{suffix}", help="domain JSON; solved on a grid")
    g.add_argument(f"--h{suffix}", type=float, help="grid spacing for --domain")
    g.add_argument(f"--tol{suffix}", type=float, default=1e-10)
    g.add_argument(f"--max-iter{suffix}", type=int, default=50)
    g.add_argument(f"--map{suffix}", help="map JSON; pushes the closed form forward")


def _family_solution(family, R, z0, L):
    kw = {}
    if R is not None:
        kw["R"] = R
    if z0 is not None:
        kw["z0"] = complex(*z0)
    if L is not None:
        kw["L"] = L
    if family in ("disc", "exterior_disc") and R is None:
        kw["R"] = 1.0
    try:
        return models.ClosedFormSolution(family, **kw)
    except models.ParameterError as exc:
        raise UsageError(str(exc)) from exc


def _load_json_file(path, loader):
    try:
        return loader(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed input {path}: {exc}") from exc


def _family_radii(sol):
    f = sol.family
    if f == "disc":
        return 0.0, sol.R
    if f == "annulus":
        return sol.R, 1.0 / sol.R
    if f == "sub_annulus":
        return sol.R, 1.0
    raise UsageError(f"family {f} has no bounded circular domain to transport")


def build_source(args, suffix: str = ""):
    """Return (solution, domain, input paths) for one source argument group."""
    get = lambda name: getattr(args, name + suffix.replace("-", "_"), None)  # noqa: E731
    family, domain_path, map_path = get("family"), get("domain"), get("map")
    if bool(family) == bool(domain_path):
        raise UsageError(f"give exactly one of --family{suffix} or --domain{suffix}")
    if domain_path:
        if map_path:
            raise UsageError("--map applies to closed-form families only")
        h = get("h")
        if h is None:
            raise UsageError(f"--h{suffix} is required with --domain{suffix}")
        domain = _load_json_file(domain_path, geo.load_domain)
        cfg = solver.SolverConfig(h=h, tol=get("tol"), max_iter=get("max_iter"))
        return solver.solve(domain, cfg), domain, [domain_path]
    sol = _family_solution(family, get("R"), get("z0"), get("L"))
    if map_path:
        f = _load_json_file(map_path, cf.load_map)
        r0, r1 = _family_radii(sol)
        curves = [cf.image_of_circle(f, 0.0, r1)] + ([cf.image_of_circle(f, 0.0, r0)] if r0 > 0 else [])
        dom = geo.PlanarDomain(curves[0], tuple(curves[1:]))
        return cf.pushforward(sol, f), dom, [map_path]
    try:
        return sol, sol.domain(), []
    except models.UnsupportedError as exc:
        raise UsageError(str(exc)) from exc


# -- subcommands -------------------------------------------------------------------

def _model_sites(sol):
    if sol.family == "strip":
        return [ex.BoundarySite.on_line((0.0, -sol.L), (0.0, 1.0), 0),
                ex.BoundarySite.on_line((0.0, sol.L), (0.0, -1.0), 1)]
    return [ex.BoundarySite.on_curve(c, 0.0, i) for i, c in enumerate(sol.boundary_curves())]


def cmd_models(args) -> int:
    sol = _family_solution(args.family, args.R, args.z0, args.L)
    manifest = make_manifest(args, [], {"csv": args.csv, "json": args.json})
    rng = np.random.default_rng(args.seed)
    x, y = sol.sample_interior(args.n, rng, args.extent)
    j = sol.jet(x, y)
    summary = {"family": sol.family, "R": sol.R, "L": sol.L,
               "z0": None if sol.z0 is None else [sol.z0.real, sol.z0.imag],
               "n_points": int(len(x)), "max_abs_residual": float(np.max(np.abs(j.residual()))),
               "manifest_hash": manifest["hash"], "manifest": manifest}
    coeffs = {}
    for which in ("outer", "inner"):
        try:
            coeffs[which] = models.model_c3(sol, which)
        except models.UnsupportedError:
            pass
    summary["c3"] = coeffs
    summary["c3_extracted"] = [
        {"curve": s.curve, "kappa": s.kappa, "c3": ex.extract_c3_fit(sol, s).c3_fit} for s in _model_sites(sol)]
    if sol.family == "annulus":
        summary["gap_value"] = models.gap_value(sol.R)
    if args.csv:
        _write_csv(args.csv, ("x", "y", "v"), zip(x, y, j.v), manifest["hash"])
    _emit(summary, args.json, ("family", "c3", "manifest_hash"))
    return EXIT_OK


def cmd_solve(args) -> int:
    domain = _load_json_file(args.domain_file, geo.load_domain)
    manifest = make_manifest(args, [args.domain_file], {"out": args.out, "log": args.log, "csv": args.csv})
    cfg = solver.SolverConfig(h=args.h, tol=args.tol, max_iter=args.max_iter)
    record = {"manifest_hash": manifest["hash"], "manifest": manifest,
              "config": {"h": cfg.h, "tol": cfg.tol, "max_iter": cfg.max_iter, "initial": "distance"}}
    try:
        sol = solver.solve(domain, cfg)
    except (solver.DivergenceError, solver.PositivityError) as exc:
        record.update({"converged": False, "error": str(exc),
                       "history": getattr(exc, "history", [])})
        _emit(record, args.log, ("manifest_hash", "converged"))
        print(f"solve failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    g = sol.grid
    record.update({"converged": True, "history": sol.history, "iterations": len(sol.history) - 1,
                   "residual_norm": solver.residual_norm(sol), "unknowns": g.n,
                   "grid": {"nx": g.nx, "ny": g.ny, "x0": g.x0, "y0": g.y0, "h": g.h}})
    if args.out:
        sol.save_binary(args.out)
        record["field_sha256"] = file_hash(args.out)
    if args.csv:
        xy = g.xy
        _write_csv(args.csv, ("x", "y", "v"), zip(xy[:, 0], xy[:, 1], sol.values), manifest["hash"])
    _emit(record, args.log, ("manifest_hash", "converged"))
    return EXIT_OK


def cmd_extract(args) -> int:
    sol, domain, inputs = build_source(args)
    manifest = make_manifest(args, inputs, {"csv": args.csv, "json": args.json})
    traces = ex.trace_domain(sol, domain, args.n_samples)
    if args.csv:
        rows = [(p.curve, p.s, p.point[0], p.point[1], p.kappa, p.c3_fit, p.c3_laplacian, p.fit_residual)
                for t in traces for p in t.samples]
        _write_csv(args.csv, ex.TRACE_COLUMNS, rows, manifest["hash"])
    summary = ex.trace_summary(traces)
    summary.update({"manifest_hash": manifest["hash"], "manifest": manifest})
    _emit(summary, args.json, ("curves", "manifest_hash"))
    return EXIT_OK


def _report_exit(report: vf.VerificationReport, manifest: dict, path) -> int:
    report.provenance["manifest_hash"] = manifest["hash"]
    out = report.to_dict()
    out["manifest"] = manifest
    _emit(out, path, vf.REPORT_KEYS)
    return VERDICT_EXIT[report.verdict]


def _corollary_report(args):
    if not args.map:
        raise UsageError("the corollary check needs --map")
    f = _load_json_file(args.map, cf.load_map)
    v1 = _family_solution(args.family or "disc", args.R, args.z0, args.L)
    r0, r1 = _family_radii(v1)
    rep = vf.check_corollary(v1, f, 0.0, r0, r1, rel_tol=args.rel_tol, n_samples=args.n_samples)
    return rep, [args.map]


def cmd_verify(args) -> int:
    check = args.check
    if check == "corollary":
        rep, inputs = _corollary_report(args)
        return _report_exit(rep, make_manifest(args, inputs, {"out": args.out}), args.out)
    sol, domain, inputs = build_source(args)
    if check == "comparison":
        sol2, domain2, inputs2 = build_source(args, "2")
        inputs = inputs + inputs2
        sigma = (domain.outer, 0, 0) if domain.outer == domain2.outer else None
        pts = None
        if not isinstance(sol, solver.DiscreteSolution):
            rng = np.random.default_rng(args.seed)
            xmin, xmax, ymin, ymax = domain.bounding_box()
            cand = np.stack([rng.uniform(xmin, xmax, 4000), rng.uniform(ymin, ymax, 4000)], -1)
            pts = cand[geo.contains_points(domain, cand)]
        try:
            rep = vf.check_comparison(sol, sol2, pts, sigma, n_samples=args.n_samples, domain1=domain,
                                      c3_tolerance=args.c3_tol)
        except vf.PreconditionError as exc:
            raise UsageError(str(exc)) from exc
        return _report_exit(rep, make_manifest(args, inputs, {"out": args.out}), args.out)
    if check == "scaling":
        rep = vf.check_scaling(sol, domain, args.k, n_samples=args.n_samples)
        return _report_exit(rep, make_manifest(args, inputs, {"out": args.out}), args.out)
    traces = ex.trace_domain(sol, domain, args.n_samples)
    k = domain.connectivity
    if check == "lemma":
        rep = vf.check_boundary_identity(sol, domain, traces)
    elif check == "sign":
        rep = vf.check_sign_and_rigidity(traces, domain, args.sign_tol)
    elif check == "rigidity":
        zero = args.zero_tol
        if zero is None:
            zero = 10 * sum(abs(t.integral - t.integral_laplacian) for t in traces) + 1e-10
        rep = vf.check_rigidity(traces, domain, zero)
    elif check == "gap":
        rep = vf.check_gap(traces, k, args.gap_tol)
    else:
        rep = vf.check_count_bound(traces, k, args.l)
    rep.provenance.update(vf.provenance(domain, sol))
    return _report_exit(rep, make_manifest(args, inputs, {"out": args.out}), args.out)


def cmd_corollary(args) -> int:
    rep, inputs = _corollary_report(args)
    return _report_exit(rep, make_manifest(args, inputs, {"out": args.out}), args.out)


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="llab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log Newton progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("models", help="sample a closed-form solution")
    m.add_argument("--family", required=True, choices=models.FAMILIES)
    m.add_argument("--R", type=float)
    m.add_argument("--z0", type=float, nargs=2, metavar=("RE", "IM"))
    m.add_argument("--L", type=float)
    m.add_argument("--n", type=int, default=1000, help="number of random interior samples")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--extent", type=float, default=10.0, help="cut-off radius for unbounded families")
    m.add_argument("--csv")
    m.add_argument("--json")
    m.set_defaults(func=cmd_models)

    s = sub.add_parser("solve", help="solve on a domain file")
    s.add_argument("domain_file")
    s.add_argument("--h", type=float, required=True)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--max-iter", type=int, default=50)
    s.add_argument("--out", help="LVF1 binary field")
    s.add_argument("--log", help="JSON log (stdout when omitted)")
    s.add_argument("--csv")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("extract", help="trace c3 along every boundary curve")
    add_source_args(e)
    e.add_argument("--n-samples", type=int, default=64)
    e.add_argument("--csv")
    e.add_argument("--json")
    e.set_defaults(func=cmd_extract)

    v = sub.add_parser("verify", help="run one check and write a report")
    v.add_argument("--check", required=True, choices=VERIFY_CHECKS)
    add_source_args(v)
    add_source_args(v, "2")
    v.add_argument("--n-samples", type=int, default=64)
    v.add_argument("--l", type=int, help="connectivity bound to test (count check)")
    v.add_argument("--k", type=float, default=3.0, help="dilation factor (scaling check)")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--sign-tol", type=float, default=1e-8)
    v.add_argument("--gap-tol", type=float, default=1e-8)
    v.add_argument("--zero-tol", type=float)
    v.add_argument("--c3-tol", type=float)
    v.add_argument("--rel-tol", type=float, default=0.02)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("corollary", help="global-term transform against extraction on f(Omega)")
    c.add_argument("--map", required=True)
    c.add_argument("--family", choices=("disc", "annulus", "sub_annulus"), default="disc")
    c.add_argument("--R", type=float)
    c.add_argument("--z0", type=float, nargs=2, default=None, help=argparse.SUPPRESS)
    c.add_argument("--L", type=float, default=None, help=argparse.SUPPRESS)
    c.add_argument("--n-samples", type=int, default=64)
    c.add_argument("--rel-tol", type=float, default=0.02)
    c.add_argument("--out")
    c.set_defaults(func=cmd_corollary)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits on bad arguments and --help; report the status instead
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"llab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (models.ParameterError, solver.ResolutionError, ex.WindowError, cf.MapError) as exc:
        print(f"llab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, geo.GeometryError) as exc:
        print(f"llab: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (solver.DivergenceError, solver.PositivityError) as exc:
        print(f"llab: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ex.TraceError as exc:
        # too many boundary samples could not be fitted: no estimate either way
        print(f"llab: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE


if __name__ == "__main__":
    sys.exit(main())
