"""Checks of the boundary-integral identity, sign, gap, connectivity and comparison statements.

Each check returns a :class:`VerificationReport`. Identity checks pass when
|lhs - rhs| <= tolerance. Inequality checks carry a signed margin (positive
when the inequality holds) and pass only when the margin exceeds the
tolerance; a margin inside the tolerance band is inconclusive.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import conformal as cf
from . import expansion as ex
from . import geometry as geo
from .models import GAP_CONSTANT
from .serial import canonical_hash, write_json
from .solver import DiscreteSolution

log = logging.getLogger(__name__)

CHECKS = ("lemma", "sign", "gap", "rigidity", "count", "comparison", "scaling", "corollary")
PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
CLOSED_FORM_DELTA = 1e-3
DISCRETE_DELTA = 3.0  # in units of h
REPORT_KEYS = ("check", "lhs", "rhs", "margin", "tolerance", "verdict", "provenance")


class PreconditionError(ValueError):
    pass


@dataclass
class VerificationReport:
    check: str
    lhs: float
    rhs: float
    margin: float
    tolerance: float
    verdict: str
    provenance: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.check not in CHECKS:
            raise ValueError(f"unknown check id {self.check!r}")
        if self.verdict not in (PASS, FAIL, INCONCLUSIVE):
            raise ValueError(f"bad verdict {self.verdict!r}")

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, path) -> None:
        write_json(path, self.to_dict(), REPORT_KEYS)


def identity_verdict(lhs, rhs, tol) -> tuple[float, str]:
    """Margin = tol - |lhs - rhs|; pass iff the gap is within tolerance."""
    gap = abs(lhs - rhs)
    if not np.isfinite(gap):
        return float("nan"), INCONCLUSIVE
    return float(tol - gap), PASS if gap <= tol else FAIL


def inequality_verdict(margin, tol) -> str:
    """Strict inequality with signed margin: pass above tol, fail below -tol."""
    if not np.isfinite(margin):
        return INCONCLUSIVE
    if margin > tol:
        return PASS
    if margin < -tol:
        return FAIL
    return INCONCLUSIVE


def provenance(domain: geo.PlanarDomain | None = None, sol=None, **extra) -> dict:
    out = dict(extra)
    if domain is not None:
        out["domain_hash"] = canonical_hash(domain.to_dict())
    if isinstance(sol, DiscreteSolution) and sol.config is not None:
        cfg = sol.config
        out["solver"] = {"h": cfg.h, "tol": cfg.tol, "max_iter": cfg.max_iter,
                         "initial": cfg.initial if isinstance(cfg.initial, str) else "custom"}
    elif sol is not None:
        out["solution"] = type(sol).__name__
    return out


# -- domain integral of the Hessian gap ---------------------------------------

def gap_integrand(j) -> np.ndarray:
    """((v_xx - v_yy)^2 + 4 v_xy^2) / (6 v)."""
    return j.hessian_gap_sq / (6.0 * j.v)


def polar_domain_integral(sol, center=(0.0, 0.0), r0: float = 0.0, r1: float = 1.0,
                          delta: float = CLOSED_FORM_DELTA, n_r: int = 10_000, n_theta: int = 16) -> float:
    """Integral of the gap integrand over r0 + delta < |z - center| < r1 - delta (r0 = 0: no inner cut).

    Gauss-Legendre in radius, trapezoid in angle; exact jets.
    """
    lo = r0 + delta if r0 > 0 else 0.0
    R, T, W = cf.polar_rule(n_r, n_theta, lo, r1 - delta)
    x = center[0] + R * np.cos(T)
    y = center[1] + R * np.sin(T)
    return float(np.sum(W * gap_integrand(sol.jet(x, y))))


def grid_domain_integral(sol: DiscreteSolution, delta: float | None = None) -> tuple[float, int]:
    """Node sum h^2 * integrand over unknowns with distance >= delta (default 3h).

    Second differences are centred; nodes whose 3x3 block is not all unknowns
    are skipped. Returns (integral, number of nodes used).
    """
    g = sol.grid
    delta = DISCRETE_DELTA * g.h if delta is None else delta
    mask, vxx, vxy, vyy = sol.nodal_hessian()
    d = g.sdist[g.ij[:, 0], g.ij[:, 1]]
    use = mask & (d >= delta)
    gap = (vxx - vyy) ** 2 + 4 * vxy**2
    vals = gap[use] / (6.0 * sol.values[use])
    return float(np.sum(vals) * g.h**2), int(np.count_nonzero(use))


def tail_correction(traces: list[ex.CoefficientTrace], delta: float) -> float:
    """Integral of the gap integrand over the layer d < delta, to leading order.

    Near the boundary the Hessian eigenvalue gap is 6 c3 d, so the integrand
    is 6 c3^2 d and the layer contributes delta^2 * (3 c3^2 integrated along each curve).
    """
    total = 0.0
    for tr in traces:
        n = len(tr.samples)
        total += float(np.sum(3.0 * tr.c3**2 * tr.speeds) * (geo.TWO_PI / n)) * delta**2
    return total


def _annular_region(domain: geo.PlanarDomain):
    """(center, r0, r1) when the domain is a disc or a concentric annulus of circles."""
    curves = domain.curves
    if not all(isinstance(c, geo.Circle) for c in curves) or len(curves) > 2:
        return None
    c = curves[0].center
    if len(curves) == 2 and np.hypot(curves[1].center[0] - c[0], curves[1].center[1] - c[1]) > 1e-14:
        return None
    return c, (curves[1].radius if len(curves) == 2 else 0.0), curves[0].radius


def check_boundary_identity(sol, domain: geo.PlanarDomain, traces: list[ex.CoefficientTrace] | None = None,
                  rel_tol: float | None = None, abs_tol: float = 1e-9, delta: float | None = None,
                  n_samples: int = 64, n_r: int = 10_000, n_theta: int = 16) -> VerificationReport:
    """Boundary integral of c3 against minus the domain integral of the Hessian gap over 6v.

    Analytic solutions need a disc or concentric annulus (polar quadrature);
    discrete solutions use the node sum. The layer d < delta is added through
    :func:`tail_correction`.
    """
    discrete = isinstance(sol, DiscreteSolution)
    if traces is None:
        traces = ex.trace_domain(sol, domain, n_samples)
    lhs = float(sum(t.integral for t in traces))
    details = {"curve_integrals": [t.integral for t in traces]}
    if discrete:
        delta = DISCRETE_DELTA * sol.h if delta is None else delta
        bulk, used = grid_domain_integral(sol, delta)
        details["nodes_used"] = used
        rel_tol = 0.02 if rel_tol is None else rel_tol
    else:
        delta = CLOSED_FORM_DELTA if delta is None else delta
        region = _annular_region(domain)
        if region is None:
            return VerificationReport("lemma", lhs, float("nan"), float("nan"), abs_tol, INCONCLUSIVE,
                                      provenance(domain, sol),
                                      {**details, "reason": "closed-form quadrature needs a disc or annulus"})
        c, r0, r1 = region
        bulk = polar_domain_integral(sol, c, r0, r1, delta, n_r, n_theta)
        coarse = polar_domain_integral(sol, c, r0, r1, delta, n_r // 2, n_theta // 2)
        details["quadrature_change"] = abs(bulk - coarse)
        rel_tol = 1e-6 if rel_tol is None else rel_tol
    tail = tail_correction(traces, delta)
    rhs = -(bulk + tail)
    tol = max(rel_tol * abs(rhs), abs_tol)
    details.update({"bulk": bulk, "tail": tail, "delta": delta, "rel_tol": rel_tol})
    margin, verdict = identity_verdict(lhs, rhs, tol)
    if not discrete and details["quadrature_change"] > tol:
        verdict = INCONCLUSIVE
        details["reason"] = "quadrature not converged"
    return VerificationReport("lemma", lhs, rhs, margin, tol, verdict, provenance(domain, sol), details)


# -- sign, rigidity, gap, count ----------------------------------------------

def check_sign_and_rigidity(traces: list[ex.CoefficientTrace], domain: geo.PlanarDomain | None = None,
                            tolerance: float = 1e-8) -> VerificationReport:
    """Every curve integral of c3 must be <= tolerance.

    Integrals within tolerance of zero are reported together with whether the
    domain is a single circle, the only case where zero is allowed.
    """
    ints = [t.integral for t in traces]
    worst = float(max(ints))
    verdict = PASS if worst <= tolerance else FAIL
    near_zero = [i for i, v in enumerate(ints) if abs(v) <= tolerance]
    details = {"curve_integrals": ints, "near_zero_curves": near_zero}
    if domain is not None:
        details["single_circle"] = is_single_circle(domain)
    return VerificationReport("sign", worst, 0.0, -worst, tolerance, verdict, provenance(domain), details)


def is_single_circle(domain: geo.PlanarDomain) -> bool:
    return not domain.holes and isinstance(domain.outer, geo.Circle)


def check_rigidity(traces: list[ex.CoefficientTrace], domain: geo.PlanarDomain,
                   zero_tolerance: float) -> VerificationReport:
    """A vanishing total is allowed only on a disc.

    ``zero_tolerance`` is the numerical-zero threshold (10x the estimated
    discretisation error). Pass: disc with |integral| <= threshold, or a
    non-disc strictly below -threshold. A disc with a clearly nonzero integral
    fails; a non-disc inside the band is inconclusive.
    """
    total = float(sum(t.integral for t in traces))
    disc = is_single_circle(domain)
    if disc:
        verdict = PASS if abs(total) <= zero_tolerance else FAIL
        margin = zero_tolerance - abs(total)
    else:
        margin = -total
        verdict = inequality_verdict(margin, zero_tolerance)
    return VerificationReport("rigidity", total, 0.0, float(margin), zero_tolerance, verdict,
                              provenance(domain), {"single_circle": disc})


def check_gap(traces: list[ex.CoefficientTrace], k: int, tolerance: float = 1e-8) -> VerificationReport:
    """Every normalised product must lie strictly below the gap constant."""
    norm = [t.normalized for t in traces]
    if k < 2:
        return VerificationReport("gap", float(max(norm)) if norm else float("nan"), GAP_CONSTANT,
                                  float("nan"), tolerance, INCONCLUSIVE, {},
                                  {"reason": "gap bound needs a multiply connected domain (k >= 2)",
                                   "normalized": norm})
    margins = [GAP_CONSTANT - v for v in norm]
    m = float(min(margins))
    return VerificationReport("gap", float(max(norm)), GAP_CONSTANT, m, tolerance,
                              inequality_verdict(m, tolerance), {},
                              {"normalized": norm, "margins": margins})


def count_statistic(traces: list[ex.CoefficientTrace]) -> float:
    """T = 3/(2 pi^2) * total length * total integral of c3."""
    length = sum(t.perimeter for t in traces)
    integral = sum(t.integral for t in traces)
    return 3.0 / (2.0 * np.pi**2) * length * integral


def inferred_connectivity_bound(T: float) -> int:
    """Smallest l >= 2 with T >= -l^2; the connectivity is then below l."""
    l = max(2, int(np.ceil(np.sqrt(max(-T, 0.0)))))
    while T < -(l**2):
        l += 1
    return l


def check_count_bound(traces: list[ex.CoefficientTrace], k: int, l: int | None = None,
                      tolerance: float = 1e-8) -> VerificationReport:
    """For k >= 2 the statistic must satisfy T < -k^2; for k = 1, T >= -l^2 (default l = 2)."""
    T = float(count_statistic(traces))
    bound = inferred_connectivity_bound(T)
    details = {"k": k, "inferred_bound": bound, "connectivity_below": bound}
    if k >= 2:
        rhs = -float(k * k)
        margin = rhs - T
    else:
        l = 2 if l is None else l
        if l < 2:
            raise ValueError("l must be at least 2")
        rhs = -float(l * l)
        margin = T - rhs
        details["l"] = l
    verdict = inequality_verdict(margin, tolerance)
    if verdict == PASS and not k < bound:
        verdict = FAIL
    return VerificationReport("count", T, rhs, float(margin), tolerance, verdict, {}, details)


# -- comparison and scaling -----------------------------------------------------

def shared_nodes(sol1: DiscreteSolution, sol2: DiscreteSolution):
    """Lattice nodes that carry unknowns in both discrete solutions (same h, aligned lattices)."""
    g1, g2 = sol1.grid, sol2.grid
    if abs(g1.h - g2.h) > 1e-15:
        raise PreconditionError("discrete comparison needs equal spacings")
    xy = g1.xy
    i = np.rint((xy[:, 0] - g2.x0) / g2.h).astype(int)
    j = np.rint((xy[:, 1] - g2.y0) / g2.h).astype(int)
    inside = (i >= 0) & (i < g2.nx) & (j >= 0) & (j < g2.ny)
    idx2 = np.full(len(xy), -1)
    idx2[inside] = g2.index[i[inside], j[inside]]
    return xy, np.nonzero(idx2 >= 0)[0], idx2, int(np.count_nonzero(idx2 < 0))


def _values(sol, x, y):
    return sol.value(x, y) if isinstance(sol, DiscreteSolution) else sol.jet(x, y).v


def check_comparison(sol1, sol2, points=None, sigma: tuple | None = None, tolerance: float = 1e-8,
                     c3_tolerance: float | None = None, n_samples: int = 64,
                     domain1: geo.PlanarDomain | None = None) -> VerificationReport:
    """v1 <= v2 on sampled points of Omega1 and c3 (Omega1) <= c3 (Omega2) along a shared curve.

    Discrete pairs are compared at their shared lattice nodes, analytic
    solutions at ``points`` (N, 2). ``sigma`` = (curve, index in Omega1,
    index in Omega2) names the shared boundary curve.
    """
    details = {}
    if isinstance(sol1, DiscreteSolution) and isinstance(sol2, DiscreteSolution):
        xy, common, idx2, orphans = shared_nodes(sol1, sol2)
        if orphans:
            raise PreconditionError(f"{orphans} nodes of the first domain lie outside the second")
        v1 = sol1.values[common]
        v2 = sol2.values[idx2[common]]
        details["points"] = int(len(common))
    else:
        if points is None:
            raise PreconditionError("analytic comparison needs sample points")
        pts = np.asarray(points, dtype=float)
        ok1 = sol1.valid(pts[:, 0], pts[:, 1])
        ok2 = sol2.valid(pts[:, 0], pts[:, 1])
        if np.any(ok1 & ~ok2):
            raise PreconditionError("sampled points of the first domain lie outside the second")
        pts = pts[ok1]
        v1 = _values(sol1, pts[:, 0], pts[:, 1])
        v2 = _values(sol2, pts[:, 0], pts[:, 1])
        details["points"] = int(len(pts))
    diff = v2 - v1
    v_margin = float(np.min(diff))
    details["v_margin"] = v_margin
    margin = v_margin + tolerance
    if sigma is not None:
        curve, i1, i2 = sigma
        t1 = ex.trace_curve(sol1, curve, n_samples, index=i1)
        t2 = ex.trace_curve(sol2, curve, n_samples, index=i2)
        c_margin = float(np.min(t2.c3 - t1.c3))
        ctol = tolerance if c3_tolerance is None else c3_tolerance
        details.update({"c3_margin": c_margin, "c3_tolerance": ctol,
                        "c3_mean_first": float(np.mean(t1.c3)), "c3_mean_second": float(np.mean(t2.c3))})
        margin = min(margin, c_margin + ctol)
    verdict = PASS if margin >= 0 else FAIL
    return VerificationReport("comparison", float(np.max(v1)), float(np.max(v2)), float(margin), tolerance,
                              verdict, provenance(domain1, sol1), details)


def check_scaling(sol, domain: geo.PlanarDomain, k: float, rel_tol: float = 1e-8,
                  n_samples: int = 64) -> VerificationReport:
    """Normalised products on Omega and on k * Omega (solution rescaled) must coincide."""
    base = ex.trace_domain(sol, domain, n_samples)
    scaled = ex.trace_domain(cf.rescale(sol, k), geo.scale_domain(domain, k), n_samples)
    a = np.array([t.normalized for t in base])
    b = np.array([t.normalized for t in scaled])
    worst = int(np.argmax(np.abs(b - a)))
    tol = rel_tol * max(abs(a[worst]), 1.0)
    margin, verdict = identity_verdict(b[worst], a[worst], tol)
    c3_ratio = [float(np.max(np.abs(ts.c3 * k**2 - tb.c3))) for tb, ts in zip(base, scaled)]
    return VerificationReport("scaling", float(b[worst]), float(a[worst]), margin, tol, verdict,
                              provenance(domain, sol, k=k),
                              {"normalized": a.tolist(), "normalized_scaled": b.tolist(),
                               "max_c3_covariance_error": c3_ratio})


# -- conformal global term --------------------------------------------------

def check_corollary(v1, f: cf.HolomorphicMap, center: complex = 0.0, r0: float = 0.0, r1: float = 1.0,
                    rel_tol: float = 0.02, abs_tol: float = 1e-10, n_samples: int = 64,
                    quad_tol: float = 1e-10) -> VerificationReport:
    """Extraction-based boundary integral of c3 on f(Omega1) against its area-integral transform.

    Omega1 is r0 < |z - center| < r1 with a closed-form v1; the boundary of
    f(Omega1) is the exact image of the circles.
    """
    v2 = cf.pushforward(v1, f)
    center = complex(center)
    curves = [cf.image_of_circle(f, center, r1)]
    if r0 > 0:
        curves.append(cf.image_of_circle(f, center, r0))
    dom = geo.PlanarDomain(curves[0], tuple(curves[1:]))
    traces = ex.trace_domain(v2, dom, n_samples)
    lhs = float(sum(t.integral for t in traces))
    rhs, info = cf.global_term_transform_integral(v1, f, r0, r1, center, tol=quad_tol, return_info=True)
    tol = max(rel_tol * abs(rhs), abs_tol)
    margin, verdict = identity_verdict(lhs, float(rhs), tol)
    return VerificationReport("corollary", lhs, float(rhs), margin, tol, verdict,
                              provenance(dom, v1, map=f.to_dict() if hasattr(f, "to_dict") else str(f)),
                              {"curve_integrals": [t.integral for t in traces], "quadrature": info})
