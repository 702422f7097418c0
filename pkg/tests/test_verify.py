import json

import numpy as np
import pytest

from llab import conformal as cf
from llab import expansion as ex
from llab import geometry as geo
from llab import models
from llab import verify as vf
from llab.models import ClosedFormSolution as CFS

import oracle_values as ov


def synthetic_trace(integral, perimeter=2 * np.pi, curve=0, n=64):
    """Constant-c3 trace with the requested integral, on a circle of the given perimeter."""
    c3 = integral / perimeter
    speed = np.full(n, perimeter / (2 * np.pi))
    samples = [ex.ExpansionSample(curve, 2 * np.pi * i / n, (0.0, 0.0), 1.0, c3, c3) for i in range(n)]
    return ex.CoefficientTrace(curve, samples, speed, perimeter, integral, integral)


# -- verdict rules -----------------------------------------------------------------

def test_verdict_rules():
    assert vf.inequality_verdict(1.0, 0.1) == vf.PASS
    assert vf.inequality_verdict(-1.0, 0.1) == vf.FAIL
    assert vf.inequality_verdict(0.05, 0.1) == vf.INCONCLUSIVE
    assert vf.inequality_verdict(np.nan, 0.1) == vf.INCONCLUSIVE
    assert vf.identity_verdict(1.0, 1.0 + 1e-9, 1e-8)[1] == vf.PASS
    assert vf.identity_verdict(1.0, 1.1, 1e-8)[1] == vf.FAIL
    with pytest.raises(ValueError):
        vf.VerificationReport("theorem9", 0, 0, 0, 0, vf.PASS)


# -- boundary / domain identity ------------------------------------------------------

def test_identity_on_disc(unit_disc):
    rep = vf.check_boundary_identity(unit_disc, unit_disc.domain())
    assert rep.passed
    assert abs(rep.lhs) <= 1e-9 and abs(rep.rhs) <= 1e-9


def test_identity_on_annulus(annulus05):
    rep = vf.check_boundary_identity(annulus05, annulus05.domain())
    assert rep.passed, rep.details
    assert rep.lhs == pytest.approx(ov.ANNULUS_05_BOUNDARY_INTEGRAL, rel=1e-7)
    assert rep.rhs == pytest.approx(-ov.ANNULUS_05_DOMAIN_INTEGRAL, rel=1e-6)
    assert abs(rep.lhs - rep.rhs) <= 1e-6 * abs(rep.rhs)


def test_identity_needs_a_polar_region():
    sol = cf.pushforward(CFS.disc(1.0), cf.Polynomial((0, 1, 0.2)))
    dom = geo.PlanarDomain(cf.image_of_circle(cf.Polynomial((0, 1, 0.2)), 0.0, 1.0))
    rep = vf.check_boundary_identity(sol, dom)
    assert rep.verdict == vf.INCONCLUSIVE


def test_tail_correction_is_quadratic_in_delta(annulus05):
    traces = ex.trace_domain(annulus05, annulus05.domain(), 64)
    a, b = vf.tail_correction(traces, 1e-3), vf.tail_correction(traces, 2e-3)
    assert b == pytest.approx(4 * a, rel=1e-12)
    expected = 3 * 1e-6 * (ov.ANNULUS_05_C3_INNER**2 * np.pi + ov.ANNULUS_05_C3_OUTER**2 * 4 * np.pi)
    assert a == pytest.approx(expected, rel=1e-6)


# -- sign, rigidity, gap, count -----------------------------------------------------

def test_sign_on_annulus(annulus05):
    traces = ex.trace_domain(annulus05, annulus05.domain(), 64)
    rep = vf.check_sign_and_rigidity(traces, annulus05.domain())
    assert rep.passed
    outer, inner = rep.details["curve_integrals"]
    assert inner == pytest.approx(-12.85, abs=0.01) and outer == pytest.approx(-3.21, abs=0.01)
    assert rep.details["near_zero_curves"] == []


def test_sign_on_disc_reports_circle(unit_disc):
    traces = ex.trace_domain(unit_disc, unit_disc.domain(), 64)
    rep = vf.check_sign_and_rigidity(traces, unit_disc.domain())
    assert rep.passed
    assert rep.details["near_zero_curves"] == [0] and rep.details["single_circle"]


def test_positive_integral_fails():
    rep = vf.check_sign_and_rigidity([synthetic_trace(0.1)])
    assert rep.verdict == vf.FAIL and rep.margin < 0


def test_rigidity_branches():
    disc = geo.disc(1.0)
    assert vf.check_rigidity([synthetic_trace(1e-4)], disc, 1e-3).passed
    assert vf.check_rigidity([synthetic_trace(-0.5)], disc, 1e-3).verdict == vf.FAIL
    blob = geo.PlanarDomain(geo.fourier_disc({3: 0.1}))
    assert vf.check_rigidity([synthetic_trace(-0.5)], blob, 1e-3).passed
    assert vf.check_rigidity([synthetic_trace(-1e-4)], blob, 1e-3).verdict == vf.INCONCLUSIVE


def test_gap_on_annulus(annulus05):
    traces = ex.trace_domain(annulus05, annulus05.domain(), 64)
    rep = vf.check_gap(traces, 2)
    assert rep.passed
    assert rep.margin == pytest.approx(models.GAP_CONSTANT - ov.NORMALIZED[0.5], rel=1e-6)
    assert rep.margin == pytest.approx(33.8, abs=0.05)


def test_gap_margins_shrink_but_stay_positive():
    margins = []
    for R in (0.8, 0.5, 0.2, 0.05):
        sol = CFS.annulus(R)
        rep = vf.check_gap(ex.trace_domain(sol, sol.domain(), 64), 2)
        assert rep.passed
        margins.append(rep.margin)
    assert np.all(np.diff(margins) < 0) and margins[-1] > 0


def test_gap_not_applicable_to_simply_connected(unit_disc):
    rep = vf.check_gap(ex.trace_domain(unit_disc, unit_disc.domain(), 64), 1)
    assert rep.verdict == vf.INCONCLUSIVE and "k >= 2" in rep.details["reason"]


def test_gap_inside_tolerance_is_inconclusive():
    t = synthetic_trace(models.GAP_CONSTANT / (2 * np.pi) - 1e-12)
    assert vf.check_gap([t, t], 2, tolerance=1e-6).verdict == vf.INCONCLUSIVE


def test_count_on_annulus(annulus05):
    traces = ex.trace_domain(annulus05, annulus05.domain(), 64)
    T = vf.count_statistic(traces)
    expected = 3 / (2 * np.pi**2) * (np.pi + 4 * np.pi) * ov.ANNULUS_05_BOUNDARY_INTEGRAL
    assert T == pytest.approx(expected, rel=1e-7)
    rep = vf.check_count_bound(traces, 2)
    assert rep.passed and T < -4


def test_count_on_disc(unit_disc):
    traces = ex.trace_domain(unit_disc, unit_disc.domain(), 64)
    rep = vf.check_count_bound(traces, 1, l=2)
    assert rep.passed and rep.details["inferred_bound"] == 2


def test_inferred_bound():
    assert vf.inferred_connectivity_bound(0.0) == 2
    assert vf.inferred_connectivity_bound(-4.0) == 2
    assert vf.inferred_connectivity_bound(-4.5) == 3
    assert vf.inferred_connectivity_bound(-123.0) == 12


def test_count_bound_violation_fails():
    # a two-curve domain whose statistic is above -4 contradicts the bound
    t = synthetic_trace(-0.01)
    assert vf.check_count_bound([t, t], 2).verdict == vf.FAIL


# -- comparison and scaling ------------------------------------------------------------

def test_comparison_discs():
    pts = np.array([[0.0, 0.0], [0.5, 0.1], [-0.2, 0.7]])
    rep = vf.check_comparison(CFS.disc(1.0), CFS.disc(2.0), pts)
    assert rep.passed
    assert rep.lhs == pytest.approx(0.5) and rep.rhs == pytest.approx(1.0)


def test_comparison_annulus_in_disc_with_shared_circle(rng):
    small = cf.rescale(CFS.annulus(1 / np.sqrt(2)), np.sqrt(2))  # B_2 minus closed B_1
    pts = rng.uniform(-2, 2, (2000, 2))
    pts = pts[(np.hypot(*pts.T) > 1.01) & (np.hypot(*pts.T) < 1.99)]
    rep = vf.check_comparison(small, CFS.disc(2.0), pts, sigma=(geo.Circle((0, 0), 2.0), 0, 0))
    assert rep.passed
    assert rep.details["c3_mean_first"] < 0
    assert rep.details["c3_mean_second"] == pytest.approx(0.0, abs=1e-9)


def test_comparison_punctured(rng):
    pts = rng.uniform(-1, 1, (3000, 2))
    pts = pts[np.hypot(*pts.T) < 0.999]
    rep = vf.check_comparison(CFS.disc_minus_point(0.3 + 0.2j), CFS.disc(1.0), pts)
    assert rep.passed


def test_comparison_precondition():
    pts = np.array([[1.5, 0.0]])
    with pytest.raises(vf.PreconditionError):
        vf.check_comparison(CFS.disc(2.0), CFS.disc(1.0), pts)


def test_comparison_swapped_order_fails():
    # sample points in B_1 only, so containment is not violated there, but v of B_2 exceeds v of B_1
    pts = np.array([[0.0, 0.0], [0.3, 0.3]])
    rep = vf.check_comparison(CFS.disc(2.0), CFS.disc(1.0), pts)
    assert rep.verdict == vf.FAIL and rep.margin < 0


@pytest.mark.parametrize("k", [0.1, 3.0, 10.0])
def test_scaling_invariance(annulus05, k):
    rep = vf.check_scaling(annulus05, annulus05.domain(), k, rel_tol=1e-10)
    assert rep.passed, rep.details
    assert max(rep.details["max_c3_covariance_error"]) < 1e-8 * abs(ov.ANNULUS_05_C3_INNER)


# -- conformal identity -------------------------------------------------------------

def test_corollary_mobius_both_zero():
    rep = vf.check_corollary(CFS.disc(1.0), cf.Mobius.disc_automorphism(0.4 - 0.1j))
    assert rep.passed
    assert abs(rep.lhs) <= 1e-10 and abs(rep.rhs) <= 1e-10


@pytest.mark.parametrize("a", [0.1, 0.2])
def test_corollary_polynomial(a):
    rep = vf.check_corollary(CFS.disc(1.0), cf.Polynomial((0, 1, a)))
    assert rep.passed
    assert rep.rhs == pytest.approx(ov.COROLLARY[a], rel=1e-8)
    assert rep.lhs == pytest.approx(ov.COROLLARY[a], rel=0.02)


# -- reports ----------------------------------------------------------------------

def test_report_file(tmp_path, annulus05):
    rep = vf.check_gap(ex.trace_domain(annulus05, annulus05.domain(), 64), 2)
    p = tmp_path / "r.json"
    rep.write(p)
    data = json.loads(p.read_text())
    for key in vf.REPORT_KEYS:
        assert key in data
    assert data["check"] == "gap" and data["verdict"] == "pass"
    first = p.read_bytes()
    vf.check_gap(ex.trace_domain(annulus05, annulus05.domain(), 64), 2).write(p)
    assert p.read_bytes() == first
