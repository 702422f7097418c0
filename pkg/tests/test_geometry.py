import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar
from scipy.special import ellipe

from llab import geometry as geo


def ellipse(a, b):
    return geo.FourierCurve((0, a), (0, 0), (0, 0), (0, b))


def test_circle_curvature_sign_follows_orientation():
    dom = geo.annulus(0.5, 2.0)
    s = np.linspace(0, 2 * np.pi, 7)
    assert np.allclose(geo.curvature(dom.outer, s), 0.5)
    assert np.allclose(geo.curvature(dom.holes[0], s), -2.0)


def test_hole_given_counterclockwise_is_reversed():
    dom = geo.PlanarDomain(geo.Circle((0, 0), 2.0), (geo.Circle((0, 0), 1.0, 1),))
    assert dom.holes[0].orientation == -1
    assert geo.signed_area(dom.holes[0]) < 0


def test_inward_normal_points_into_domain():
    dom = geo.annulus(0.5, 2.0)
    for c in dom.curves:
        s = np.linspace(0, 2 * np.pi, 16, endpoint=False)
        p = geo.point(c, s) + 1e-3 * geo.inward_normal(c, s)
        assert np.all(geo.contains_points(dom, p))


def test_ellipse_curvature_and_perimeter():
    a, b = 2.0, 1.0
    c = ellipse(a, b)
    s = np.linspace(0, 2 * np.pi, 50)
    exact = a * b / (a**2 * np.sin(s) ** 2 + b**2 * np.cos(s) ** 2) ** 1.5
    assert np.allclose(geo.curvature(c, s), exact, rtol=1e-12)
    assert geo.perimeter(c) == pytest.approx(4 * a * ellipe(1 - (b / a) ** 2), rel=1e-12)


def test_fourier_disc_is_the_polar_graph():
    c = geo.fourier_disc({3: 0.1, 2: -0.05})
    s = np.linspace(0, 2 * np.pi, 33)
    p = geo.point(c, s)
    r = 1 + 0.1 * np.cos(3 * s) - 0.05 * np.cos(2 * s)
    assert np.allclose(p, np.stack([r * np.cos(s), r * np.sin(s)], -1), atol=1e-14)


def test_fourier_derivatives_match_finite_differences():
    c = geo.fourier_disc({3: 0.1})
    s, e = 0.7, 1e-5
    d = c.derivatives(np.array([s - e, s, s + e]), 3)
    for k in range(3):
        fd = (np.array(d[k])[:, 2] - np.array(d[k])[:, 0]) / (2 * e)
        assert np.allclose(fd, np.array(d[k + 1])[:, 1], atol=1e-7)


def test_self_intersecting_curve_rejected():
    # lemniscate-like figure eight: x = sin s, y = sin 2s / 2 = sin s cos s
    eight = geo.FourierCurve((0,), (0, 1), (0,), (0, 0, 0.5))
    with pytest.raises(geo.GeometryError):
        geo.check_curve(eight)


def test_degenerate_curve_rejected():
    with pytest.raises(geo.GeometryError):
        geo.check_curve(geo.FourierCurve((1.0,), (0.0,), (0.0,), (0.0,)))


def test_invalid_circle_rejected():
    with pytest.raises(geo.GeometryError):
        geo.Circle((0, 0), -1.0)


@pytest.mark.parametrize("holes, message", [
    ((geo.Circle((3, 0), 0.5),), "inside"),
    ((geo.Circle((0, 0), 0.5), geo.Circle((0.6, 0), 0.3)), "overlap"),
    ((geo.Circle((0, 0), 0.5), geo.Circle((0.8, 0), 0.3)), "touch"),
    ((geo.Circle((0, 0), 0.8), geo.Circle((0, 0), 0.3)), "nested"),
])
def test_bad_hole_layouts(holes, message):
    with pytest.raises(geo.GeometryError, match=message):
        geo.PlanarDomain(geo.Circle((0, 0), 2.0), holes)


def test_connectivity_and_bbox():
    dom = geo.PlanarDomain(geo.Circle((0, 0), 1.0),
                           (geo.Circle((-0.45, 0), 0.2), geo.Circle((0.45, 0), 0.2)))
    assert dom.connectivity == 3
    assert np.allclose(dom.bounding_box(), (-1, 1, -1, 1), atol=1e-6)


def test_clearance_and_large_circles():
    ann = geo.annulus(1.0, 2.0)
    assert ann.clearance(0) == pytest.approx(0.5, rel=1e-6)
    assert ann.clearance(1) == pytest.approx(0.5, rel=1e-6)
    assert geo.disc(1.0).clearance(0) == np.inf
    # closure is judged relative to the curve's size
    big = geo.annulus(1e-6, 1e6)
    assert big.connectivity == 2


def test_domain_roundtrip(tmp_path):
    dom = geo.PlanarDomain(geo.fourier_disc({3: 0.1}), (geo.Circle((0.1, 0), 0.3),))
    p = tmp_path / "d.json"
    p.write_text(json.dumps(dom.to_dict()))
    back = geo.load_domain(p)
    assert back.to_dict() == dom.to_dict()


def test_malformed_domain_description():
    with pytest.raises(geo.GeometryError):
        geo.PlanarDomain.from_dict({"holes": []})
    with pytest.raises(geo.GeometryError):
        geo.PlanarDomain.from_dict({"outer": {"type": "square"}})


def test_projection_to_annulus_closed_form():
    dom = geo.annulus(0.5, 2.0)
    foot = geo.project_to_boundary(dom, (0.8, 0.0))
    assert foot.curve == 1 and foot.distance == pytest.approx(0.3)
    assert foot.kappa == pytest.approx(-2.0)
    foot = geo.project_to_boundary(dom, (0.0, 1.5))
    assert foot.curve == 0 and foot.distance == pytest.approx(0.5)
    assert np.allclose(foot.foot, (0.0, 2.0))


def test_locate():
    dom = geo.annulus(0.5, 2.0)
    assert geo.locate(dom, (1.0, 0.0)) is geo.Location.INSIDE
    assert geo.locate(dom, (0.1, 0.0)) is geo.Location.OUTSIDE
    assert geo.locate(dom, (3.0, 0.0)) is geo.Location.OUTSIDE
    assert geo.locate(dom, (2.0, 0.0)) is geo.Location.BOUNDARY


def test_segment_crossing_lands_on_boundary():
    dom = geo.PlanarDomain(geo.fourier_disc({3: 0.1}))
    p = np.array([[0.0, 0.0], [0.5, 0.2], [0.1, -0.7]])
    q = np.array([[1.5, 0.0], [1.0, 1.2], [0.1, -1.5]])
    t = geo.segment_crossing(dom, p, q)
    x = p + t[:, None] * (q - p)
    assert np.all((t > 0) & (t <= 1))
    assert np.max(np.abs(geo.signed_distance(dom, x))) < 1e-12


def test_scale_domain():
    dom = geo.PlanarDomain(geo.fourier_disc({3: 0.1}), (geo.Circle((0.1, 0), 0.3),))
    big = geo.scale_domain(dom, 3.0)
    assert geo.perimeter(big.outer) == pytest.approx(3 * geo.perimeter(dom.outer), rel=1e-13)
    assert geo.curvature_radius(big.holes[0]) == pytest.approx(0.9)


perturbed = geo.PlanarDomain(geo.fourier_disc({3: 0.1}))
points = st.tuples(st.floats(-1.3, 1.3), st.floats(-1.3, 1.3))


@settings(max_examples=60, deadline=None)
@given(points)
def test_projection_matches_dense_sampling(p):
    foot = geo.project_to_boundary(perturbed, p)
    s = np.linspace(0, 2 * np.pi, 200_000, endpoint=False)
    dist = lambda t: np.linalg.norm(geo.point(perturbed.outer, t) - np.asarray(p), axis=-1)  # noqa: E731
    s0 = s[np.argmin(dist(s))]
    ds = s[1]
    dense = minimize_scalar(dist, bounds=(s0 - ds, s0 + ds), method="bounded", options={"xatol": 1e-13}).fun
    assert foot.distance == pytest.approx(dense, abs=1e-9)
    assert np.linalg.norm(np.asarray(p) - np.asarray(foot.foot)) == pytest.approx(foot.distance, abs=1e-10)
    on_curve = geo.point(perturbed.outer, foot.s)
    assert np.allclose(on_curve, foot.foot, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(points)
def test_batch_containment_agrees_with_winding(p):
    sd = geo.signed_distance(perturbed, np.asarray([p]))[0]
    if abs(sd) > 1e-6:
        assert geo.contains(perturbed, p) == bool(geo.contains_points(perturbed, np.asarray([p]))[0])
