"""Planar domains bounded by smooth parametric curves.

Curves are oriented so that the domain lies to the left of the direction of
traversal: the outer boundary runs counter-clockwise, holes run clockwise.
With that convention the signed curvature of a circle bounding a disc is
``+1/R`` and that of a circular hole is ``-1/R``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

TWO_PI = 2.0 * np.pi

N_SEED = 256
N_CHECK = 1024
N_PERIMETER = 4096
BOUNDARY_EPS = 1e-10


class GeometryError(ValueError):
    """Invalid curve or domain (non-closed, singular, self-intersecting...)."""


class RegularityError(GeometryError):
    pass


class Location(Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float
    orientation: int = 1

    period = TWO_PI

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError(f"circle radius must be positive, got {self.radius}")
        if self.orientation not in (1, -1):
            raise GeometryError("orientation must be +1 or -1")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "radius", float(self.radius))

    def derivatives(self, s, order: int = 3):
        """Return ``[(x, y), (x', y'), ...]`` up to ``order`` at parameter(s) ``s``."""
        s = np.asarray(s, dtype=float)
        o = self.orientation
        c, sn = np.cos(o * s), np.sin(o * s)
        r = self.radius
        # d^k/ds^k (cos(o s), sin(o s)) rotates by o*pi/2 per derivative
        out = [(self.center[0] + r * c, self.center[1] + r * sn)]
        cx, cy = c, sn
        for _ in range(order):
            cx, cy = -o * cy, o * cx
            out.append((r * cx, r * cy))
        return out

    def reversed(self) -> "Circle":
        return Circle(self.center, self.radius, -self.orientation)

    def to_dict(self) -> dict:
        return {"type": "circle", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class FourierCurve:
    """x(s) = sum ax[k] cos ks + bx[k] sin ks, same for y; k = 0, 1, ...; period 2*pi."""

    ax: tuple[float, ...]
    bx: tuple[float, ...]
    ay: tuple[float, ...]
    by: tuple[float, ...]

    period = TWO_PI

    def __post_init__(self):
        n = max(len(self.ax), len(self.bx), len(self.ay), len(self.by), 1)
        for name in ("ax", "bx", "ay", "by"):
            c = [float(t) for t in getattr(self, name)]
            object.__setattr__(self, name, tuple(c + [0.0] * (n - len(c))))

    @property
    def order(self) -> int:
        return len(self.ax) - 1

    def derivatives(self, s, order: int = 3):
        s = np.asarray(s, dtype=float)
        k = np.arange(self.order + 1, dtype=float)
        ks = np.multiply.outer(s, k)
        cos, sin = np.cos(ks), np.sin(ks)
        ax, bx = np.array(self.ax), np.array(self.bx)
        ay, by = np.array(self.ay), np.array(self.by)
        out = []
        for m in range(order + 1):
            # m-th derivative of (a cos ks + b sin ks)
            km = k**m
            phase = m % 4
            if phase == 0:
                fc, fs = cos, sin
                sc, ss = 1.0, 1.0
            elif phase == 1:
                fc, fs = sin, cos
                sc, ss = -1.0, 1.0
            elif phase == 2:
                fc, fs = cos, sin
                sc, ss = -1.0, -1.0
            else:
                fc, fs = sin, cos
                sc, ss = 1.0, -1.0
            x = fc @ (sc * ax * km) + fs @ (ss * bx * km)
            y = fc @ (sc * ay * km) + fs @ (ss * by * km)
            out.append((x, y))
        return out

    def reversed(self) -> "FourierCurve":
        # s -> -s flips the sign of every sine coefficient
        return FourierCurve(self.ax, tuple(-b for b in self.bx), self.ay, tuple(-b for b in self.by))

    def to_dict(self) -> dict:
        return {"type": "fourier", "ax": list(self.ax), "bx": list(self.bx),
                "ay": list(self.ay), "by": list(self.by)}


BoundaryCurve = Circle | FourierCurve


def point(curve: BoundaryCurve, s):
    x, y = curve.derivatives(s, 0)[0]
    return np.stack([x, y], axis=-1)


def tangent(curve: BoundaryCurve, s):
    x1, y1 = curve.derivatives(s, 1)[1]
    return np.stack([x1, y1], axis=-1)


def inward_normal(curve: BoundaryCurve, s):
    """Unit normal pointing into the domain (left of the tangent)."""
    t = tangent(curve, s)
    speed = np.linalg.norm(t, axis=-1, keepdims=True)
    return np.stack([-t[..., 1], t[..., 0]], axis=-1) / speed


def curvature(curve: BoundaryCurve, s):
    """Signed curvature under the domain-on-left orientation."""
    (_, _), (x1, y1), (x2, y2) = curve.derivatives(s, 2)
    speed = np.hypot(x1, y1)
    if np.any(speed < 1e-12):
        raise RegularityError("degenerate tangent: |gamma'| < 1e-12")
    return (x1 * y2 - y1 * x2) / speed**3


def perimeter(curve: BoundaryCurve, n: int = N_PERIMETER) -> float:
    s = np.linspace(0.0, curve.period, n, endpoint=False)
    speed = np.linalg.norm(tangent(curve, s), axis=-1)
    # closed trapezoid on a periodic integrand
    return float(speed.sum() * curve.period / n)


def signed_area(curve: BoundaryCurve, n: int = N_PERIMETER) -> float:
    s = np.linspace(0.0, curve.period, n, endpoint=False)
    (x, y), (x1, y1) = curve.derivatives(s, 1)
    return float(0.5 * np.sum(x * y1 - y * x1) * curve.period / n)


def polyline(curve: BoundaryCurve, n: int = N_CHECK) -> np.ndarray:
    s = np.linspace(0.0, curve.period, n, endpoint=False)
    return point(curve, s)


def check_curve(curve: BoundaryCurve) -> None:
    """Raise GeometryError unless the curve is closed, regular and (numerically) simple."""
    p0, p1 = point(curve, 0.0), point(curve, curve.period)
    if np.linalg.norm(p0 - p1) > 1e-12 * max(1.0, float(np.max(np.abs(p0)))):
        raise GeometryError("curve is not closed")
    s = np.linspace(0.0, curve.period, N_CHECK, endpoint=False)
    if np.min(np.linalg.norm(tangent(curve, s), axis=-1)) <= 1e-12:
        raise RegularityError("curve is not regular")
    if _self_intersects(polyline(curve)):
        raise GeometryError("curve self-intersects")


def _segments_cross(a0, a1, b0, b1, tol=1e-9):
    def cross(u, v):
        return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]

    da, db = a1 - a0, b1 - b0
    d1 = cross(da, b0 - a0)
    d2 = cross(da, b1 - a0)
    d3 = cross(db, a0 - b0)
    d4 = cross(db, a1 - b0)
    return (d1 * d2 < -tol * tol) & (d3 * d4 < -tol * tol)


def _self_intersects(poly: np.ndarray) -> bool:
    n = len(poly)
    # a crossing through two vertices is invisible to the strict segment test
    for i, j in cKDTree(poly).query_pairs(1e-9):
        if min(abs(i - j), n - abs(i - j)) > 1:
            return True
    a0, a1 = poly, np.roll(poly, -1, axis=0)
    for i in range(n):
        # skip the segment itself and its two neighbours
        j = np.arange(i + 2, n - 1 if i == 0 else n)
        if len(j) == 0:
            continue
        if np.any(_segments_cross(a0[i], a1[i], a0[j], a1[j])):
            return True
    return False


def _polyline_separation(p: np.ndarray, q: np.ndarray) -> float:
    d, _ = cKDTree(q).query(p)
    return float(np.min(d))


def winding_number(poly: np.ndarray, pts) -> np.ndarray:
    """Winding number of a closed polyline around each point."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    a = poly[None, :, :] - pts[:, None, :]
    b = np.roll(poly, -1, axis=0)[None, :, :] - pts[:, None, :]
    ang = np.arctan2(a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
                     a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1])
    return np.rint(ang.sum(axis=1) / TWO_PI).astype(int)


@dataclass(frozen=True)
class BoundaryFoot:
    curve: int
    s: float
    foot: tuple[float, float]
    distance: float
    kappa: float


@dataclass(frozen=True)
class PlanarDomain:
    """Bounded domain: an outer curve minus the closed interiors of the holes.

    Orientation is normalised on construction (outer counter-clockwise, holes
    clockwise), so callers may pass curves in either direction.
    """

    outer: BoundaryCurve
    holes: tuple[BoundaryCurve, ...] = ()
    _polys: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        outer = self.outer
        if signed_area(outer) < 0:
            outer = outer.reversed()
        holes = []
        for h in self.holes:
            holes.append(h.reversed() if signed_area(h) > 0 else h)
        object.__setattr__(self, "outer", outer)
        object.__setattr__(self, "holes", tuple(holes))
        for c in self.curves:
            check_curve(c)
        polys = tuple(polyline(c, N_PERIMETER) for c in self.curves)
        object.__setattr__(self, "_polys", polys)
        for i, hp in enumerate(polys[1:], start=1):
            if np.any(winding_number(polys[0], hp[:: len(hp) // 64]) == 0):
                raise GeometryError(f"hole {i - 1} is not inside the outer curve")
            if _polyline_separation(hp, polys[0]) <= 1e-9:
                raise GeometryError(f"hole {i - 1} touches the outer curve")
            for j in range(i + 1, len(polys)):
                if _polyline_separation(hp, polys[j]) <= 1e-9:
                    raise GeometryError(f"holes {i - 1} and {j - 1} touch")
                a_in_b = winding_number(polys[j], hp[:: len(hp) // 64]) != 0
                b_in_a = winding_number(hp, polys[j][:: len(polys[j]) // 64]) != 0
                if a_in_b.all() or b_in_a.all():
                    raise GeometryError(f"holes {i - 1} and {j - 1} are nested")
                if a_in_b.any() or b_in_a.any():
                    raise GeometryError(f"holes {i - 1} and {j - 1} overlap")

    @property
    def curves(self) -> tuple[BoundaryCurve, ...]:
        return (self.outer, *self.holes)

    @property
    def connectivity(self) -> int:
        return 1 + len(self.holes)

    def bounding_box(self) -> tuple[float, float, float, float]:
        s = np.linspace(0.0, TWO_PI, 8 * N_PERIMETER, endpoint=False)
        p = point(self.outer, s)
        return float(p[:, 0].min()), float(p[:, 0].max()), float(p[:, 1].min()), float(p[:, 1].max())

    def feature_size(self) -> float:
        """Smallest of: radius of curvature, half the gap between curves."""
        sizes = []
        s = np.linspace(0.0, TWO_PI, N_CHECK, endpoint=False)
        for c in self.curves:
            sizes.append(1.0 / max(np.max(np.abs(curvature(c, s))), 1e-300))
        polys = self._polys
        for i in range(len(polys)):
            for j in range(i + 1, len(polys)):
                sizes.append(0.5 * _polyline_separation(polys[i], polys[j]))
        return float(min(sizes))

    def clearance(self, i: int) -> float:
        """Half the distance from curve i to the nearest other curve (inf for a single curve)."""
        polys = self._polys
        gaps = [_polyline_separation(polys[i], polys[j]) for j in range(len(polys)) if j != i]
        return 0.5 * min(gaps) if gaps else float("inf")

    # -- serialisation ---------------------------------------------------
    def to_dict(self) -> dict:
        return {"outer": self.outer.to_dict(), "holes": [h.to_dict() for h in self.holes]}

    @classmethod
    def from_dict(cls, data: dict) -> "PlanarDomain":
        try:
            outer = curve_from_dict(data["outer"])
            holes = tuple(curve_from_dict(h) for h in data.get("holes", []))
        except (KeyError, TypeError) as exc:
            raise GeometryError(f"malformed domain description: {exc}") from exc
        return cls(outer, holes)


def curve_from_dict(d: dict) -> BoundaryCurve:
    kind = d.get("type")
    if kind == "circle":
        return Circle(tuple(d["center"]), float(d["radius"]))
    if kind == "fourier":
        return FourierCurve(tuple(d.get("ax", [])), tuple(d.get("bx", [])),
                            tuple(d.get("ay", [])), tuple(d.get("by", [])))
    raise GeometryError(f"unknown curve type {kind!r}")


def load_domain(path) -> PlanarDomain:
    with open(path) as fh:
        return PlanarDomain.from_dict(json.load(fh))


def disc(radius: float = 1.0, center=(0.0, 0.0)) -> PlanarDomain:
    return PlanarDomain(Circle(center, radius))


def annulus(inner: float, outer: float, center=(0.0, 0.0)) -> PlanarDomain:
    return PlanarDomain(Circle(center, outer), (Circle(center, inner, -1),))


def fourier_disc(modes: dict[int, float], radius: float = 1.0) -> FourierCurve:
    """Curve r(theta) = radius * (1 + sum eps_m cos m theta) written as a Fourier curve.

    The product r(s) (cos s, sin s) is expanded exactly, so the returned curve
    is the polar graph itself and not an approximation.
    """
    m_max = max(modes) + 1 if modes else 1
    ax = np.zeros(m_max + 1)
    ay = np.zeros(m_max + 1)
    bx = np.zeros(m_max + 1)
    by = np.zeros(m_max + 1)
    ax[1] += radius
    by[1] += radius
    for m, eps in modes.items():
        a = radius * eps
        # cos(m s) cos s = (cos((m+1)s) + cos((m-1)s)) / 2
        ax[m + 1] += a / 2
        ax[abs(m - 1)] += a / 2
        # cos(m s) sin s = (sin((m+1)s) - sin((m-1)s)) / 2
        by[m + 1] += a / 2
        if m - 1 > 0:
            by[m - 1] -= a / 2
        elif m - 1 < 0:
            by[1 - m] += a / 2
    return FourierCurve(tuple(ax), tuple(bx), tuple(ay), tuple(by))


def scale_curve(curve: BoundaryCurve, k: float) -> BoundaryCurve:
    """Image of the curve under z -> k z (k > 0)."""
    if not k > 0:
        raise GeometryError("scale factor must be positive")
    if isinstance(curve, Circle):
        return Circle((k * curve.center[0], k * curve.center[1]), k * curve.radius, curve.orientation)
    return FourierCurve(*(tuple(k * c for c in getattr(curve, n)) for n in ("ax", "bx", "ay", "by")))


def scale_domain(domain: PlanarDomain, k: float) -> PlanarDomain:
    return PlanarDomain(scale_curve(domain.outer, k), tuple(scale_curve(h, k) for h in domain.holes))


def curvature_radius(curve: BoundaryCurve, n: int = 256) -> float:
    """Smallest radius of curvature over ``n`` samples (inf for a straight curve)."""
    if isinstance(curve, Circle):
        return curve.radius
    k = np.max(np.abs(curvature(curve, np.arange(n) * (TWO_PI / n))))
    return float(1.0 / k) if k > 0 else np.inf


# -- projection --------------------------------------------------------------

def _project_circle(c: Circle, pts: np.ndarray):
    dx = pts[:, 0] - c.center[0]
    dy = pts[:, 1] - c.center[1]
    rho = np.hypot(dx, dy)
    theta = np.where(rho > 0, np.arctan2(dy, dx), 0.0)
    s = np.mod(c.orientation * theta, TWO_PI)
    foot = point(c, s)
    d = np.abs(rho - c.radius)
    return s, foot, d


def _project_curve(c: BoundaryCurve, pts: np.ndarray, n_seed: int = N_SEED, n_starts: int = 4):
    if isinstance(c, Circle):
        return _project_circle(c, pts)
    ds = c.period / n_seed
    seeds = np.arange(n_seed) * ds
    # several starts: distinct local minima can be nearly equidistant
    _, kk = cKDTree(point(c, seeds)).query(pts, k=n_starts)
    best = None
    for k in np.atleast_2d(kk.T):
        s, foot, d = _refine_foot(c, pts, k, ds)
        if best is None:
            best = [s, foot, d]
        else:
            better = d < best[2]
            best[0] = np.where(better, s, best[0])
            best[1] = np.where(better[:, None], foot, best[1])
            best[2] = np.where(better, d, best[2])
    return tuple(best)


def _refine_foot(c: BoundaryCurve, pts: np.ndarray, k: np.ndarray, ds: float):
    lo = (k - 1) * ds
    hi = (k + 1) * ds
    s = k * ds

    def g_and_dg(s):
        (x, y), (x1, y1), (x2, y2) = c.derivatives(s, 2)
        ex, ey = x - pts[:, 0], y - pts[:, 1]
        return x1 * ex + y1 * ey, x1 * x1 + y1 * y1 + x2 * ex + y2 * ey

    glo, _ = g_and_dg(lo)
    ghi, _ = g_and_dg(hi)
    bracketed = (glo <= 0) & (ghi >= 0)
    # safeguarded Newton (rtsafe) on g(s) = gamma'(s) . (gamma(s) - p)
    for _ in range(60):
        g, dg = g_and_dg(s)
        lo = np.where(bracketed & (g < 0), s, lo)
        hi = np.where(bracketed & (g > 0), s, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dg > 0, g / dg, 0.0)
        s_new = s - step
        bad = bracketed & ((s_new <= lo) | (s_new >= hi) | (dg <= 0))
        s_new = np.where(bad, 0.5 * (lo + hi), s_new)
        unbr = ~bracketed & ((dg <= 0) | (np.abs(step) > ds))
        s_new = np.where(unbr, s - np.sign(g) * 0.5 * ds, s_new)
        done = np.abs(s_new - s) < 1e-15 * max(1.0, c.period)
        s = s_new
        if np.all(done):
            break
    s = np.mod(s, c.period)
    foot = point(c, s)
    d = np.linalg.norm(pts - foot, axis=-1)
    return s, foot, d


def project_points(domain: PlanarDomain, pts) -> dict:
    """Vectorised nearest-boundary query.

    Returns a dict of arrays: ``curve``, ``s``, ``foot`` (N, 2), ``distance``,
    ``kappa`` and ``signed`` (positive on the domain side).
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    best_d = np.full(len(pts), np.inf)
    best_i = np.zeros(len(pts), dtype=int)
    best_s = np.zeros(len(pts))
    best_f = np.zeros((len(pts), 2))
    signed = np.full(len(pts), np.inf)
    for i, c in enumerate(domain.curves):
        s, foot, d = _project_curve(c, pts)
        side = np.einsum("ij,ij->i", pts - foot, inward_normal(c, s))
        sd = np.where(side >= 0, d, -d)
        signed = np.minimum(signed, sd)
        # strict '<' keeps the lowest curve index on ties
        take = d < best_d
        best_d = np.where(take, d, best_d)
        best_i = np.where(take, i, best_i)
        best_s = np.where(take, s, best_s)
        best_f = np.where(take[:, None], foot, best_f)
    kappa = np.empty(len(pts))
    for i, c in enumerate(domain.curves):
        m = best_i == i
        if np.any(m):
            kappa[m] = curvature(c, best_s[m])
    return {"curve": best_i, "s": best_s, "foot": best_f, "distance": best_d,
            "kappa": kappa, "signed": signed}


def project_to_boundary(domain: PlanarDomain, p) -> BoundaryFoot:
    r = project_points(domain, np.asarray(p, dtype=float)[None, :])
    return BoundaryFoot(int(r["curve"][0]), float(r["s"][0]), tuple(r["foot"][0]),
                        float(r["distance"][0]), float(r["kappa"][0]))


def signed_distance(domain: PlanarDomain, pts) -> np.ndarray:
    """Distance to the boundary, positive inside the domain and negative outside."""
    return project_points(domain, pts)["signed"]


def locate(domain: PlanarDomain, p) -> Location:
    """Winding-number classification of a single point."""
    p = np.asarray(p, dtype=float)
    if project_to_boundary(domain, p).distance <= BOUNDARY_EPS:
        return Location.BOUNDARY
    polys = domain._polys
    # polyline chords sit within ~1e-6 of the curve; settle close calls exactly
    sd = signed_distance(domain, p[None, :])[0]
    if abs(sd) < 1e-5:
        return Location.INSIDE if sd > 0 else Location.OUTSIDE
    if winding_number(polys[0], p)[0] == 0:
        return Location.OUTSIDE
    for hp in polys[1:]:
        if winding_number(hp, p)[0] != 0:
            return Location.OUTSIDE
    return Location.INSIDE


def contains(domain: PlanarDomain, p) -> bool:
    return locate(domain, p) is Location.INSIDE


def contains_points(domain: PlanarDomain, pts) -> np.ndarray:
    """Batch containment via the sign of the distance to the nearest boundary point.

    Agrees with :func:`contains` away from the ``BOUNDARY_EPS`` band; points in
    the band count as outside.
    """
    return signed_distance(domain, pts) > BOUNDARY_EPS


def segment_crossing(domain: PlanarDomain, p, q, tol: float = 1e-15) -> np.ndarray:
    """Fraction t in (0, 1] where the segments p -> q first leave the domain.

    ``p`` must be inside and ``q`` outside (or on the boundary). Solved by
    Illinois regula falsi on the signed distance.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    a = np.zeros(len(p))
    b = np.ones(len(p))
    fa = signed_distance(domain, p)
    fb = signed_distance(domain, q)
    done = fb >= 0  # q on the boundary up to round-off
    b = np.where(done, 1.0, b)
    fb = np.where(done, 0.0, fb)
    side = np.zeros(len(p))
    t = b.copy()
    for _ in range(100):
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(fa != fb, (a * fb - b * fa) / (fb - fa), 0.5 * (a + b))
        t = np.clip(t, a, b)
        ft = signed_distance(domain, p + t[:, None] * (q - p))
        pos = ft > 0
        # Illinois modification keeps the stale endpoint from stalling
        fb = np.where(pos & (side > 0), 0.5 * fb, fb)
        fa = np.where(~pos & (side < 0), 0.5 * fa, fa)
        a = np.where(pos, t, a)
        fa = np.where(pos, ft, fa)
        b = np.where(pos, b, t)
        fb = np.where(pos, fb, ft)
        side = np.where(pos, 1.0, -1.0)
        if np.all((b - a < tol) | (np.abs(ft) < 1e-15) | done):
            break
    return np.where(done, 1.0, np.where(np.abs(ft) < 1e-15, t, 0.5 * (a + b)))
