"""Holomorphic maps, the Schwarzian derivative and transport of solutions.

A solution here is anything with ``jet(x, y) -> Jet`` and ``valid(x, y)``.
Transport by a univalent holomorphic map,

    pullback:     U(z) = V(f(z)) / |f'(z)|
    pushforward:  U(w) = V(f^{-1}(w)) |f'(f^{-1}(w))|

maps solutions of v lap v = |grad v|^2 - 1 to solutions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Circle, FourierCurve
from .jets import Jet, inverse_map_jets, pullback_jet, schwarzian_from_jets


class MapError(ValueError):
    pass


class CriticalPointError(MapError):
    """|f'(z)| below 1e-12 where a non-degenerate derivative is needed."""


class UnivalenceError(MapError):
    pass


class InverseError(MapError):
    pass


class AccuracyError(RuntimeError):
    pass


class TransportDomainError(ValueError):
    pass


# -- maps ----------------------------------------------------------------------

class HolomorphicMap:
    def jets(self, z):
        """Return (f, f', f'', f''') at z."""
        raise NotImplementedError

    def __call__(self, z):
        return self.jets(z)[0]

    def inverse(self, w, **kw):
        raise NotImplementedError

    def then(self, other: "HolomorphicMap") -> "Composition":
        """``other`` after ``self``."""
        return Composition((self, other))


@dataclass(frozen=True)
class Affine(HolomorphicMap):
    a: complex = 1.0
    b: complex = 0.0

    def __post_init__(self):
        if abs(self.a) < 1e-12:
            raise MapError("affine map needs a != 0")

    def jets(self, z):
        z = np.asarray(z, dtype=complex)
        zero = np.zeros_like(z)
        return self.a * z + self.b, zero + self.a, zero, zero

    def inverse(self, w, **kw):
        return (np.asarray(w, dtype=complex) - self.b) / self.a

    def to_dict(self):
        return {"type": "affine", "a": _c2j(self.a), "b": _c2j(self.b)}


@dataclass(frozen=True)
class Mobius(HolomorphicMap):
    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        if abs(self.det) <= 1e-12:
            raise MapError("Mobius map needs |ad - bc| > 1e-12")

    @property
    def det(self):
        return self.a * self.d - self.b * self.c

    @classmethod
    def disc_automorphism(cls, z0, rotation: float = 0.0) -> "Mobius":
        """e^{i rotation} (z - z0) / (1 - conj(z0) z), sending z0 to 0."""
        e = np.exp(1j * rotation)
        z0 = complex(z0)
        return cls(e, -e * z0, -np.conj(z0), 1.0)

    def jets(self, z):
        z = np.asarray(z, dtype=complex)
        den = self.c * z + self.d
        det = self.det
        return ((self.a * z + self.b) / den, det / den**2,
                -2 * self.c * det / den**3, 6 * self.c**2 * det / den**4)

    def inverse(self, w, **kw):
        w = np.asarray(w, dtype=complex)
        return (self.d * w - self.b) / (-self.c * w + self.a)

    def to_dict(self):
        return {"type": "mobius", "a": _c2j(self.a), "b": _c2j(self.b),
                "c": _c2j(self.c), "d": _c2j(self.d)}


@dataclass(frozen=True)
class Polynomial(HolomorphicMap):
    """f(z) = sum coeffs[k] z^k.

    The inverse is found by Newton iteration seeded from the nearest image of a
    ``seed_grid`` x ``seed_grid`` lattice on ``seed_box``.
    """

    coeffs: tuple[complex, ...]
    seed_box: tuple[float, float, float, float] = (-1.25, 1.25, -1.25, 1.25)
    seed_grid: int = 128
    _tree: list = field(default_factory=list, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs))
        if len(self.coeffs) < 2 or all(abs(c) == 0 for c in self.coeffs[1:]):
            raise MapError("polynomial map must be non-constant")

    def jets(self, z):
        z = np.asarray(z, dtype=complex)
        p = np.polynomial.polynomial
        c = np.array(self.coeffs)
        d1 = p.polyder(c, 1)
        d2 = p.polyder(c, 2) if len(c) > 2 else np.zeros(1)
        d3 = p.polyder(c, 3) if len(c) > 3 else np.zeros(1)
        return p.polyval(z, c), p.polyval(z, d1), p.polyval(z, d2), p.polyval(z, d3)

    def _seeds(self):
        if not self._tree:
            x0, x1, y0, y1 = self.seed_box
            gx, gy = np.meshgrid(np.linspace(x0, x1, self.seed_grid),
                                 np.linspace(y0, y1, self.seed_grid), indexing="ij")
            z = (gx + 1j * gy).ravel()
            fz = self(z)
            self._tree.append((cKDTree(np.stack([fz.real, fz.imag], -1)), z))
        return self._tree[0]

    def inverse(self, w, tol: float = 1e-12, max_iter: int = 50):
        w = np.asarray(w, dtype=complex)
        shape = w.shape
        w = w.ravel()
        tree, zs = self._seeds()
        _, k = tree.query(np.stack([w.real, w.imag], -1))
        z = zs[k]
        for _ in range(max_iter):
            f, f1, _, _ = self.jets(z)
            step = (f - w) / f1
            z = z - step
            if np.all(np.abs(step) < tol * max(1.0, np.max(np.abs(z)))):
                break
        f = self(z)
        if np.any(np.abs(f - w) > 1e3 * tol * np.maximum(1.0, np.abs(w))):
            raise InverseError("Newton inverse did not converge")
        return z.reshape(shape)

    def to_dict(self):
        return {"type": "polynomial", "coeffs": [_c2j(c) for c in self.coeffs]}


@dataclass(frozen=True)
class Composition(HolomorphicMap):
    """Maps applied in list order: ``maps[-1] o ... o maps[0]``."""

    maps: tuple[HolomorphicMap, ...]

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        if not self.maps:
            raise MapError("empty composition")

    def jets(self, z):
        f, f1, f2, f3 = self.maps[0].jets(z)
        for g in self.maps[1:]:
            g0, g1, g2, g3 = g.jets(f)
            # Faa di Bruno to third order
            f, f1, f2, f3 = (g0, g1 * f1, g2 * f1**2 + g1 * f2,
                             g3 * f1**3 + 3 * g2 * f1 * f2 + g1 * f3)
        return f, f1, f2, f3

    def inverse(self, w, **kw):
        for g in reversed(self.maps):
            w = g.inverse(w, **kw)
        return w

    def to_dict(self):
        return {"type": "compose", "maps": [m.to_dict() for m in self.maps]}


def _c2j(c) -> list[float]:
    c = complex(c)
    return [c.real, c.imag]


def _j2c(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def map_from_dict(d: dict) -> HolomorphicMap:
    kind = d.get("type")
    try:
        if kind == "affine":
            return Affine(_j2c(d.get("a", 1.0)), _j2c(d.get("b", 0.0)))
        if kind == "mobius":
            return Mobius(*(_j2c(d[k]) for k in "abcd"))
        if kind == "polynomial":
            return Polynomial(tuple(_j2c(c) for c in d["coeffs"]))
        if kind == "compose":
            return Composition(tuple(map_from_dict(m) for m in d["maps"]))
    except KeyError as exc:
        raise MapError(f"map description missing field {exc}") from exc
    raise MapError(f"unknown map type {kind!r}")


def load_map(path) -> HolomorphicMap:
    with open(path) as fh:
        return map_from_dict(json.load(fh))


def image_of_circle(f: HolomorphicMap, center: complex = 0.0, radius: float = 1.0):
    """Exact image curve of |z - center| = radius under an affine, Mobius or polynomial map."""
    center = complex(center)
    if isinstance(f, Affine):
        w = f.a * center + f.b
        return Circle((w.real, w.imag), abs(f.a) * radius)
    if isinstance(f, Mobius):
        u = center + radius * np.exp(2j * np.pi * np.array([0.0, 1.0, 2.0]) / 3)
        if np.any(np.abs(f.c * u + f.d) < 1e-12) or abs(f.c * center + f.d) <= abs(f.c) * radius * (1 + 1e-12):
            raise MapError("the pole lies on or inside the circle; the image is unbounded")
        a, b, c = f(u)
        # circumcentre of the three image points
        d = 2 * (a.real * (b.imag - c.imag) + b.real * (c.imag - a.imag) + c.real * (a.imag - b.imag))
        ux = (abs(a) ** 2 * (b.imag - c.imag) + abs(b) ** 2 * (c.imag - a.imag) + abs(c) ** 2 * (a.imag - b.imag)) / d
        uy = (abs(a) ** 2 * (c.real - b.real) + abs(b) ** 2 * (a.real - c.real) + abs(c) ** 2 * (b.real - a.real)) / d
        return Circle((ux, uy), abs(a - complex(ux, uy)))
    if isinstance(f, Polynomial):
        # coefficients of p(center + radius u) in powers of u
        p = np.polynomial.Polynomial(np.array(f.coeffs))
        b = p(np.polynomial.Polynomial([center, radius])).coef
        return FourierCurve(tuple(b.real), tuple(-b.imag), tuple(b.imag), tuple(b.real))
    raise MapError(f"no exact image curve for {type(f).__name__}")


# -- Schwarzian ----------------------------------------------------------------

def schwarzian(f: HolomorphicMap, z):
    """S(f) = f'''/f' - (3/2) (f''/f')^2 from exact jets."""
    _, f1, f2, f3 = f.jets(z)
    if np.any(np.abs(f1) < 1e-12):
        raise CriticalPointError("f'(z) vanishes")
    return schwarzian_from_jets(f1, f2, f3)


def check_univalent(f: HolomorphicMap, z_samples) -> None:
    """Sampled univalence: images pairwise distinct and f' bounded away from 0."""
    z = np.asarray(z_samples, dtype=complex).ravel()
    w, f1, _, _ = f.jets(z)
    if np.any(np.abs(f1) < 1e-12):
        raise CriticalPointError("critical point in the sampled domain")
    pts = np.stack([w.real, w.imag], -1)
    d, _ = cKDTree(pts).query(pts, k=2)
    src = np.stack([z.real, z.imag], -1)
    dz, _ = cKDTree(src).query(src, k=2)
    # collapse of distinct sample points onto one image
    if np.any(d[:, 1] < 1e-9 * np.maximum(dz[:, 1], 1e-300) * np.abs(f1)):
        raise UnivalenceError("two sample points share an image")


def disc_samples(n: int = 128, radius: float = 1.0, center: complex = 0.0):
    g = np.linspace(-radius, radius, n)
    zx, zy = np.meshgrid(g, g, indexing="ij")
    z = (zx + 1j * zy).ravel()
    return center + z[np.abs(z) < radius]


# -- transported solutions ---------------------------------------------------

@dataclass(frozen=True)
class TransportedSolution:
    base: object
    map: HolomorphicMap
    direction: str = "pullback"

    def __post_init__(self):
        if self.direction not in ("pullback", "pushforward"):
            raise ValueError("direction must be 'pullback' or 'pushforward'")

    def _base_points(self, x, y):
        z = np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float)
        if self.direction == "pullback":
            f, f1, f2, f3 = self.map.jets(z)
            return f, (f1, f2, f3)
        zeta = self.map.inverse(z)
        _, f1, f2, f3 = self.map.jets(zeta)
        return zeta, inverse_map_jets(f1, f2, f3)

    def valid(self, x, y):
        try:
            p, (d1, _, _) = self._base_points(x, y)
        except InverseError:
            return np.zeros(np.shape(x), dtype=bool)
        return self.base.valid(p.real, p.imag) & (np.abs(d1) > 1e-12)

    def jet(self, x, y) -> Jet:
        p, (d1, d2, d3) = self._base_points(x, y)
        if np.any(np.abs(d1) < 1e-12):
            raise CriticalPointError("transport through a critical point")
        return pullback_jet(self.base.jet(p.real, p.imag), d1, d2, d3)

    def value(self, x, y):
        return self.jet(x, y).v


def pullback(v2, f: HolomorphicMap, samples=None) -> TransportedSolution:
    """v1(z) = v2(f(z)) / |f'(z)|; ``samples`` (points of the source domain) trigger a univalence check."""
    if samples is not None:
        check_univalent(f, samples)
        w = f(np.asarray(samples, dtype=complex))
        if not np.all(v2.valid(w.real, w.imag)):
            raise TransportDomainError("f maps sample points outside the base domain")
    return TransportedSolution(v2, f, "pullback")


def pushforward(v1, f: HolomorphicMap, samples=None) -> TransportedSolution:
    """v2(w) = v1(f^{-1}(w)) |f'(f^{-1}(w))|."""
    if samples is not None:
        check_univalent(f, samples)
    return TransportedSolution(v1, f, "pushforward")


@dataclass(frozen=True)
class KelvinSolution:
    """z -> v(z0 + (z - z0)/|z - z0|^2) |z - z0|^2."""

    base: object
    z0: complex = 0.0

    def _parts(self, x, y):
        z = np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float)
        u = z - self.z0
        if np.any(np.abs(u) < 1e-12):
            raise CriticalPointError("Kelvin transport is singular at z0")
        # conj of the inversion is the Mobius map m(z) = conj(z0) + 1/(z - z0)
        m = np.conj(self.z0) + 1.0 / u
        return m, (-1.0 / u**2, 2.0 / u**3, -6.0 / u**4)

    def valid(self, x, y):
        z = np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float)
        u = z - self.z0
        ok = np.abs(u) > 1e-12
        img = self.z0 + np.where(ok, u / np.where(ok, np.abs(u) ** 2, 1.0), 0.0)
        return ok & self.base.valid(img.real, img.imag)

    def jet(self, x, y) -> Jet:
        m, (f1, f2, f3) = self._parts(x, y)
        # base evaluated at conj(m) = z0 + (z - z0)/|z - z0|^2, reflected
        base = self.base.jet(m.real, -m.imag).reflected()
        return pullback_jet(base, f1, f2, f3)

    def value(self, x, y):
        return self.jet(x, y).v


def kelvin_transport(v, z0=0.0) -> KelvinSolution:
    return KelvinSolution(v, complex(z0))


def rescale(v, k: float) -> TransportedSolution:
    """v_k(x) = k v(x / k), the solution on the dilated domain k * Omega."""
    if not k > 0:
        raise ValueError("scale k must be positive")
    return TransportedSolution(v, Affine(1.0 / k, 0.0), "pullback")


def c3_rescale(c3, k: float):
    if not k > 0:
        raise ValueError("scale k must be positive")
    return c3 / k**2


# -- global term transform ---------------------------------------------------

def polar_rule(n_r: int, n_theta: int, r0: float = 0.0, r1: float = 1.0):
    """Gauss-Legendre in radius times trapezoid in angle; returns (r, theta, area weights).

    Above 64 radial nodes the rule is composite: equal panels of 16 nodes each.
    """
    order = n_r if n_r <= 64 else 16
    panels = max(1, n_r // order)
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(r0, r1, panels + 1)
    half = 0.5 * np.diff(edges)
    r = (half[:, None] * (xg[None, :] + 1) + edges[:-1, None]).ravel()
    wr = (half[:, None] * wg[None, :]).ravel() * r
    th = np.arange(n_theta) * (2 * np.pi / n_theta)
    R, T = np.meshgrid(r, th, indexing="ij")
    W = np.outer(wr, np.full(n_theta, 2 * np.pi / n_theta))
    return R, T, W


def global_term_integrand(v1, f: HolomorphicMap, x, y):
    """-8 |d_zz v1 + v1 S(f) / 2|^2 / (3 v1 |f'|)."""
    j = v1.jet(x, y)
    _, f1, f2, f3 = f.jets(np.asarray(x) + 1j * np.asarray(y))
    if np.any(np.abs(f1) < 1e-12):
        raise CriticalPointError("critical point in the source domain")
    S = schwarzian_from_jets(f1, f2, f3)
    a = j.dzz + 0.5 * j.v * S
    return -8.0 * np.abs(a) ** 2 / (3.0 * j.v * np.abs(f1))


def global_term_transform_integral(v1, f: HolomorphicMap, r0: float = 0.0, r1: float = 1.0,
                                   center: complex = 0.0, tol: float = 1e-8,
                                   start: tuple[int, int] = (16, 32), max_levels: int = 8,
                                   return_info: bool = False):
    """Integral of c3 over the boundary of f(Omega1), as an area integral over Omega1.

    Omega1 is the disc or annulus ``r0 < |z - center| < r1``. The polar rule is
    doubled in both directions until successive values differ by less than
    ``tol * max(1, |I|)``.
    """
    n_r, n_t = start
    prev = None
    history = []
    for _ in range(max_levels):
        R, T, W = polar_rule(n_r, n_t, r0, r1)
        x = center.real + R * np.cos(T)
        y = center.imag + R * np.sin(T)
        val = float(np.sum(W * global_term_integrand(v1, f, x, y)))
        history.append((n_r, n_t, val))
        if prev is not None and abs(val - prev) < tol * max(1.0, abs(val)):
            return (val, history) if return_info else val
        prev = val
        n_r, n_t = 2 * n_r, 2 * n_t
    raise AccuracyError(f"quadrature did not converge: {history[-2:]}")
