"""Exact solutions of v * lap(v) = |grad v|^2 - 1 on model domains.

Every family returns analytic jets (value, gradient, Hessian); radial families
also expose a fourth-order radial jet for the bilaplacian.

=================  ==========================  =========================================
family             domain                      v
=================  ==========================  =========================================
disc               |z| < R                     (R^2 - |z|^2) / (2R)
exterior_disc      |z| > R                     (|z|^2 - R^2) / (2R)
annulus            R < |z| < 1/R               |z| A cos(ln|z| / A),  A = (2/pi) ln(1/R)
sub_annulus        R < |z| < 1                 |z| B sin(ln(1/|z|) / B),  B = (1/pi) ln(1/R)
punctured_disc     0 < |z| < 1                 |z| ln(1/|z|)
disc_minus_point   |z| < 1, z != z0            |z-z0| |1-z0* z| ln|(1-z0* z)/(z-z0)| / (1-|z0|^2)
exterior_log       |z| > 1                     |z| ln|z|
strip              |y| < L                     (2L/pi) cos(pi y / (2L))
=================  ==========================  =========================================
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Circle, PlanarDomain
from .jets import Jet

FAMILIES = ("disc", "exterior_disc", "annulus", "sub_annulus", "punctured_disc",
            "disc_minus_point", "exterior_log", "strip")

GAP_CONSTANT = -2.0 * np.pi**2 / 3.0
SINGULAR_EPS = 1e-12


class ModelError(ValueError):
    pass


class ParameterError(ModelError):
    pass


class DomainError(ModelError):
    """Evaluation point outside the family's domain of validity."""


class SingularEvaluationError(ModelError):
    """Evaluation at (or within 1e-12 of) a puncture or boundary."""


class UnsupportedError(ModelError):
    pass


@dataclass(frozen=True)
class ClosedFormSolution:
    family: str
    R: float | None = None
    z0: complex | None = None
    L: float | None = None

    def __post_init__(self):
        f = self.family
        if f not in FAMILIES:
            raise ParameterError(f"unknown family {f!r}; choose from {', '.join(FAMILIES)}")
        if f in ("disc", "exterior_disc"):
            if self.R is None or not self.R > 0:
                raise ParameterError(f"{f} needs R > 0")
        elif f in ("annulus", "sub_annulus"):
            if self.R is None or not 0 < self.R < 1:
                raise ParameterError(f"{f} needs 0 < R < 1, got R={self.R}")
        elif f == "disc_minus_point":
            z0 = complex(self.z0 if self.z0 is not None else 0.0)
            if not abs(z0) < 1:
                raise ParameterError("disc_minus_point needs |z0| < 1")
            object.__setattr__(self, "z0", z0)
        elif f == "strip":
            if self.L is None or not self.L > 0:
                raise ParameterError("strip needs L > 0")

    # -- constructors ------------------------------------------------------
    @classmethod
    def disc(cls, R=1.0):
        return cls("disc", R=float(R))

    @classmethod
    def exterior_disc(cls, R=1.0):
        return cls("exterior_disc", R=float(R))

    @classmethod
    def annulus(cls, R):
        return cls("annulus", R=float(R))

    @classmethod
    def sub_annulus(cls, R):
        return cls("sub_annulus", R=float(R))

    @classmethod
    def punctured_disc(cls):
        return cls("punctured_disc")

    @classmethod
    def disc_minus_point(cls, z0):
        return cls("disc_minus_point", z0=complex(z0))

    @classmethod
    def exterior_log(cls):
        return cls("exterior_log")

    @classmethod
    def strip(cls, L):
        return cls("strip", L=float(L))

    # -- geometry of the family ---------------------------------------------
    def _radii(self):
        """(inner, outer) radius bounds for radial families (0 / inf when open)."""
        f, R = self.family, self.R
        return {
            "disc": (0.0, R),
            "exterior_disc": (R, np.inf),
            "annulus": (R, 1.0 / R) if R else None,
            "sub_annulus": (R, 1.0),
            "punctured_disc": (0.0, 1.0),
            "exterior_log": (1.0, np.inf),
        }.get(f)

    def boundary_curves(self) -> list[Circle]:
        """Circles on which v vanishes, oriented with the domain on the left."""
        f = self.family
        if f == "disc":
            return [Circle((0, 0), self.R)]
        if f == "exterior_disc":
            return [Circle((0, 0), self.R, -1)]
        if f == "annulus":
            return [Circle((0, 0), 1.0 / self.R), Circle((0, 0), self.R, -1)]
        if f == "sub_annulus":
            return [Circle((0, 0), 1.0), Circle((0, 0), self.R, -1)]
        if f in ("punctured_disc", "disc_minus_point"):
            return [Circle((0, 0), 1.0)]
        if f == "exterior_log":
            return [Circle((0, 0), 1.0, -1)]
        return []

    def domain(self) -> PlanarDomain:
        """The bounded domain bounded by :meth:`boundary_curves` (punctures ignored)."""
        curves = self.boundary_curves()
        if not curves or curves[0].orientation < 0:
            raise UnsupportedError(f"{self.family} has no bounded domain")
        return PlanarDomain(curves[0], tuple(curves[1:]))

    def signed_margin(self, x, y):
        """Positive inside the domain of validity; distance to its boundary or puncture."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        f = self.family
        if f == "strip":
            return self.L - np.abs(y)
        r = np.hypot(x, y)
        if f == "disc_minus_point":
            return np.minimum(1.0 - r, np.abs((x + 1j * y) - self.z0))
        lo, hi = self._radii()
        if f == "disc":
            return hi - r  # the centre is a regular point
        return np.minimum(r - lo, hi - r)

    def valid(self, x, y):
        return self.signed_margin(x, y) > SINGULAR_EPS

    def _check(self, x, y):
        m = self.signed_margin(x, y)
        if np.any(m < -SINGULAR_EPS):
            raise DomainError(f"point outside the domain of {self.family}")
        if np.any(m <= SINGULAR_EPS):
            raise SingularEvaluationError(f"{self.family} is singular at the evaluation point")

    # -- evaluation ---------------------------------------------------------
    def radial_jet(self, r):
        """(f, f', f'', f''', f'''') in r for radial families."""
        f, R = self.family, self.R
        r = np.asarray(r, dtype=float)
        zero = np.zeros_like(r)
        if f == "disc":
            return ((R * R - r * r) / (2 * R), -r / R, zero - 1 / R, zero, zero)
        if f == "exterior_disc":
            return ((r * r - R * R) / (2 * R), r / R, zero + 1 / R, zero, zero)
        if f in ("annulus", "sub_annulus"):
            # sigma * r B sin(psi), psi = ln r / B + psi0
            if f == "annulus":
                B, psi0, sigma = 2 / np.pi * np.log(1 / R), np.pi / 2, 1.0
            else:
                B, psi0, sigma = 1 / np.pi * np.log(1 / R), 0.0, -1.0
            psi = np.log(r) / B + psi0
            s, c = np.sin(psi), np.cos(psi)
            k = 1 + 1 / B**2
            return (sigma * r * B * s,
                    sigma * (B * s + c),
                    sigma * (c - s / B) / r,
                    -sigma * k * c / r**2,
                    sigma * k * (s / B + 2 * c) / r**3)
        if f in ("punctured_disc", "exterior_log"):
            sg = -1.0 if f == "punctured_disc" else 1.0
            lr = np.log(r)
            return (sg * r * lr, sg * (lr + 1), sg / r, -sg / r**2, 2 * sg / r**3)
        raise UnsupportedError(f"{f} is not radial")

    def jet(self, x, y) -> Jet:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self._check(x, y)
        f = self.family
        if f in ("disc", "exterior_disc"):
            sg = 1.0 if f == "exterior_disc" else -1.0
            R = self.R
            one = np.ones_like(x)
            v = sg * (x * x + y * y - R * R) / (2 * R)
            return Jet(v, sg * x / R, sg * y / R, sg * one / R, 0 * one, sg * one / R)
        if f == "strip":
            k = np.pi / (2 * self.L)
            c, s = np.cos(k * y), np.sin(k * y)
            zero = np.zeros_like(x + y)
            return Jet(c / k + zero, zero, -s + zero, zero, zero, -k * c + zero)
        if f == "disc_minus_point":
            return self._disc_minus_point_jet(x, y)
        r = np.hypot(x, y)
        v, d1, d2, _, _ = self.radial_jet(r)
        cx, cy = x / r, y / r
        t = d1 / r
        return Jet(v, d1 * cx, d1 * cy,
                   d2 * cx * cx + t * cy * cy,
                   (d2 - t) * cx * cy,
                   d2 * cy * cy + t * cx * cx)

    def _disc_minus_point_jet(self, x, y) -> Jet:
        # v = |q| Re(l) / (1 - |z0|^2) with q = (z - z0)(1 - conj(z0) z) and
        # l = log((1 - conj(z0) z) / (z - z0)); q and l are holomorphic
        z0 = self.z0
        zb = np.conj(z0)
        z = x + 1j * y
        q = (z - z0) * (1 - zb * z)
        q1 = 1 - zb * z - zb * (z - z0)
        q2 = -2 * zb
        l1 = -zb / (1 - zb * z) - 1 / (z - z0)
        l2 = -(zb**2) / (1 - zb * z) ** 2 + 1 / (z - z0) ** 2
        aq = np.abs(q)
        L = np.log(np.abs(1 - zb * z)) - np.log(np.abs(z - z0))
        c = 1 - abs(z0) ** 2
        m_z = aq * q1 / (2 * q)
        m_zz = aq * ((q1 / (2 * q)) ** 2 + 0.5 * (q2 / q - (q1 / q) ** 2))
        m_zzb = np.abs(q1) ** 2 / (4 * aq)
        dz = (m_z * L + aq * l1 / 2) / c
        dzz = (m_zz * L + m_z * l1 + aq * l2 / 2) / c
        lap = 4 * (m_zzb * L + 2 * np.real(m_z * np.conj(l1 / 2))) / c
        return Jet.from_complex(aq * L / c, dz, dzz, lap)

    def value(self, x, y):
        return self.jet(x, y).v

    def bilaplacian(self, x, y):
        """lap(lap v), analytic; radial families and the strip only."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self._check(x, y)
        if self.family == "strip":
            k = np.pi / (2 * self.L)
            return k**3 * np.cos(k * y) + 0 * x
        if self.family in ("disc", "exterior_disc"):
            return np.zeros_like(x + y)
        if self.family == "disc_minus_point":
            raise UnsupportedError("bilaplacian is coded for radial families and the strip")
        r = np.hypot(x, y)
        _, d1, d2, d3, d4 = self.radial_jet(r)
        return d4 + 2 * d3 / r - d2 / r**2 + d1 / r**3

    # -- sampling -----------------------------------------------------------
    def sample_interior(self, n: int, rng: np.random.Generator, extent: float = 10.0):
        """Uniform points in the domain of validity (unbounded ones cut at ``extent``)."""
        f = self.family
        if f == "strip":
            x = rng.uniform(-extent, extent, n)
            y = rng.uniform(-self.L, self.L, n)
            return x, y
        if f == "disc_minus_point":
            lo, hi = 0.0, 1.0
        else:
            lo, hi = self._radii()
        hi = min(hi, extent)
        # uniform in area on the annulus lo < r < hi
        r = np.sqrt(rng.uniform(lo * lo, hi * hi, n))
        t = rng.uniform(0, 2 * np.pi, n)
        x, y = r * np.cos(t), r * np.sin(t)
        ok = self.valid(x, y)
        return x[ok], y[ok]


def model_c3(sol: ClosedFormSolution, which: str = "outer") -> float:
    """The printed d^3 coefficient on the named boundary circle ('outer' or 'inner')."""
    f, R = sol.family, sol.R
    if f == "disc" and which == "outer":
        return 0.0
    if f == "exterior_disc" and which == "inner":
        return 0.0
    if f == "annulus":
        A = 2 / np.pi * np.log(1 / R)
        if which == "inner":
            return -1 / (6 * R * R) - 1 / (6 * (A * R) ** 2)
        if which == "outer":
            return -R * R / 6 - R * R / (6 * A * A)
    raise UnsupportedError(f"no printed expansion for {f} on the {which} boundary")


def gap_value(R: float) -> float:
    """Normalised integral (perimeter x integral of c3) on either circle of annulus(R)."""
    if not 0 < R < 1:
        raise ParameterError(f"gap_value needs 0 < R < 1, got {R}")
    A = 2 / np.pi * np.log(1 / R)
    return GAP_CONSTANT - 2 * np.pi**2 / (3 * A * A)


def gap_value_from_coefficients(R: float) -> float:
    """Same quantity assembled from the inner-circle coefficient: (2 pi R)^2 c3."""
    sol = ClosedFormSolution.annulus(R)
    return (2 * np.pi * R) ** 2 * model_c3(sol, "inner")
