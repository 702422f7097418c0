"""Second-order jets of real functions on the plane and their transport.

A :class:`Jet` bundles value, gradient and Hessian of a scalar field at a set
of points. Transport under a holomorphic map ``f`` follows the rule

    U(z) = V(f(z)) / |f'(z)|

and is done entirely in Wirtinger form, so the Hessian of ``U`` is exact
given exact jets of ``V`` and ``f', f'', f'''``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class Jet(NamedTuple):
    v: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    vxx: np.ndarray
    vxy: np.ndarray
    vyy: np.ndarray

    @property
    def laplacian(self):
        return self.vxx + self.vyy

    @property
    def grad_sq(self):
        return self.vx**2 + self.vy**2

    def residual(self):
        """v * lap(v) - |grad v|^2 + 1."""
        return self.v * self.laplacian - self.grad_sq + 1.0

    @property
    def dz(self):
        """Wirtinger derivative d/dz = (d/dx - i d/dy) / 2."""
        return 0.5 * (self.vx - 1j * self.vy)

    @property
    def dzz(self):
        return 0.25 * (self.vxx - self.vyy - 2j * self.vxy)

    @property
    def hessian_gap_sq(self):
        """(v_xx - v_yy)^2 + 4 v_xy^2, the squared eigenvalue gap of the Hessian."""
        return (self.vxx - self.vyy) ** 2 + 4.0 * self.vxy**2

    @classmethod
    def from_complex(cls, v, dz, dzz, lap) -> "Jet":
        return cls(
            v,
            2.0 * dz.real,
            -2.0 * dz.imag,
            0.5 * lap + 2.0 * dzz.real,
            -2.0 * dzz.imag,
            0.5 * lap - 2.0 * dzz.real,
        )

    def reflected(self) -> "Jet":
        """Jet of (x, y) -> V(x, -y), given the jet of V at the reflected points."""
        return Jet(self.v, self.vx, -self.vy, self.vxx, -self.vxy, self.vyy)


def schwarzian_from_jets(f1, f2, f3):
    return f3 / f1 - 1.5 * (f2 / f1) ** 2


def pullback_jet(base: Jet, f1, f2, f3) -> Jet:
    """Jet of z -> V(f(z)) / |f'(z)| from the jet of V at f(z).

    Uses d_z U = g (V_w f' - V f''/(2 f')) and d_zz U = g (V_ww f'^2 - V S(f) / 2)
    with g = 1/|f'|; the Laplacian follows from the product rule with
    lap g = g |f''/f'|^2 (log|f'| is harmonic).
    """
    f1 = np.asarray(f1, dtype=complex)
    g = 1.0 / np.abs(f1)
    q = f2 / f1
    S = f3 / f1 - 1.5 * q**2
    Vw = base.dz
    dz = g * (Vw * f1 - 0.5 * base.v * q)
    dzz = g * (base.dzz * f1**2 - 0.5 * base.v * S)
    gz = -0.5 * g * q
    lap = (g * np.abs(f1) ** 2 * base.laplacian
           + 8.0 * np.real(Vw * f1 * np.conj(gz))
           + base.v * g * np.abs(q) ** 2)
    return Jet.from_complex(base.v * g, dz, dzz, lap)


def inverse_map_jets(f1, f2, f3):
    """Derivatives of f^{-1} at w = f(z), from the derivatives of f at z."""
    F1 = 1.0 / f1
    F2 = -f2 / f1**3
    F3 = -f3 / f1**4 + 3.0 * f2**2 / f1**5
    return F1, F2, F3
