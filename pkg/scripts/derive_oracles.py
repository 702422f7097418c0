"""Independent reference values for the test suite.

Nothing here imports the package: values come from symbolic series (sympy),
adaptive quadrature (mpmath / scipy) and brute-force enumeration. The output
is frozen into tests/oracle_values.py; rerun to regenerate.
"""

import itertools

import mpmath as mp
import numpy as np
import sympy as sp
from scipy import integrate

mp.mp.dps = 30


def lattice_count(radius, h, half_width):
    n = int(round(half_width / h))
    return sum(1 for i, j in itertools.product(range(-n, n + 1), repeat=2)
               if (i * h) ** 2 + (j * h) ** 2 < radius**2)


def annulus_c3(R):
    """c3 on both circles of r A cos(ln r / A), A = (2/pi) ln(1/R), from the Taylor series in d."""
    d = sp.symbols("d", positive=True)
    Rs = sp.Rational(R).limit_denominator(10**6) if not isinstance(R, sp.Basic) else R
    A = 2 / sp.pi * sp.log(1 / Rs)
    v = lambda r: r * A * sp.cos(sp.log(r) / A)  # noqa: E731
    inner = sp.series(v(Rs + d), d, 0, 4).removeO()
    outer = sp.series(v(1 / Rs - d), d, 0, 4).removeO()
    # kappa = -1/R on the inner (hole) circle, +R on the outer one
    ci = sp.N(inner.coeff(d, 3), 20)
    co = sp.N(outer.coeff(d, 3), 20)
    k_in = sp.N(-2 * inner.coeff(d, 2), 20)
    k_out = sp.N(-2 * outer.coeff(d, 2), 20)
    return float(ci), float(co), float(k_in), float(k_out)


def punctured_disc_c3():
    d = sp.symbols("d", positive=True)
    v = (1 - d) * sp.log(1 / (1 - d))
    s = sp.series(v, d, 0, 4).removeO()
    return float(s.coeff(d, 3)), float(-2 * s.coeff(d, 2))


def strip_c3(L):
    d = sp.symbols("d", positive=True)
    v = 2 * L / sp.pi * sp.cos(sp.pi * (d - L) / (2 * L))
    s = sp.series(v, d, 0, 4).removeO()
    return float(sp.N(s.coeff(d, 3)))


def annulus_domain_integral(R):
    """Integral over the annulus of (v_rr - v_r / r)^2 / (6 v), radially."""
    r = sp.symbols("r", positive=True)
    A = 2 / sp.pi * sp.log(1 / sp.nsimplify(R))
    v = r * A * sp.cos(sp.log(r) / A)
    g = sp.simplify((sp.diff(v, r, 2) - sp.diff(v, r) / r) ** 2 / (6 * v) * 2 * sp.pi * r)
    f = sp.lambdify(r, g, "mpmath")
    return float(mp.quad(f, [R, 1, 1 / R]))


def punctured_bilaplacian():
    x, y = sp.symbols("x y", real=True)
    r = sp.sqrt(x**2 + y**2)
    v = -r * sp.log(r)
    lap = lambda w: sp.diff(w, x, 2) + sp.diff(w, y, 2)  # noqa: E731
    pt = {x: sp.exp(-1), y: 0}
    bil = sp.N(lap(lap(v)).subs(pt), 20)
    gap = sp.N((((sp.diff(v, x, 2) - sp.diff(v, y, 2)) ** 2 + 4 * sp.diff(v, x, y) ** 2) / v).subs(pt), 20)
    return float(bil), float(gap)


def corollary_integral(a):
    """-12 a^4 times the disc integral of (1 - r^2) / |1 + 2 a z|^5 (disc v, f = z + a z^2)."""
    def g(r, t):
        z = r * np.exp(1j * t)
        return (1 - r * r) / abs(1 + 2 * a * z) ** 5 * r
    val, _ = integrate.dblquad(g, 0, 2 * np.pi, 0, 1, epsabs=1e-14, epsrel=1e-13)
    return -12 * a**4 * val


if __name__ == "__main__":
    print("LATTICE_B1_H025 =", lattice_count(1.0, 0.25, 1.0))
    ci, co, ki, ko = annulus_c3(0.5)
    print("ANNULUS_05_C3_INNER =", repr(ci))
    print("ANNULUS_05_C3_OUTER =", repr(co))
    print("ANNULUS_05_KAPPA =", repr((ki, ko)))
    print("PUNCTURED_DISC_C3, KAPPA =", punctured_disc_c3())
    print("STRIP_HALF_PI_C3 =", repr(strip_c3(sp.pi / 2)))
    lhs = 2 * np.pi * 0.5 * ci + 2 * np.pi * 2.0 * co
    print("ANNULUS_05_BOUNDARY_INTEGRAL =", repr(lhs))
    print("ANNULUS_05_DOMAIN_INTEGRAL =", repr(annulus_domain_integral(0.5)))
    for R in (0.8, 0.5, 0.2, 0.05):
        ci, co, _, _ = annulus_c3(R)
        print(f"NORMALIZED R={R}: inner {repr((2 * np.pi * R) ** 2 * ci)}, outer {repr((2 * np.pi / R) ** 2 * co)}")
    print("PUNCTURED_BILAPLACIAN, GAP =", punctured_bilaplacian())
    for a in (0.1, 0.2):
        print(f"COROLLARY a={a}:", repr(corollary_integral(a)))
