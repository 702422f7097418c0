import csv
import struct

import numpy as np
import pytest

from llab import conformal as cf
from llab import geometry as geo
from llab import solver
from llab.models import ClosedFormSolution as CFS

import oracle_values as ov


def closed_form_error(sol, exact):
    xy = sol.grid.xy
    return float(np.max(np.abs(sol.values - exact.value(xy[:, 0], xy[:, 1]))))


def b2_minus_b1():
    """B_2 minus closed B_1 and its closed form: annulus(1/sqrt 2) dilated by sqrt 2."""
    return geo.annulus(1.0, 2.0), cf.rescale(CFS.annulus(1 / np.sqrt(2)), np.sqrt(2))


# -- grid ------------------------------------------------------------------------

def test_lattice_count_unit_disc():
    g = solver.build_grid(geo.disc(1.0), 0.25)
    assert g.n == ov.LATTICE_B1_H025


def test_grid_classification_matches_containment():
    dom = geo.annulus(1.0, 2.0)
    g = solver.build_grid(dom, 0.1)
    xs, ys = g.lattice()
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    assert np.all(g.node_class[np.hypot(X, Y) < 1.0] == solver.EXTERIOR)
    inside = geo.contains_points(dom, np.stack([X.ravel(), Y.ravel()], -1)).reshape(X.shape)
    assert np.array_equal(g.index >= 0, inside)


def test_grid_invariants():
    g = solver.build_grid(geo.PlanarDomain(geo.fourier_disc({3: 0.1})), 1 / 32)
    assert np.all((g.arms > 0) & (g.arms <= 1))
    full = g.nbr >= 0
    assert np.all(g.arms[full] == 1.0)
    # every neighbour of a fully interior node is an unknown
    assert np.all(full[g.node_class[g.ij[:, 0], g.ij[:, 1]] == solver.INTERIOR])
    # cut points lie on the boundary
    k = np.argwhere(~full)
    steps = np.array(solver.DIRS)[k[:, 1]]
    pts = g.xy[k[:, 0]] + g.h * g.arms[k[:, 0], k[:, 1]][:, None] * steps
    assert np.max(np.abs(geo.signed_distance(g.domain, pts))) < 1e-12


def test_grid_is_deterministic():
    a = solver.build_grid(geo.annulus(0.5, 2.0), 0.05)
    b = solver.build_grid(geo.annulus(0.5, 2.0), 0.05)
    assert np.array_equal(a.arms, b.arms) and np.array_equal(a.index, b.index)


def test_empty_window_is_a_resolution_error():
    with pytest.raises(solver.ResolutionError):
        solver.build_grid(geo.disc(1.0), 0.1, window=(5.0, 6.0, 5.0, 6.0))


def test_too_coarse_grid_is_a_resolution_error():
    # a thin ring leaves nodes with three or more cut arms
    with pytest.raises(solver.ResolutionError):
        solver.build_grid(geo.annulus(1.0, 1.05), 0.1)


def test_bad_config():
    with pytest.raises(ValueError):
        solver.SolverConfig(h=0.0)
    with pytest.raises(ValueError):
        solver.SolverConfig(h=0.1, tol=0.0)


# -- operator --------------------------------------------------------------------

def test_jacobian_matches_directional_differences(rng):
    g = solver.build_grid(geo.PlanarDomain(geo.fourier_disc({3: 0.1})), 1 / 16)
    op = solver.Operator(g)
    v = g.sdist[g.ij[:, 0], g.ij[:, 1]] * (1 + 0.1 * rng.uniform(size=g.n))
    w = rng.standard_normal(g.n)
    eps = 1e-6
    fd = (op.residual(v + eps * w) - op.residual(v - eps * w)) / (2 * eps)
    jw = op.jacobian(v) @ w
    assert np.linalg.norm(fd - jw) <= 1e-6 * np.linalg.norm(jw)


def test_operator_exact_on_quadratics():
    # the unequal-arm stencils differentiate quadratics exactly
    g = solver.build_grid(geo.disc(1.0), 1 / 16)
    op = solver.Operator(g)
    x, y = g.xy.T
    lap, gx, gy = op.parts(0.5 * (1 - x * x - y * y))
    assert np.allclose(lap, -2.0, atol=1e-10)
    assert np.allclose(gx, -x, atol=1e-12) and np.allclose(gy, -y, atol=1e-12)


# -- solve -------------------------------------------------------------------------

def test_disc_solution_accuracy(solved_disc_32):
    sol = solver.solve(geo.disc(1.0), solver.SolverConfig(h=1 / 64))
    assert sol.converged
    assert closed_form_error(sol, CFS.disc(1.0)) <= 5e-4
    assert np.all(sol.values > 0)
    assert sol.history[-1] <= 1e-10


def test_disc_error_stays_at_rounding_level():
    # the disc solution is quadratic, so the scheme reproduces it at every h
    errs = [closed_form_error(solver.solve(geo.disc(1.0), solver.SolverConfig(h=h)), CFS.disc(1.0))
            for h in (1 / 32, 1 / 64, 1 / 128)]
    assert max(errs) < 1e-12


def test_grid_convergence_on_annulus():
    dom, exact = b2_minus_b1()
    e32 = closed_form_error(solver.solve(dom, solver.SolverConfig(h=1 / 32)), exact)
    e128 = closed_form_error(solver.solve(dom, solver.SolverConfig(h=1 / 128)), exact)
    assert e128 <= 1e-3
    assert e32 / e128 >= 3.0


def test_newton_from_exact_solution_converges_immediately():
    g = solver.build_grid(geo.disc(1.0), 1 / 32)
    exact = CFS.disc(1.0).value(*g.xy.T)
    sol = solver.solve(geo.disc(1.0), solver.SolverConfig(h=1 / 32, initial=exact), grid=g)
    assert len(sol.history) - 1 <= 2


def test_newton_converges_quadratically(solved_annulus_64):
    hist = np.array(solved_annulus_64.history)
    assert hist[-1] <= 1e-10
    # once in the basin, each step at least squares the error (up to a constant)
    tail = hist[hist < 1e-2]
    if len(tail) >= 2:
        assert tail[1] <= 10 * tail[0] ** 1.5


def test_residual_norm(solved_disc_32, solved_annulus_64):
    for sol in (solved_disc_32, solved_annulus_64):
        assert solver.residual_norm(sol) == pytest.approx(sol.history[-1], abs=1e-14)
        assert solver.residual_norm(sol) <= 1e-10
    dom, exact = b2_minus_b1()
    g = solver.build_grid(dom, 1 / 64)
    sampled = solver.DiscreteSolution(g, exact.value(*g.xy.T), [], False)
    trunc = solver.residual_norm(sampled)
    assert 1e-7 < trunc < 1e-2
    bumped = solver.DiscreteSolution(solved_disc_32.grid, solved_disc_32.values.copy(), [], False)
    bumped.values[len(bumped.values) // 2] += 1e-3
    assert solver.residual_norm(bumped) > solver.residual_norm(solved_disc_32)


def test_divergence_error_carries_history():
    with pytest.raises(solver.DivergenceError) as info:
        solver.solve(geo.annulus(0.5, 2.0), solver.SolverConfig(h=1 / 16, max_iter=1))
    assert len(info.value.history) >= 1


def test_nonpositive_initial_guess_rejected():
    g = solver.build_grid(geo.disc(1.0), 1 / 8)
    with pytest.raises(solver.PositivityError):
        solver.solve(geo.disc(1.0), solver.SolverConfig(h=1 / 8, initial=-np.ones(g.n)), grid=g)


def test_comparison_principle_on_grid():
    h = 1 / 64
    small = solver.solve(geo.annulus(1.0, 2.0), solver.SolverConfig(h=h))
    big = solver.solve(geo.disc(2.0), solver.SolverConfig(h=h))
    xy = small.grid.xy
    i = np.rint((xy[:, 0] - big.grid.x0) / h).astype(int)
    j = np.rint((xy[:, 1] - big.grid.y0) / h).astype(int)
    v_big = big.values[big.grid.index[i, j]]
    assert np.all(big.grid.index[i, j] >= 0)
    assert np.all(small.values <= v_big + 1e-8)


def test_rotational_symmetry(solved_annulus_64):
    sol = solved_annulus_64
    g = sol.grid
    F = sol.field()
    # the lattice is symmetric under quarter turns about the origin
    i = np.rint(-g.x0 / g.h).astype(int)
    j = np.rint(-g.y0 / g.h).astype(int)
    assert i == j and g.nx == g.ny and 2 * i == g.nx - 1
    orbit = [np.rot90(F, k) for k in range(4)]
    mean = np.mean(orbit, axis=0)
    ok = ~np.isnan(mean)
    assert np.max(np.abs(F[ok] - mean[ok])) <= 1e-8


def test_interpolant_reproduces_nodes_and_closed_form(solved_annulus_64):
    sol = solved_annulus_64
    xy = sol.grid.xy[::50]
    assert np.allclose(sol.value(xy[:, 0], xy[:, 1]), sol.values[::50], atol=1e-13)
    exact = CFS.annulus(0.5)
    pts = np.array([[0.7, 0.1], [-1.2, 0.9], [0.0, -1.9]])
    assert np.allclose(sol.value(pts[:, 0], pts[:, 1]), exact.value(pts[:, 0], pts[:, 1]), atol=5e-4)
    with pytest.raises(solver.WindowError):
        sol.value(10.0, 0.0)


# -- file formats --------------------------------------------------------------------

def test_lvf1_roundtrip(tmp_path, solved_disc_32):
    p = tmp_path / "v.lvf"
    solved_disc_32.save_binary(p)
    raw = p.read_bytes()
    assert raw[:4] == b"LVF1"
    g = solved_disc_32.grid
    assert struct.unpack("<qqddd", raw[4:44]) == (g.nx, g.ny, g.x0, g.y0, g.h)
    assert len(raw) == 44 + 8 * g.nx * g.ny
    nx, ny, x0, y0, h, vals = solver.read_field(p)
    F = solved_disc_32.field()
    assert np.array_equal(np.isnan(vals), np.isnan(F))
    assert np.array_equal(vals[~np.isnan(F)], F[~np.isnan(F)])
    # row-major: the second stored value is node (1, 0)
    first_row = np.frombuffer(raw[44:44 + 16], "<f8")
    assert np.array_equal(first_row, F[:2, 0], equal_nan=True)


def test_lvf1_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.lvf"
    p.write_bytes(b"XXXX" + bytes(40))
    with pytest.raises(ValueError):
        solver.read_field(p)
    p.write_bytes(b"LVF1" + struct.pack("<qqddd", 3, 3, 0.0, 0.0, 1.0) + bytes(8))
    with pytest.raises(ValueError):
        solver.read_field(p)


def test_csv_export(tmp_path, solved_disc_32):
    p = tmp_path / "v.csv"
    solved_disc_32.save_csv(p)
    with open(p) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "y", "v"]
    assert len(rows) - 1 == solved_disc_32.grid.n
    data = np.array(rows[1:], dtype=float)
    assert np.array_equal(data[:, 2], solved_disc_32.values)
