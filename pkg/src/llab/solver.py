"""Damped Newton solver for v lap v = |grad v|^2 - 1, v = 0 on the boundary.

Unknowns live on the lattice nodes strictly inside the domain. Nodes next to
the boundary use Shortley-Weller arms: the neighbour across the boundary is
replaced by the boundary point itself (where v = 0) at fractional distance
``theta * h``. The Laplacian and the first differences are the three-point
unequal-arm formulas, exact for quadratics.
"""

from __future__ import annotations

import csv
import logging
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import geometry as geo

log = logging.getLogger(__name__)

EXTERIOR, INTERIOR, CUT = 0, 1, 2
# neighbour order: -x, +x, -y, +y
DIRS = ((-1, 0), (1, 0), (0, -1), (0, 1))
OPPOSITE = (1, 0, 3, 2)
MAGIC = b"LVF1"


class SolverError(RuntimeError):
    pass


class ResolutionError(SolverError):
    pass


class DivergenceError(SolverError):
    def __init__(self, msg, history=()):
        super().__init__(msg)
        self.history = list(history)


class PositivityError(SolverError):
    pass


class WindowError(ValueError):
    """Sampling window leaves the domain or the grid."""


@dataclass
class SolverConfig:
    h: float
    tol: float = 1e-10
    max_iter: int = 50
    initial: str | np.ndarray = "distance"
    min_damping: float = 2.0**-30

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")


@dataclass
class Grid:
    """Node lattice ``x0 + i h, y0 + j h`` with embedded-boundary metadata.

    ``node_class`` is (nx, ny) with EXTERIOR / INTERIOR / CUT; ``index`` maps
    lattice nodes to unknown numbers (-1 outside). Per unknown, ``arms`` holds
    the four arm lengths as fractions of h (1 for a full arm) and ``nbr`` the
    neighbouring unknown (-1 where the arm ends on the boundary).
    """

    x0: float
    y0: float
    h: float
    nx: int
    ny: int
    node_class: np.ndarray
    index: np.ndarray
    ij: np.ndarray
    arms: np.ndarray
    nbr: np.ndarray
    sdist: np.ndarray = field(repr=False)
    domain: geo.PlanarDomain = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.ij)

    @property
    def xy(self) -> np.ndarray:
        return np.stack([self.x0 + self.ij[:, 0] * self.h, self.y0 + self.ij[:, 1] * self.h], -1)

    def lattice(self):
        xs = self.x0 + np.arange(self.nx) * self.h
        ys = self.y0 + np.arange(self.ny) * self.h
        return xs, ys


def build_grid(domain: geo.PlanarDomain, h: float, pad: int = 3, window=None) -> Grid:
    """Classify lattice nodes and compute Shortley-Weller arm fractions.

    The lattice is aligned with the origin (nodes at integer multiples of h)
    and covers the domain's bounding box plus ``pad`` layers, or ``window`` =
    (xmin, xmax, ymin, ymax) when given.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    feature = domain.feature_size()
    if h > feature / 10:
        log.warning("h=%g exceeds a tenth of the smallest feature (%g)", h, feature)
    if window is None:
        xmin, xmax, ymin, ymax = domain.bounding_box()
        i0, i1 = int(np.floor(xmin / h + 1e-9)) - pad, int(np.ceil(xmax / h - 1e-9)) + pad
        j0, j1 = int(np.floor(ymin / h + 1e-9)) - pad, int(np.ceil(ymax / h - 1e-9)) + pad
    else:
        xmin, xmax, ymin, ymax = window
        i0, i1 = int(np.ceil(xmin / h - 1e-9)), int(np.floor(xmax / h + 1e-9))
        j0, j1 = int(np.ceil(ymin / h - 1e-9)), int(np.floor(ymax / h + 1e-9))
    nx, ny = i1 - i0 + 1, j1 - j0 + 1
    if nx < 1 or ny < 1:
        raise ResolutionError("empty lattice window")
    x0, y0 = i0 * h, j0 * h
    X, Y = np.meshgrid(x0 + np.arange(nx) * h, y0 + np.arange(ny) * h, indexing="ij")
    sd = geo.signed_distance(domain, np.stack([X.ravel(), Y.ravel()], -1)).reshape(nx, ny)
    inside = sd > geo.BOUNDARY_EPS
    # nodes on the lattice edge have no full stencil
    inside[[0, -1], :] = False
    inside[:, [0, -1]] = False
    if not inside.any():
        raise ResolutionError("no lattice node falls inside the domain")
    index = np.full((nx, ny), -1, dtype=np.int64)
    ij = np.argwhere(inside)
    index[inside] = np.arange(len(ij))
    n = len(ij)
    arms = np.ones((n, 4))
    nbr = np.full((n, 4), -1, dtype=np.int64)
    p_list, q_list, where = [], [], []
    for k, (di, dj) in enumerate(DIRS):
        ii, jj = ij[:, 0] + di, ij[:, 1] + dj
        nb = index[ii, jj]
        nbr[:, k] = nb
        cut = nb < 0
        idx = np.nonzero(cut)[0]
        where.append((k, idx))
        p_list.append(np.stack([X[ij[idx, 0], ij[idx, 1]], Y[ij[idx, 0], ij[idx, 1]]], -1))
        q_list.append(np.stack([X[ii[idx], jj[idx]], Y[ii[idx], jj[idx]]], -1))
    P = np.concatenate(p_list)
    Q = np.concatenate(q_list)
    if len(P):
        t = geo.segment_crossing(domain, P, Q)
        off = 0
        for k, idx in where:
            arms[idx, k] = t[off:off + len(idx)]
            off += len(idx)
    if np.any(arms <= 0) or np.any(arms > 1):
        raise ResolutionError("cut fraction outside (0, 1]")
    n_cut = np.sum(nbr < 0, axis=1)
    if np.any(n_cut >= 3):
        raise ResolutionError(f"h={h} too coarse: {int(np.sum(n_cut >= 3))} nodes with >= 3 cut arms")
    node_class = np.zeros((nx, ny), dtype=np.int8)
    node_class[inside] = INTERIOR
    node_class[ij[n_cut > 0, 0], ij[n_cut > 0, 1]] = CUT
    return Grid(x0, y0, h, nx, ny, node_class, index, ij, arms, nbr, sd, domain)


# -- discrete operators ---------------------------------------------------------

def _stencils(grid: Grid):
    """Coefficients of the unequal-arm Laplacian and first differences.

    Returns (lap_c, lap_n, dx_c, dx_n, dy_c, dy_n): centre coefficient and the
    four neighbour coefficients (order -x, +x, -y, +y).
    """
    h = grid.h
    hl, hr, hd, hu = (grid.arms[:, k] * h for k in range(4))
    axl = 2 / (hl * (hl + hr))
    axr = 2 / (hr * (hl + hr))
    ayd = 2 / (hd * (hd + hu))
    ayu = 2 / (hu * (hd + hu))
    lap_n = np.stack([axl, axr, ayd, ayu], -1)
    lap_c = -lap_n.sum(-1)
    bxl = -hr / (hl * (hl + hr))
    bxr = hl / (hr * (hl + hr))
    byd = -hu / (hd * (hd + hu))
    byu = hd / (hu * (hd + hu))
    zero = np.zeros_like(bxl)
    dx_n = np.stack([bxl, bxr, zero, zero], -1)
    dy_n = np.stack([zero, zero, byd, byu], -1)
    return lap_c, lap_n, -(bxl + bxr), dx_n, -(byd + byu), dy_n


class Operator:
    """Residual F(v) = v lap_h v - |grad_h v|^2 + 1 and its Jacobian on a grid."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self.lap_c, self.lap_n, self.dx_c, self.dx_n, self.dy_c, self.dy_n = _stencils(grid)
        self.mask = grid.nbr >= 0
        self.safe_nbr = np.where(self.mask, grid.nbr, 0)

    def _neighbours(self, v):
        return np.where(self.mask, v[self.safe_nbr], 0.0)

    def parts(self, v):
        vn = self._neighbours(v)
        lap = self.lap_c * v + np.sum(self.lap_n * vn, -1)
        gx = self.dx_c * v + np.sum(self.dx_n * vn, -1)
        gy = self.dy_c * v + np.sum(self.dy_n * vn, -1)
        return lap, gx, gy

    def residual(self, v):
        lap, gx, gy = self.parts(v)
        return v * lap - gx * gx - gy * gy + 1.0

    def jacobian(self, v):
        """J w = v lap_h w + (lap_h v) w - 2 grad_h v . grad_h w."""
        lap, gx, gy = self.parts(v)
        n = len(v)
        diag = lap + v * self.lap_c - 2 * gx * self.dx_c - 2 * gy * self.dy_c
        off = v[:, None] * self.lap_n - 2 * gx[:, None] * self.dx_n - 2 * gy[:, None] * self.dy_n
        rows = np.concatenate([np.arange(n), np.repeat(np.arange(n), 4)[self.mask.ravel()]])
        cols = np.concatenate([np.arange(n), self.grid.nbr[self.mask]])
        vals = np.concatenate([diag, off[self.mask]])
        return sp.csc_matrix((vals, (rows, cols)), shape=(n, n))


# -- solution container -------------------------------------------------------------

def _lagrange_cubic(t):
    """Weights of nodes -1, 0, 1, 2 for a point at t in [0, 1)."""
    return (-t * (t - 1) * (t - 2) / 6, (t + 1) * (t - 1) * (t - 2) / 2,
            -(t + 1) * t * (t - 2) / 2, (t + 1) * t * (t - 1) / 6)


def _lagrange_at(nodes, s):
    w = np.ones(len(nodes))
    for a in range(len(nodes)):
        for b in range(len(nodes)):
            if a != b:
                w[a] *= (s - nodes[b]) / (nodes[a] - nodes[b])
    return w


@dataclass
class DiscreteSolution:
    grid: Grid
    values: np.ndarray
    history: list[float]
    converged: bool
    config: SolverConfig | None = None
    _ghosted: np.ndarray | None = field(default=None, repr=False)

    @property
    def h(self) -> float:
        return self.grid.h

    def field(self) -> np.ndarray:
        """(nx, ny) nodal array with NaN off the unknowns."""
        g = self.grid
        out = np.full((g.nx, g.ny), np.nan)
        out[g.ij[:, 0], g.ij[:, 1]] = self.values
        return out

    def ghosted(self) -> np.ndarray:
        """Nodal field extended across the boundary by cubic extrapolation.

        Each exterior node within 3h of the boundary (the reach of a bicubic
        stencil centred on a node) gets the cubic through the boundary
        crossing (v = 0) and three unknowns along the lattice axis best
        aligned with the inward normal.
        """
        if self._ghosted is not None:
            return self._ghosted
        g = self.grid
        F = self.field()
        G = F.copy()
        band = (g.node_class == EXTERIOR) & (g.sdist > -3.0 * g.h)
        bi = np.argwhere(band)
        if len(bi):
            xs, ys = g.lattice()
            pts = np.stack([xs[bi[:, 0]], ys[bi[:, 1]]], -1)
            proj = geo.project_points(g.domain, pts)
            normals = np.empty((len(bi), 2))
            for c_idx, curve in enumerate(g.domain.curves):
                m = proj["curve"] == c_idx
                if np.any(m):
                    normals[m] = geo.inward_normal(curve, proj["s"][m])
            for (i, j), nrm in zip(bi, normals):
                order = np.argsort([-(nrm[0] * di + nrm[1] * dj) for di, dj in DIRS])
                for k in order:
                    di, dj = DIRS[k]
                    if nrm[0] * di + nrm[1] * dj <= 0:
                        break
                    val = self._extrapolate(i, j, k)
                    if val is not None:
                        G[i, j] = val
                        break
        self._ghosted = G
        return G

    def _extrapolate(self, i, j, k):
        g = self.grid
        di, dj = DIRS[k]
        m1 = None
        for m in (1, 2, 3, 4, 5):
            ii, jj = i + m * di, j + m * dj
            if not (0 <= ii < g.nx and 0 <= jj < g.ny):
                return None
            if g.index[ii, jj] >= 0:
                m1 = m
                break
        if m1 is None:
            return None
        u = g.index[i + m1 * di, j + m1 * dj]
        theta = g.arms[u, OPPOSITE[k]]
        if g.nbr[u, OPPOSITE[k]] >= 0:
            return None
        start = m1 if theta >= 0.25 else m1 + 1
        nodes, vals = [m1 - theta], [0.0]
        for q in range(3):
            ii, jj = i + (start + q) * di, j + (start + q) * dj
            if not (0 <= ii < g.nx and 0 <= jj < g.ny) or g.index[ii, jj] < 0:
                return None
            nodes.append(start + q)
            vals.append(self.values[g.index[ii, jj]])
        return float(np.dot(_lagrange_at(np.array(nodes), 0.0), vals))

    def value(self, x, y):
        """Tensor-product cubic (bicubic Lagrange) interpolation of the ghosted field."""
        g = self.grid
        G = self.ghosted()
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        fx = (x - g.x0) / g.h
        fy = (y - g.y0) / g.h
        i0 = np.floor(fx).astype(int)
        j0 = np.floor(fy).astype(int)
        if np.any(i0 < 1) or np.any(j0 < 1) or np.any(i0 > g.nx - 3) or np.any(j0 > g.ny - 3):
            raise WindowError("interpolation stencil leaves the grid")
        wx = _lagrange_cubic(fx - i0)
        wy = _lagrange_cubic(fy - j0)
        out = np.zeros(np.broadcast(x, y).shape)
        for a in range(4):
            for b in range(4):
                out = out + wx[a] * wy[b] * G[i0 - 1 + a, j0 - 1 + b]
        if np.any(np.isnan(out)):
            raise WindowError("interpolation stencil touches nodes without values")
        return out

    def laplacian(self, x, y):
        """Five-point Laplacian of the interpolant at spacing h."""
        h = self.h
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (self.value(x + h, y) + self.value(x - h, y) + self.value(x, y + h)
                + self.value(x, y - h) - 4 * self.value(x, y)) / h**2

    def valid(self, x, y):
        g = self.grid
        sd = geo.signed_distance(g.domain, np.stack([np.ravel(x), np.ravel(y)], -1))
        return (sd > 0).reshape(np.shape(x))

    def nodal_hessian(self):
        """Centred second differences at unknowns whose 3x3 block is all unknowns.

        Returns (mask, vxx, vxy, vyy) over the unknowns; entries outside the
        mask are NaN.
        """
        F = self.field()
        g = self.grid
        h = g.h
        i, j = g.ij[:, 0], g.ij[:, 1]
        vxx = (F[i + 1, j] - 2 * F[i, j] + F[i - 1, j]) / h**2
        vyy = (F[i, j + 1] - 2 * F[i, j] + F[i, j - 1]) / h**2
        vxy = (F[i + 1, j + 1] - F[i + 1, j - 1] - F[i - 1, j + 1] + F[i - 1, j - 1]) / (4 * h**2)
        mask = ~(np.isnan(vxx) | np.isnan(vyy) | np.isnan(vxy))
        return mask, vxx, vxy, vyy

    # -- export ----------------------------------------------------------------
    def save_binary(self, path) -> None:
        write_field(path, self.grid, self.field())

    def save_csv(self, path) -> None:
        xy = self.grid.xy
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "v"])
            for (x, y), v in zip(xy, self.values):
                w.writerow([f"{x:.17g}", f"{y:.17g}", f"{v:.17g}"])


def write_field(path, grid: Grid, field2d: np.ndarray) -> None:
    """LVF1 dump: magic, nx, ny (int64), x0, y0, h (float64), then ny rows of nx float64."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<qqddd", grid.nx, grid.ny, grid.x0, grid.y0, grid.h))
        fh.write(np.ascontiguousarray(field2d.T, dtype="<f8").tobytes())


def read_field(path):
    """Return (nx, ny, x0, y0, h, values) with values shaped (nx, ny)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValueError("not an LVF1 file")
    nx, ny, x0, y0, h = struct.unpack("<qqddd", data[4:44])
    vals = np.frombuffer(data[44:], dtype="<f8")
    if vals.size != nx * ny:
        raise ValueError("truncated LVF1 payload")
    return nx, ny, x0, y0, h, vals.reshape(ny, nx).T.copy()


# -- Newton -------------------------------------------------------------------

def residual_norm(sol: DiscreteSolution) -> float:
    return float(np.max(np.abs(Operator(sol.grid).residual(sol.values))))


def solve(domain: geo.PlanarDomain, config: SolverConfig, grid: Grid | None = None) -> DiscreteSolution:
    """Damped Newton iteration from the distance function (or a supplied field)."""
    grid = grid if grid is not None else build_grid(domain, config.h)
    op = Operator(grid)
    if isinstance(config.initial, str):
        if config.initial != "distance":
            raise ValueError(f"unknown initial guess {config.initial!r}")
        v = grid.sdist[grid.ij[:, 0], grid.ij[:, 1]].copy()
    else:
        v = np.asarray(config.initial, dtype=float).copy()
        if v.shape != (grid.n,):
            raise ValueError("custom initial field must have one value per unknown")
    if np.any(v <= 0):
        raise PositivityError("initial guess must be positive at every unknown")
    F = op.residual(v)
    norm = float(np.max(np.abs(F)))
    history = [norm]
    log.info("newton 0: |F|=%.3e  (n=%d)", norm, grid.n)
    for it in range(1, config.max_iter + 1):
        if norm <= config.tol:
            break
        dv = spla.spsolve(op.jacobian(v), -F)
        lam = 1.0
        positive_seen = False
        while True:
            trial = v + lam * dv
            if np.all(trial > 0):
                positive_seen = True
                Ft = op.residual(trial)
                nt = float(np.max(np.abs(Ft)))
                if nt < norm:
                    break
            lam *= 0.5
            if lam < config.min_damping:
                if not positive_seen:
                    raise PositivityError(f"no positive damped step at iteration {it}")
                raise DivergenceError(f"line search failed at iteration {it}", history)
        v, F, norm = trial, Ft, nt
        history.append(norm)
        log.info("newton %d: |F|=%.3e  step=%g", it, norm, lam)
    if norm > config.tol:
        raise DivergenceError(f"no convergence in {config.max_iter} iterations", history)
    return DiscreteSolution(grid, v, history, True, config)
