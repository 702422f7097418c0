"""Boundary expansion v = d - kappa d^2 / 2 + c3 d^3 + ... and its d^3 coefficient.

Two estimators are provided at each boundary point y with inward normal n:

* a least-squares fit of r(t) = v(y + t n) - t + kappa t^2 / 2 on powers of t;
* the slope of lap v against d, since lap v = -2 kappa + 6 c3 d + O(d^2).

Solutions with analytic jets (closed forms, transported and Kelvin solutions)
are sampled exactly; discrete solutions through bicubic interpolation.

For analytic jets the fit also matches r' and r'' (normal derivatives from
the jet) on the basis {t^3, ..., t^6}. Values alone lose about 1e-16 / t^3 to
cancellation in v - t, which caps the attainable accuracy near 1e-8; the
derivative rows carry the same coefficients without that loss. Analytic
windows and probes are multiplied by the site's length scale (by default the
curve's smallest radius of curvature), which makes extraction covariant
under dilation.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np

from . import geometry as geo
from .serial import write_json
from .solver import DiscreteSolution
from .solver import WindowError as StencilError

ANALYTIC_WINDOW = (1e-3, 1e-2)
ANALYTIC_POINTS = 12
ANALYTIC_PROBES = (1e-5, 2e-5, 4e-5)
ANALYTIC_POWERS = (3, 4, 5, 6)
DISCRETE_WINDOW = (2.0, 10.0)  # in units of h
DISCRETE_POINTS = 9
DISCRETE_PROBES = (3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0)  # in units of h
MAX_CONDITION = 1e8
INTERCEPT_SLACK = 0.1
MIN_TRACE_SAMPLES = 64
MAX_FAILED_FRACTION = 0.1


class WindowError(ValueError):
    """Sampling window is ill-posed (bad bounds or ill-conditioned fit)."""


class TraceError(RuntimeError):
    pass


@dataclass(frozen=True)
class BoundarySite:
    """Boundary point with inward unit normal and signed curvature."""

    point: tuple[float, float]
    normal: tuple[float, float]
    kappa: float
    curve: int = 0
    s: float = 0.0
    scale: float = 1.0

    @classmethod
    def on_curve(cls, curve: geo.BoundaryCurve, s: float, index: int = 0,
                 scale: float | None = None) -> "BoundarySite":
        """Site at parameter s; ``scale`` defaults to the curve's smallest radius of curvature."""
        p = geo.point(curve, s)
        n = geo.inward_normal(curve, s)
        if scale is None:
            scale = geo.curvature_radius(curve)
        scale = float(scale) if np.isfinite(scale) else 1.0
        return cls((float(p[0]), float(p[1])), (float(n[0]), float(n[1])),
                   float(geo.curvature(curve, s)), index, float(s), scale)

    @classmethod
    def on_line(cls, point, normal, index: int = 0, s: float = 0.0, scale: float = 1.0) -> "BoundarySite":
        """Site on a straight boundary piece (kappa = 0), e.g. the edges of a strip."""
        n = np.asarray(normal, dtype=float)
        n = n / np.linalg.norm(n)
        return cls((float(point[0]), float(point[1])), (float(n[0]), float(n[1])), 0.0, index, float(s),
                   float(scale))

    def along(self, t):
        t = np.asarray(t, dtype=float)
        return self.point[0] + t * self.normal[0], self.point[1] + t * self.normal[1]


@dataclass
class ExpansionSample:
    curve: int
    s: float
    point: tuple[float, float]
    kappa: float
    c3_fit: float = np.nan
    c3_laplacian: float = np.nan
    fit_residual: float = np.nan
    window: tuple[float, float] = (np.nan, np.nan)
    intercept: float = np.nan
    consistent: bool = True

    @property
    def method_gap(self) -> float:
        return abs(self.c3_fit - self.c3_laplacian)


@dataclass
class ExtractionConfig:
    """Windows and probes; ``None`` selects the defaults for the solution type.

    ``linear_term`` adds t to the fit basis. It absorbs the O(h^2) t-error mode
    of discrete solutions (interpolated values differ from v by a smooth
    O(h^2) field whose t-expansion starts at t^1); ``None`` enables it exactly
    for discrete solutions.
    """

    window: tuple[float, float] | None = None
    n_points: int | None = None
    probes: tuple[float, ...] | None = None
    linear_term: bool | None = None


def _is_discrete(sol) -> bool:
    return isinstance(sol, DiscreteSolution)


def _sample(sol, site: BoundarySite, t, what: str):
    x, y = site.along(t)
    if not np.all(sol.valid(x, y)):
        raise geo.GeometryError("sampling window leaves the domain")
    try:
        if _is_discrete(sol):
            return sol.value(x, y) if what == "v" else sol.laplacian(x, y)
        j = sol.jet(x, y)
        return {"v": j.v, "lap": j.laplacian, "jet": j}[what]
    except StencilError as exc:
        raise geo.GeometryError(str(exc)) from exc


def _lstsq(A, b):
    """Column-scaled least squares; returns (coefficients, rms residual)."""
    scale = np.linalg.norm(A, axis=0)
    As = A / scale
    cond = np.linalg.cond(As)
    if not cond <= MAX_CONDITION:
        raise WindowError(f"fit condition number {cond:.3g} exceeds {MAX_CONDITION:g}")
    coef, *_ = np.linalg.lstsq(As, b, rcond=None)
    res = b - As @ coef
    return coef / scale, float(np.sqrt(np.mean(res**2)))


def _length_scale(site: BoundarySite) -> float:
    return site.scale


def _fit_window(sol, site: BoundarySite, cfg: ExtractionConfig):
    if _is_discrete(sol):
        h = sol.h
        t0, t1 = cfg.window if cfg.window is not None else (DISCRETE_WINDOW[0] * h, DISCRETE_WINDOW[1] * h)
        n = cfg.n_points or DISCRETE_POINTS
        if t0 < 2 * h * (1 - 1e-12) or t1 > 10 * h * (1 + 1e-12) or n < 8:
            raise WindowError("discrete windows need 2h <= t_min, t_max <= 10h and >= 8 points")
    else:
        ell = _length_scale(site)
        t0, t1 = cfg.window if cfg.window is not None else (ANALYTIC_WINDOW[0] * ell, ANALYTIC_WINDOW[1] * ell)
        n = cfg.n_points or ANALYTIC_POINTS
    if not 0 < t0 < t1 or n < 3:
        raise WindowError(f"invalid window [{t0}, {t1}] with {n} points")
    return float(t0), float(t1), int(n)


def extract_c3_fit(sol, site: BoundarySite, config: ExtractionConfig | None = None) -> ExpansionSample:
    """Least-squares fit of r(t) = v(y + t n) - t + kappa t^2/2; c3 is the t^3 coefficient.

    Discrete data: values on {t^3, t^4} plus the nuisance term t. Analytic
    jets: r, r' and r'' jointly on {t^3, t^4, t^5, t^6}.
    """
    cfg = config or ExtractionConfig()
    t0, t1, n = _fit_window(sol, site, cfg)
    t = np.linspace(t0, t1, n)
    k = site.kappa
    if _is_discrete(sol):
        r = _sample(sol, site, t, "v") - t + 0.5 * k * t**2
        linear = True if cfg.linear_term is None else cfg.linear_term
        powers = ((1,) if linear else ()) + (3, 4)
        A = np.stack([t**p for p in powers], -1)
        coef, rms = _lstsq(A, r)
    else:
        j = _sample(sol, site, t, "jet")
        nx, ny = site.normal
        r0 = j.v - t + 0.5 * k * t**2
        r1 = j.vx * nx + j.vy * ny - 1.0 + k * t
        r2 = j.vxx * nx * nx + 2.0 * j.vxy * nx * ny + j.vyy * ny * ny + k
        powers = ANALYTIC_POWERS
        A = np.concatenate([np.stack([t**p for p in powers], -1),
                            np.stack([p * t ** (p - 1) for p in powers], -1),
                            np.stack([p * (p - 1) * t ** (p - 2) for p in powers], -1)])
        coef, rms = _lstsq(A, np.concatenate([r0, r1, r2]))
    return ExpansionSample(site.curve, site.s, site.point, site.kappa,
                           c3_fit=float(coef[powers.index(3)]), fit_residual=rms, window=(t0, t1))


def fit_quadratic_coefficient(sol, site: BoundarySite, config: ExtractionConfig | None = None) -> float:
    """d^2 coefficient of an unconstrained fit of v(y + t n) - t on {t^2, t^3, t^4}.

    Should equal -kappa/2; used to check the curvature sign end to end.
    """
    cfg = config or ExtractionConfig()
    t0, t1, n = _fit_window(sol, site, cfg)
    t = np.linspace(t0, t1, n)
    r = _sample(sol, site, t, "v") - t
    linear = _is_discrete(sol) if cfg.linear_term is None else cfg.linear_term
    cols = ([t] if linear else []) + [t**2, t**3, t**4]
    coef, _ = _lstsq(np.stack(cols, -1), r)
    return float(coef[1 if linear else 0])


def extract_c3_laplacian(sol, site: BoundarySite, config: ExtractionConfig | None = None) -> ExpansionSample:
    """c3 = slope / 6 of lap v against d, from a quadratic fit in d.

    The quadratic term absorbs the O(d^2) remainder (analytic jets) and the
    O(h^2) error of the five-point Laplacian of the interpolant (discrete
    data, probes d >= 3h). The intercept is compared
    with -2 kappa and the sample flagged when it misses by more than 10%.
    """
    cfg = config or ExtractionConfig()
    if _is_discrete(sol):
        h = sol.h
        d = np.asarray(cfg.probes if cfg.probes is not None else [p * h for p in DISCRETE_PROBES], float)
        if np.any(d < 3 * h * (1 - 1e-12)):
            raise WindowError("discrete Laplacian probes must satisfy d >= 3h")
        deg = 2
    else:
        ell = _length_scale(site)
        d = np.asarray(cfg.probes if cfg.probes is not None else [p * ell for p in ANALYTIC_PROBES], float)
        deg = 2
    if len(d) < deg + 1 or np.any(d <= 0):
        raise WindowError("not enough positive probe distances")
    lap = _sample(sol, site, d, "lap")
    A = np.stack([d**k for k in range(deg + 1)], -1)
    coef, rms = _lstsq(A, lap)
    intercept = float(coef[0])
    target = -2.0 * site.kappa
    # absolute floor keeps straight boundaries (kappa = 0) from flagging round-off
    ok = abs(intercept - target) <= INTERCEPT_SLACK * abs(target) + 1e-6
    return ExpansionSample(site.curve, site.s, site.point, site.kappa,
                           c3_laplacian=float(coef[1] / 6.0), fit_residual=rms,
                           window=(float(d.min()), float(d.max())), intercept=intercept, consistent=ok)


def extract(sol, site: BoundarySite, config: ExtractionConfig | None = None) -> ExpansionSample:
    """Both estimators at one site."""
    a = extract_c3_fit(sol, site, config)
    b = extract_c3_laplacian(sol, site, config)
    a.c3_laplacian = b.c3_laplacian
    a.intercept = b.intercept
    a.consistent = b.consistent
    return a


@dataclass
class CoefficientTrace:
    curve: int
    samples: list[ExpansionSample]
    speeds: np.ndarray = field(repr=False)
    perimeter: float
    integral: float
    integral_laplacian: float
    failed: int = 0

    @property
    def normalized(self) -> float:
        return self.perimeter * self.integral

    @property
    def s(self) -> np.ndarray:
        return np.array([p.s for p in self.samples])

    @property
    def c3(self) -> np.ndarray:
        return np.array([p.c3_fit for p in self.samples])

    @property
    def c3_laplacian(self) -> np.ndarray:
        return np.array([p.c3_laplacian for p in self.samples])

    @property
    def jitter(self) -> float:
        """Sample-to-sample noise: largest deviation from the trace's low harmonics, over mean |c3|.

        Harmonics up to n/4 are kept as the smooth part; what remains is
        noise at the sampling scale.
        """
        c = self.c3
        spec = np.fft.rfft(c)
        spec[len(c) // 4 + 1:] = 0
        smooth = np.fft.irfft(spec, len(c))
        return float(np.max(np.abs(c - smooth)) / np.mean(np.abs(c)))

    def summary(self) -> dict:
        return {"curve": self.curve, "n_samples": len(self.samples), "failed": self.failed,
                "perimeter": self.perimeter, "integral_c3": self.integral,
                "integral_c3_laplacian": self.integral_laplacian, "normalized": self.normalized}


def _periodic_fill(vals: np.ndarray) -> np.ndarray:
    bad = ~np.isfinite(vals)
    if not bad.any():
        return vals
    idx = np.arange(len(vals))
    good = idx[~bad]
    n = len(vals)
    return np.interp(idx, np.concatenate([good - n, good, good + n]), np.tile(vals[~bad], 3))


def trace_curve(sol, curve: geo.BoundaryCurve, n_samples: int = MIN_TRACE_SAMPLES,
                config: ExtractionConfig | None = None, index: int = 0,
                scale: float | None = None) -> CoefficientTrace:
    """Sample c3 uniformly in the curve parameter and integrate by the closed trapezoid rule.

    Failed samples (window errors) are filled by periodic linear interpolation
    of their neighbours; more than 10% failures reject the trace. ``scale``
    sets the analytic window length (default: the curve's smallest radius of
    curvature).
    """
    if n_samples < MIN_TRACE_SAMPLES:
        raise ValueError(f"a trace needs at least {MIN_TRACE_SAMPLES} samples")
    s = np.arange(n_samples) * (geo.TWO_PI / n_samples)
    if scale is None:
        scale = geo.curvature_radius(curve)
    samples, failed = [], 0
    for sk in s:
        site = BoundarySite.on_curve(curve, sk, index, scale)
        try:
            samples.append(extract(sol, site, config))
        except (geo.GeometryError, WindowError, ValueError):
            failed += 1
            samples.append(ExpansionSample(index, float(sk), site.point, site.kappa))
    if failed > MAX_FAILED_FRACTION * n_samples:
        raise TraceError(f"{failed} of {n_samples} samples failed on curve {index}")
    c_fit = _periodic_fill(np.array([p.c3_fit for p in samples]))
    c_lap = _periodic_fill(np.array([p.c3_laplacian for p in samples]))
    speed = np.linalg.norm(geo.tangent(curve, s), axis=-1)
    ds = geo.TWO_PI / n_samples
    return CoefficientTrace(index, samples, speed, float(np.sum(speed) * ds),
                            float(np.sum(c_fit * speed) * ds), float(np.sum(c_lap * speed) * ds), failed)


def trace_domain(sol, domain: geo.PlanarDomain, n_samples: int = MIN_TRACE_SAMPLES,
                 config: ExtractionConfig | None = None) -> list[CoefficientTrace]:
    """Trace every boundary curve; analytic windows also stay within half the gap to other curves."""
    return [trace_curve(sol, c, n_samples, config, i, min(geo.curvature_radius(c), domain.clearance(i)))
            for i, c in enumerate(domain.curves)]


# -- export -------------------------------------------------------------------

TRACE_COLUMNS = ("curve", "s", "x", "y", "kappa", "c3_fit", "c3_laplacian", "residual")


def write_trace_csv(path, traces: list[CoefficientTrace]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for tr in traces:
            for p in tr.samples:
                row = (p.s, p.point[0], p.point[1], p.kappa, p.c3_fit, p.c3_laplacian, p.fit_residual)
                w.writerow([p.curve] + [f"{x:.17g}" for x in row])


def trace_summary(traces: list[CoefficientTrace]) -> dict:
    total_len = sum(t.perimeter for t in traces)
    total_int = sum(t.integral for t in traces)
    return {"curves": [t.summary() for t in traces], "total_length": total_len,
            "total_integral_c3": total_int, "total_normalized": total_len * total_int}


def write_trace_json(path, traces: list[CoefficientTrace], extra: dict | None = None) -> None:
    data = trace_summary(traces)
    if extra:
        data.update(extra)
    write_json(path, data, ("curves", "total_integral_c3"))


def sample_to_dict(p: ExpansionSample) -> dict:
    return asdict(p)
