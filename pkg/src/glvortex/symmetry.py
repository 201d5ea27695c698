"""Level-set diagnostics for the potential phi of a curl-free vortex field.

The pipeline is: critical point and level sweep (radial rearrangement),
reconstruction of Theta and g from the level curves, the functionals M, A
and H in rearranged and surface form, the Pohozaev balance, the
isoperimetric deficit, inscribed/circumscribed radii, steepest-descent
curve lengths and the star-shaped integral.  Everything is gathered in a
:class:`DiagnosticsReport` by :func:`build_report`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import CubicSpline, PchipInterpolator

from .field2d import ScalarField, bicubic, bilinear, gradient4, laplacian_5pt
from .levelset import LevelSet, LevelSetError, extract_level_set, outer_loop_count
from .radial import write_keyvalue

# Slack constant of the model slack(h) = C h perimeter.  Calibrated once on
# circle levels of -|x - c| (random centres, radii >= 4 h, grids R/16 to
# R/128): the largest |deficit| / (h perimeter) was 0.144 and the largest
# |H_surface| / (h perimeter) 0.07; frozen at 0.2.
SLACK_C = 0.2


class HypothesisError(ValueError):
    """The field violates a structural hypothesis of the symmetry argument
    (several maxima, non-monotone area map, non-constant |grad phi| on
    level curves, non-star-shaped loop, ...)."""


# ---------------------------------------------------------------- types


def _interp(t, ts, ys):
    """Cubic-spline evaluation on ascending samples; the spline's end
    polynomial extends the data up to the critical value t0."""
    if len(ts) < 4:
        return np.interp(t, ts, ys)
    return CubicSpline(ts, ys)(t)


@dataclass
class RadialRearrangement:
    t_grid: np.ndarray          # decreasing levels
    rho: np.ndarray             # increasing radii, |Lambda_t| = pi rho^2
    level_sets: list
    center: np.ndarray
    t0: float                   # critical (maximal) value of phi
    h: float

    def phi_star(self, r) -> np.ndarray:
        """Non-increasing radial rearrangement, monotone cubic in rho."""
        rr = np.concatenate([[0.0], self.rho])
        tt = np.concatenate([[self.t0], self.t_grid])
        return PchipInterpolator(rr, tt, extrapolate=True)(r)

    def phi_star_slope(self, r) -> np.ndarray:
        rr = np.concatenate([[0.0], self.rho])
        tt = np.concatenate([[self.t0], self.t_grid])
        return PchipInterpolator(rr, tt, extrapolate=True).derivative()(r)


@dataclass
class NonlinearityG:
    t_grid: np.ndarray          # decreasing, as in the rearrangement
    theta: np.ndarray
    g: np.ndarray
    G: np.ndarray               # primitive of g, G = 0 at the outermost level
    theta_spread: np.ndarray
    rho: np.ndarray
    t0: float
    anchor: str
    hypothesis_ok: bool = True

    def _asc(self, arr):
        return self.t_grid[::-1], arr[::-1]

    def g_at(self, t) -> np.ndarray:
        ts, gs = self._asc(self.g)
        return _interp(t, ts, gs)

    def G_at(self, t) -> np.ndarray:
        ts, Gs = self._asc(self.G)
        return _interp(t, ts, Gs)

    def theta_at(self, t) -> np.ndarray:
        ts, th = self._asc(self.theta)
        return _interp(t, ts, th)

    def shifted(self, c: float) -> "NonlinearityG":
        """Same g with the primitive G replaced by G + c."""
        return NonlinearityG(self.t_grid, self.theta, self.g, self.G + c, self.theta_spread,
                             self.rho, self.t0, self.anchor, self.hypothesis_ok)


@dataclass
class HFunctional:
    rho: np.ndarray             # includes the seeded rho = 0
    M: np.ndarray
    A: np.ndarray
    H: np.ndarray

    def normalized(self) -> np.ndarray:
        out = np.zeros_like(self.H)
        nz = self.rho > 0
        out[nz] = self.H[nz] / (2 * np.pi**2 * self.rho[nz] ** 2)
        return out


REPORT_COLUMNS = ("t", "rho", "M", "A", "H_rearr", "H_surface", "pohozaev_residual",
                  "isoperimetric_deficit", "r_under", "r_over", "curve_length",
                  "starshaped_integral")
EXTRA_COLUMNS = ("theta", "theta_spread", "g", "coarea_rel", "grad_excess", "star_shaped")


@dataclass
class DiagnosticsReport:
    records: list                       # dicts keyed by REPORT_COLUMNS + EXTRA_COLUMNS
    t0: float
    center: np.ndarray
    h: float
    slack_C: float
    summary: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([rec[name] for rec in self.records], dtype=float)


# ---------------------------------------------------------------- helpers


def _finite_gradient(phi: ScalarField):
    vals = phi.vals
    gx, gy = gradient4(np.where(np.isfinite(vals), vals, np.nan), phi.geom.h)
    return gx, gy


def _sample(phi: ScalarField, arr: np.ndarray, pts: np.ndarray) -> np.ndarray:
    out = bicubic(phi.geom, arr, pts[:, 0], pts[:, 1])
    if not np.all(np.isfinite(out)):
        raise LevelSetError("level curve too close to the domain boundary for gradient sampling")
    return out


def _grad_on(phi: ScalarField, ls: LevelSet, grads=None) -> np.ndarray:
    gx, gy = grads if grads is not None else _finite_gradient(phi)
    return np.hypot(_sample(phi, gx, ls.midpoints), _sample(phi, gy, ls.midpoints))


def critical_point(phi: ScalarField) -> tuple[np.ndarray, float]:
    """Location and value of the maximum of phi, refined by a quadratic
    fit on the 3 x 3 neighbourhood of the maximal node."""
    geom = phi.geom
    v = np.where(np.isfinite(phi.vals), phi.vals, -np.inf)
    i, j = np.unravel_index(np.argmax(v), v.shape)
    x0, y0 = geom.x1d[j], geom.y1d[i]
    if not (1 <= i < geom.n - 1 and 1 <= j < geom.n - 1):
        return np.array([x0, y0]), float(v[i, j])
    blk = phi.vals[i - 1:i + 2, j - 1:j + 2]
    if not np.all(np.isfinite(blk)):
        return np.array([x0, y0]), float(v[i, j])
    h = geom.h
    fx = (blk[1, 2] - blk[1, 0]) / (2 * h)
    fy = (blk[2, 1] - blk[0, 1]) / (2 * h)
    fxx = (blk[1, 2] - 2 * blk[1, 1] + blk[1, 0]) / h**2
    fyy = (blk[2, 1] - 2 * blk[1, 1] + blk[0, 1]) / h**2
    fxy = (blk[2, 2] - blk[2, 0] - blk[0, 2] + blk[0, 0]) / (4 * h * h)
    Hm = np.array([[fxx, fxy], [fxy, fyy]])
    try:
        step = -np.linalg.solve(Hm, [fx, fy])
    except np.linalg.LinAlgError:
        step = np.zeros(2)
    if np.max(np.abs(step)) > h:
        step = np.zeros(2)
    val = blk[1, 1] + fx * step[0] + fy * step[1] + 0.5 * step @ Hm @ step
    return np.array([x0 + step[0], y0 + step[1]]), float(val)


def slack(h: float, perimeter: float, C: float = SLACK_C) -> float:
    return C * h * perimeter


# ---------------------------------------------------------------- sweep


def _outer_band_max(phi: ScalarField) -> float:
    """Largest phi on finite nodes that touch a non-finite neighbour or the
    array edge; no closed level curve can sit below this value."""
    fin = np.isfinite(phi.vals)
    pad = np.pad(fin, 1, constant_values=False)
    inner = pad[:-2, 1:-1] & pad[2:, 1:-1] & pad[1:-1, :-2] & pad[1:-1, 2:]
    band = fin & ~inner
    return float(np.max(phi.vals[band]))


def sweep_levels(phi: ScalarField, n_levels: int | None = None, center=None,
                 rho_min: float | None = None, margin_cells: float = 3.0) -> RadialRearrangement:
    """Levels t_k with super-level areas pi rho_k^2, rho_k uniform in rho.

    ``n_levels`` defaults to one level per two grid cells of radius, so the
    level quadrature refines together with the grid.  The innermost radius
    defaults to max(4 h, rho_max / n_levels); the outermost level stays
    ``margin_cells`` cells inside the last closed level.  Raises
    :class:`HypothesisError` for several super-level components or a
    non-monotone area map.
    """
    geom = phi.geom
    h = geom.h
    xc, t0 = critical_point(phi)
    if center is not None:
        xc = np.asarray(center, dtype=float)
    t_low = _outer_band_max(phi)
    vals = phi.vals[np.isfinite(phi.vals)]
    desc = np.sort(vals)[::-1]
    count_area = np.arange(1, desc.size + 1) * h * h
    rho_edge = math.sqrt(np.count_nonzero(vals > t_low) * h * h / math.pi)
    rho_max = rho_edge - margin_cells * h
    if n_levels is None:
        n_levels = max(16, int(round(rho_max / (2 * h))))
    if n_levels < 4:
        raise ValueError("n_levels must be at least 4")
    if rho_min is None:
        rho_min = max(4 * h, rho_max / n_levels)
    if rho_max <= rho_min:
        raise HypothesisError("grid too coarse: no room for levels")
    targets = np.linspace(rho_min, rho_max, n_levels)
    # invert the node-count area map, then extract the polygon levels
    t_try = np.interp(np.pi * targets**2, count_area, desc)
    t_grid, rho, sets = [], [], []
    for t in t_try:
        ls = extract_level_set(phi, float(t))
        if outer_loop_count(ls) != 1:
            raise HypothesisError(f"level {t:.6g} has {outer_loop_count(ls)} components "
                                  "(several critical regions)")
        t_grid.append(float(t))
        rho.append(math.sqrt(ls.area / math.pi))
        sets.append(ls)
    t_grid = np.array(t_grid)
    rho = np.array(rho)
    if np.any(np.diff(t_grid) >= 0) or np.any(np.diff(rho) <= 0):
        raise HypothesisError("area map t -> |Lambda_t| is not monotone on the sampled levels")
    return RadialRearrangement(t_grid, rho, sets, np.asarray(xc, dtype=float), t0, h)


# ---------------------------------------------------------------- Theta and g


def reconstruct_nonlinearity(phi: ScalarField, levels: RadialRearrangement,
                             weight=None, anchor: str = "auto",
                             spread_tol: float = 0.2, bad_fraction: float = 0.1,
                             quadrature: str = "spline") -> NonlinearityG:
    """Theta(t) as the arclength mean of w (1 - |grad phi|^2) on each level
    curve (w = 1 unless ``weight`` is given, either as a nodal array or as
    a function w(x, y) evaluated at the quadrature nodes), and g by cumulative
    integration in t from the outermost level.

    ``anchor`` fixes g at the outermost level t_min:
      "tail"      g(t_min) = -(1 + Theta(t_min)) / t_min (requires t_min < 0),
      "tail1"     g(t_min) = -1 / t_min, the leading term only,
      "laplacian" constant fitted to the level means of -Lap_h phi on the
                  middle half of the radii,
      "zero"      g(t_min) = Theta(t_min) t_min (g(0) = 0 with Theta
                  extended as a constant below t_min),
      "auto"      "tail" when t_min < 0, else "laplacian".

    ``quadrature`` is "spline" (antiderivative of a cubic spline through
    the samples, fourth order) or "trapezoid".
    """
    grads = _finite_gradient(phi)
    nlev = len(levels.t_grid)
    theta = np.empty(nlev)
    spread = np.empty(nlev)
    for k, ls in enumerate(levels.level_sets):
        gm = _grad_on(phi, ls, grads)
        lam = 1.0 - gm**2
        if callable(weight):
            lam = lam * weight(ls.midpoints[:, 0], ls.midpoints[:, 1])
        elif weight is not None:
            lam = lam * _sample(phi, weight, ls.midpoints)
        w = ls.arclengths / ls.perimeter
        mean = float(np.dot(w, lam))
        theta[k] = mean
        spread[k] = float(np.sqrt(np.dot(w, (lam - mean) ** 2)))
    bad = spread > spread_tol * np.abs(theta)
    ok = np.count_nonzero(bad) <= bad_fraction * nlev
    if not ok:
        warnings.warn("Theta is not constant on the level curves; symmetry verdict withheld")
    t_asc = levels.t_grid[::-1]
    th_asc = theta[::-1]
    t_min = t_asc[0]
    if anchor == "auto":
        anchor = "tail" if t_min < 0 else "laplacian"
    if anchor in ("tail", "tail1"):
        if t_min >= 0:
            raise ValueError("tail anchor needs a negative outermost level")
        # g = 1/r + d^2/(2 r^3) and t = -r - d^2/(2 r) give
        # g = -(1 + Theta)/t + O(r^-5) with Theta ~ d^2/r^2; "tail1" keeps
        # only the leading term -1/t.
        g0 = -1.0 / t_min if anchor == "tail1" else -(1.0 + th_asc[0]) / t_min
    elif anchor == "laplacian":
        # least-squares constant matching g to the level means of -Lap_h phi
        # on the middle half of the radii, away from the core and from the
        # boundary layer of a discrete Dirichlet solution
        vals = np.where(np.isfinite(phi.vals), phi.vals, np.nan)
        lap = -laplacian_5pt(vals, phi.geom.h)
        rho = levels.rho
        sel = np.nonzero((rho >= 0.25 * rho[-1]) & (rho <= 0.75 * rho[-1]))[0]
        if sel.size == 0:
            sel = np.array([nlev - 1])
        rise = _cumulative(th_asc, t_asc, quadrature)[::-1]   # int_{t_min}^{t_k} Theta
        direct = np.array([levels.level_sets[k].integrate(
            _sample(phi, lap, levels.level_sets[k].midpoints)) / levels.level_sets[k].perimeter
            for k in sel])
        g0 = float(np.mean(direct - rise[sel]))
    elif anchor == "zero":
        g0 = th_asc[0] * t_min
    else:
        raise ValueError(f"unknown anchor {anchor!r}")
    g_asc = g0 + _cumulative(th_asc, t_asc, quadrature)
    G_asc = _cumulative(g_asc, t_asc, quadrature)
    return NonlinearityG(levels.t_grid, theta, g_asc[::-1], G_asc[::-1], spread,
                         levels.rho, levels.t0, anchor, ok)


# ---------------------------------------------------------------- H functionals


def compute_H_rearranged(levels: RadialRearrangement, g: NonlinearityG,
                         mode: str = "levels", quadrature: str = "spline") -> HFunctional:
    """M, A and H = M^2 / 2 + 2 pi r^3 (A / r^2)' on the rho grid with the
    seeded point rho = 0, M = A = H = 0.

    M and A are 2 pi int_0^r g(phi*(s)) s ds and the same with G, computed
    in the variable sigma = s^2 where the integrands are smooth.  The
    derivative term is evaluated in one of two ways:

    ``"levels"``   integration by parts turns 2 pi r^3 (A / r^2)' into
                   -4 pi^2 int_t^t0 g(tau) rho(tau)^2 dtau, which involves
                   no primitive and no cancellation between large terms;
    ``"centered"`` centred differences of A / r^2 on the rho grid (limit
                   pi G(t0) at r = 0).
    """
    rho = np.concatenate([[0.0], levels.rho])
    t_all = np.concatenate([[levels.t0], levels.t_grid])
    sig = rho**2
    gv = g.g_at(t_all)
    Gv = g.G_at(t_all)
    M = np.pi * _cumulative(gv, sig, quadrature)
    A = np.pi * _cumulative(Gv, sig, quadrature)
    H = np.zeros_like(rho)
    if mode == "levels":
        # tau ascends from the outermost level to t0
        tau = t_all[::-1]
        inner = _cumulative((gv * sig)[::-1], tau, quadrature)
        I = (inner[-1] - inner)[::-1]           # int_t^t0 g rho^2 dtau
        H[1:] = 0.5 * M[1:] ** 2 - 4 * np.pi**2 * I[1:]
    elif mode == "centered":
        q = np.empty_like(rho)
        q[0] = np.pi * Gv[0]
        q[1:] = A[1:] / sig[1:]
        H[1:] = (0.5 * M**2 + 2 * np.pi * rho**3 * np.gradient(q, rho))[1:]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return HFunctional(rho, M, A, H)


def _cumulative(y: np.ndarray, x: np.ndarray, quadrature: str = "spline") -> np.ndarray:
    """Cumulative integral of samples y(x) from x[0], x increasing."""
    if quadrature == "trapezoid" or len(x) < 4:
        return cumulative_trapezoid(y, x, initial=0.0)
    if quadrature == "spline":
        anti = CubicSpline(x, y).antiderivative()
        return anti(x) - anti(x[0])
    raise ValueError(f"unknown quadrature {quadrature!r}")


def compute_H_surface(phi: ScalarField, ls: LevelSet, center=None, grads=None) -> float:
    """(1/2) (int |grad phi| ds)^2 - pi int <x - x_c, nu> |grad phi|^2 ds."""
    xc = critical_point(phi)[0] if center is None else np.asarray(center, dtype=float)
    gm = _grad_on(phi, ls, grads)
    xn = np.sum((ls.midpoints - xc) * ls.normals, axis=1)
    return 0.5 * ls.integrate(gm) ** 2 - np.pi * ls.integrate(xn * gm**2)


def _level_integral(g: NonlinearityG, t: float) -> float:
    """int_t^t0 g(tau) rho(tau)^2 dtau through the sampled levels; equals
    (1 / pi) (int_{Lambda_t} G(phi) dx - G(t) |Lambda_t|)."""
    t_all = np.concatenate([[g.t0], g.t_grid])[::-1]
    sig = np.concatenate([[0.0], g.rho**2])[::-1]
    inner = _cumulative(g.g_at(t_all) * sig, t_all)
    I = inner[-1] - inner
    if len(t_all) < 4:
        return float(np.interp(t, t_all, I))
    return float(CubicSpline(t_all, I)(t))


def pohozaev_terms(phi: ScalarField, g: NonlinearityG, ls: LevelSet, center=None,
                   grads=None) -> tuple[float, float]:
    """(boundary term (1/2) int <x - x_c, nu> |grad phi|^2,
    2 int_{Lambda_t} G(phi) - 2 G(t) |Lambda_t|).

    The second term is evaluated by equimeasurability and integration by
    parts as 2 pi int_t^t0 g(tau) rho(tau)^2 dtau, which is independent of
    the primitive and avoids subtracting two large numbers.
    """
    xc = critical_point(phi)[0] if center is None else np.asarray(center, dtype=float)
    gm = _grad_on(phi, ls, grads)
    xn = np.sum((ls.midpoints - xc) * ls.normals, axis=1)
    lead = 0.5 * ls.integrate(xn * gm**2)
    return lead, 2 * np.pi * _level_integral(g, ls.t)


def pohozaev_residual(phi: ScalarField, g: NonlinearityG, ls: LevelSet, center=None,
                      relative: bool = True, grads=None) -> float:
    """|(1/2) int <x - x_c, nu> |grad phi|^2 + 2 G(t) |Lambda_t| - 2 int G(phi)|,
    relative to the first term by default."""
    lead, dom = pohozaev_terms(phi, g, ls, center, grads)
    res = abs(lead - dom)
    return res / abs(lead) if relative else res


# ---------------------------------------------------------------- geometry


def isoperimetric_deficit(ls: LevelSet) -> float:
    return ls.perimeter**2 - 4 * np.pi * ls.area


def radii_comparison(ls: LevelSet, x0, tol: float | None = None) -> tuple[float, float, float]:
    """(r_under, r_over, rho) about x0; the ordering r_over >= rho >= r_under
    is checked with tolerance ``tol`` (default h)."""
    x0 = np.asarray(x0, dtype=float)
    dist = np.hypot(*(ls.vertices - x0).T)
    r_under, r_over = float(dist.min()), float(dist.max())
    rho = math.sqrt(ls.area / math.pi)
    tol = ls.h if tol is None else tol
    if not (r_over + tol >= rho >= r_under - tol):
        raise HypothesisError(f"radii ordering violated: {r_under:.6g}, {rho:.6g}, {r_over:.6g}")
    return r_under, r_over, rho


def starshaped_integral(ls: LevelSet, x0) -> float:
    """int ds / <x - x0, nu> - 2 pi over a loop star-shaped about x0."""
    x0 = np.asarray(x0, dtype=float)
    xn = np.sum((ls.midpoints - x0) * ls.normals, axis=1)
    if np.any(xn <= 0):
        raise HypothesisError("level curve is not star-shaped about x0")
    return ls.integrate(1.0 / xn) - 2 * np.pi


def is_star_shaped(ls: LevelSet, x0) -> bool:
    xn = np.sum((ls.midpoints - np.asarray(x0, dtype=float)) * ls.normals, axis=1)
    return bool(np.all(xn > 0))


# ---------------------------------------------------------------- curve length


def trace_descent(phi: ScalarField, x_start, t: float, step: float | None = None,
                  grads=None, max_steps: int = 200000) -> tuple[float, np.ndarray]:
    """RK4 integration of dx/ds = -grad phi / |grad phi| from x_start until
    phi = t; returns the arclength and the end point."""
    geom = phi.geom
    gx, gy = grads if grads is not None else _finite_gradient(phi)
    ds = 0.25 * geom.h if step is None else step

    def direction(p):
        vx = float(bilinear(geom, gx, p[0], p[1]))
        vy = float(bilinear(geom, gy, p[0], p[1]))
        nrm = math.hypot(vx, vy)
        if not np.isfinite(nrm):
            raise LevelSetError("descent curve left the domain")
        if nrm == 0:
            raise LevelSetError("descent curve stalled at a critical point")
        return np.array([-vx / nrm, -vy / nrm])

    def value(p):
        v = float(bilinear(geom, phi.vals, p[0], p[1]))
        if not np.isfinite(v):
            raise LevelSetError("descent curve left the domain")
        return v

    p = np.asarray(x_start, dtype=float).copy()
    if value(p) <= t:
        raise ValueError("start point already below the level")
    length = 0.0
    for _ in range(max_steps):
        k1 = direction(p)
        k2 = direction(p + 0.5 * ds * k1)
        k3 = direction(p + 0.5 * ds * k2)
        k4 = direction(p + ds * k3)
        q = p + ds * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        vp, vq = value(p), value(q)
        if vq <= t:
            # secant refinement of the crossing along the last step
            lo, hi, flo, fhi = 0.0, 1.0, vp - t, vq - t
            for _ in range(40):
                mid = lo + (hi - lo) * flo / (flo - fhi)
                pm = p + mid * (q - p)
                fm = value(pm) - t
                if abs(fm) < 1e-14 or hi - lo < 1e-12:
                    break
                if fm > 0:
                    lo, flo = mid, fm
                else:
                    hi, fhi = mid, fm
            return length + mid * float(np.linalg.norm(q - p)), pm
        length += float(np.linalg.norm(q - p))
        p = q
    raise LevelSetError("descent trace did not reach the level")


def integral_curve_length(phi: ScalarField, x0, t: float, g: NonlinearityG,
                          angle: float = 0.0, offset: float | None = None,
                          grads=None) -> tuple[float, float]:
    """(L_traced, L_theta) for the steepest-descent curve from x0 to {phi = t}.

    L_traced starts ``offset`` (default 2 h) away from x0 in direction
    ``angle`` and adds the offset to the traced length.  L_theta is
    int_t^t0 d xi / sqrt(1 - Theta(xi)) computed with s = sqrt(t0 - xi),
    which removes the endpoint singularity at the critical value.
    """
    x0 = np.asarray(x0, dtype=float)
    h = phi.geom.h
    off = 2 * h if offset is None else offset
    start = x0 + off * np.array([math.cos(angle), math.sin(angle)])
    traced, _ = trace_descent(phi, start, t, grads=grads)
    L_traced = off + traced
    return L_traced, theta_length(g, t)


def theta_length(g: NonlinearityG, t: float) -> float:
    t0 = g.t0
    if t >= t0:
        raise ValueError("level must lie below the critical value")
    one_minus = 1.0 - g.theta
    if np.any(one_minus <= 0):
        raise HypothesisError("Theta >= 1 on a sampled level; curve length undefined")
    s_k = np.sqrt(t0 - g.t_grid)                   # increasing
    q_k = 2 * s_k / np.sqrt(one_minus)
    # the integrand is regular at s = 0; extrapolate linearly from the
    # two innermost samples
    q0 = q_k[0] - s_k[0] * (q_k[1] - q_k[0]) / (s_k[1] - s_k[0])
    s_all = np.concatenate([[0.0], s_k])
    q_all = np.concatenate([[q0], q_k])
    s_t = math.sqrt(t0 - t)
    if s_t > s_all[-1] * (1 + 1e-12):
        raise ValueError("level outside the sampled range")
    sel = s_all < s_t
    s_use = np.concatenate([s_all[sel], [s_t]])
    q_use = np.concatenate([q_all[sel], [np.interp(s_t, s_all, q_all)]])
    return float(trapezoid(q_use, s_use))


# ---------------------------------------------------------------- consistency checks


def coarea_check(phi: ScalarField, levels: RadialRearrangement, grads=None) -> np.ndarray:
    """Relative mismatch between d|Lambda_t|/dt (finite differences) and
    -int ds / |grad phi| per level."""
    area = np.pi * levels.rho**2
    dA = np.gradient(area, levels.t_grid)
    out = np.empty_like(area)
    for k, ls in enumerate(levels.level_sets):
        flux = -ls.integrate(1.0 / _grad_on(phi, ls, grads))
        out[k] = abs(dA[k] - flux) / abs(flux)
    return out


def gradient_comparison(phi: ScalarField, levels: RadialRearrangement, grads=None) -> np.ndarray:
    """mean |grad phi| on each level curve minus |phi*'(rho(t))|."""
    slope = np.abs(levels.phi_star_slope(levels.rho))
    out = np.empty_like(slope)
    for k, ls in enumerate(levels.level_sets):
        out[k] = ls.integrate(_grad_on(phi, ls, grads)) / ls.perimeter - slope[k]
    return out


# ---------------------------------------------------------------- report


def build_report(phi: ScalarField, n_levels: int | None = None, center=None, weight=None,
                 anchor: str = "auto", slack_C: float = SLACK_C, tol: float = 1e-2,
                 trace_lengths: bool = True) -> DiagnosticsReport:
    """Run every diagnostic on every sampled level and attach the verdict."""
    levels = sweep_levels(phi, n_levels, center=center)
    grads = _finite_gradient(phi)
    g = reconstruct_nonlinearity(phi, levels, weight=weight, anchor=anchor)
    Hr = compute_H_rearranged(levels, g)
    xc = levels.center
    coarea = coarea_check(phi, levels, grads)
    gexcess = gradient_comparison(phi, levels, grads)
    records = []
    for k, ls in enumerate(levels.level_sets):
        star = is_star_shaped(ls, xc)
        try:
            r_under, r_over, _ = radii_comparison(ls, xc)
        except HypothesisError:
            dist = np.hypot(*(ls.vertices - xc).T)
            r_under, r_over = float(dist.min()), float(dist.max())
        L = math.nan
        if trace_lengths:
            try:
                L = integral_curve_length(phi, xc, ls.t, g, grads=grads)[0]
            except (LevelSetError, ValueError):
                L = math.nan
        records.append({
            "t": ls.t,
            "rho": levels.rho[k],
            "M": Hr.M[k + 1],
            "A": Hr.A[k + 1],
            "H_rearr": Hr.H[k + 1],
            "H_surface": compute_H_surface(phi, ls, xc, grads),
            "pohozaev_residual": pohozaev_residual(phi, g, ls, xc, grads=grads),
            "isoperimetric_deficit": isoperimetric_deficit(ls),
            "r_under": r_under,
            "r_over": r_over,
            "curve_length": L,
            "starshaped_integral": starshaped_integral(ls, xc) if star else math.nan,
            "theta": g.theta[k],
            "theta_spread": g.theta_spread[k],
            "g": g.g[k],
            "coarea_rel": coarea[k],
            "grad_excess": gexcess[k],
            "star_shaped": int(star),
            "perimeter": ls.perimeter,
            "area": ls.area,
        })
    rep = DiagnosticsReport(records, levels.t0, xc, phi.geom.h, slack_C)
    verdict = symmetry_verdict(rep, tol, theta_ok=g.hypothesis_ok)
    rep.summary.update(
        t0=levels.t0, center_x=float(xc[0]), center_y=float(xc[1]), h=phi.geom.h,
        n_levels=len(records), anchor=g.anchor, theta_constant=g.hypothesis_ok,
        H_monotone=_h_monotone(rep), H_limit=_h_terminal(rep) / (2 * np.pi**2 * rep.records[-1]["rho"] ** 2),
        verdict=verdict, symmetric=verdict == "symmetric",
        max_pohozaev_residual=float(np.max(rep.column("pohozaev_residual"))),
        max_relative_deficit=float(np.max(rep.column("isoperimetric_deficit")
                                          / (4 * np.pi * rep.column("area")))),
        max_coarea_rel=float(np.max(coarea)),
        non_star_shaped_levels=int(np.count_nonzero(rep.column("star_shaped") == 0)),
        slack_C=slack_C, tol=tol,
    )
    return rep


def _h_slack(rep: DiagnosticsReport) -> np.ndarray:
    return slack(rep.h, rep.column("perimeter"), rep.slack_C)


def _h_monotone(rep: DiagnosticsReport) -> bool:
    H = np.concatenate([[0.0], rep.column("H_rearr")])
    sl = np.concatenate([[0.0], _h_slack(rep)])
    drops = H[:-1] - H[1:]
    return bool(np.all(drops <= sl[1:] + sl[:-1]))


def _h_terminal(rep: DiagnosticsReport) -> float:
    return float(rep.records[-1]["H_surface"])


def symmetry_verdict(report: DiagnosticsReport, tol: float = 1e-2,
                     theta_ok: bool = True) -> str:
    """"symmetric", "asymmetric" or "inconclusive".

    symmetric: H_rearr non-decreasing within slack, terminal
    |H|/(2 pi^2 rho^2) < tol and deficit / (4 pi area) < tol at all levels.
    asymmetric: terminal H (surface form) above ten times its slack.
    H carries the units of the deficit (length^2) and uses the same slack
    C h perimeter.
    """
    last = report.records[-1]
    H_end = _h_terminal(report)
    sl_end = float(_h_slack(report)[-1])
    if theta_ok:
        rel_def = report.column("isoperimetric_deficit") / (4 * np.pi * report.column("area"))
        limit = abs(H_end) / (2 * np.pi**2 * last["rho"] ** 2)
        if _h_monotone(report) and limit < tol and np.all(rel_def < tol):
            return "symmetric"
    if H_end > 10 * sl_end:
        return "asymmetric"
    return "inconclusive"


def write_report(rep: DiagnosticsReport, out_dir: str | Path, prefix: str = "diagnostics") -> list[Path]:
    """CSV table, key=value summary and two-column plot-data files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = REPORT_COLUMNS + EXTRA_COLUMNS
    table = out / f"{prefix}.csv"
    with open(table, "w", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for rec in rep.records:
            fh.write(",".join(_fmt(rec[c]) for c in cols) + "\n")
    summary = out / f"{prefix}_summary.txt"
    write_keyvalue(summary, rep.summary)
    files = [table, summary]
    for name, xs, ys in (("t_vs_H", "t", "H_rearr"), ("rho_vs_H", "rho", "H_rearr"),
                         ("t_vs_deficit", "t", "isoperimetric_deficit")):
        path = out / f"{prefix}_{name}.dat"
        write_columns(path, rep.column(xs), rep.column(ys), (xs, ys))
        files.append(path)
    return files


def write_columns(path: str | Path, x, y, header: tuple[str, str]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# {header[0]} {header[1]}\n")
        for a, b in zip(x, y):
            fh.write(f"{_fmt(a)} {_fmt(b)}\n")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.17g}"


def elliptic_shear(phi_star: Callable, geom, ratio: float, center=(0.0, 0.0)) -> ScalarField:
    """Area-preserving elliptic distortion phi(x) = phi*(|S (x - c)|) with
    S = diag(1 / sqrt(ratio), sqrt(ratio)); NaN outside the disk."""
    s = math.sqrt(ratio)
    xx = (geom.X - center[0]) / s
    yy = (geom.Y - center[1]) * s
    vals = phi_star(np.hypot(xx, yy))
    return ScalarField(geom, np.where(geom.active, vals, np.nan), {"source": "elliptic_shear"})
