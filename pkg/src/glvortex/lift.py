"""Lifting a degree-d disk field through z -> z^(1/d).

If u solves -Lap u = u (1 - |u|^2) on B_R with boundary data exp(i d theta)
and a single zero at the origin, then v(z) = u(z^(1/d)) lives on B_{R^d},
has boundary data x/|x| and solves the weighted equation

    -Lap v = d^-2 |z|^(-2/d*) v (1 - |v|^2),    1/d* = 1 - 1/d,

because |d(z^(1/d))/dz|^2 = d^-2 |z|^(2/d - 2).  For d = 1 the weight is
identically 1 and the lift is the identity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .field2d import (Field2D, GridGeometry, ScalarField, boundary_data, degree,
                      find_zeros, laplacian_5pt, potential, read_field,
                      write_field)
from .radial import read_keyvalue, write_keyvalue
from .symmetry import (HypothesisError, NonlinearityG, RadialRearrangement,
                       is_star_shaped, reconstruct_nonlinearity, starshaped_integral,
                       sweep_levels)

# Nodes closer than this many cells to the origin are left out of the lifted
# residual: v is only C^{1,1/d} there and the 5-point Laplacian is not
# consistent.
ORIGIN_EXCLUSION = 3.0


class LiftError(ValueError):
    """The field does not satisfy the hypotheses of the lift."""


@dataclass
class LiftedField:
    v: Field2D
    d: int
    d_star: float            # conjugate exponent, inf for d = 1
    source_geom: GridGeometry
    branch_error: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def two_over_dstar(self) -> float:
        return 2.0 - 2.0 / self.d

    def weight(self, x, y) -> np.ndarray:
        """d^-2 r^(-2/d*) at points (x, y) relative to the lifted centre."""
        c = self.v.geom.center
        r = np.hypot(np.asarray(x) - c[0], np.asarray(y) - c[1])
        p = self.two_over_dstar
        if p == 0.0:
            return np.full(np.shape(r), 1.0 / self.d**2)
        with np.errstate(divide="ignore"):
            return r ** (-p) / self.d**2


def conjugate_exponent(d: int) -> float:
    """d* with 1/d* = 1 - 1/d (infinite for d = 1)."""
    if d < 1:
        raise ValueError("the lift needs a positive degree")
    return math.inf if d == 1 else d / (d - 1)


def _resample(u: Field2D, wx: np.ndarray, wy: np.ndarray) -> np.ndarray:
    """Cubic-spline values of u at physical points (same shape as wx)."""
    i, j = u.geom.to_index(wx, wy)
    coords = np.array([np.ravel(i), np.ravel(j)])
    re = ndimage.map_coordinates(u.re, coords, order=3, mode="nearest")
    im = ndimage.map_coordinates(u.im, coords, order=3, mode="nearest")
    return (re + 1j * im).reshape(np.shape(wx))


def _pull_back(u: Field2D, d: int, z: np.ndarray) -> np.ndarray:
    """u(z^(1/d)) on the principal sheet arg z in [0, 2 pi)."""
    c = u.geom.center
    r = np.abs(z)
    th = np.mod(np.angle(z), 2 * np.pi)
    w = r ** (1.0 / d) * np.exp(1j * th / d)
    return _resample(u, c[0] + w.real, c[1] + w.imag)


def branch_mismatch(u: Field2D, d: int, r_min: float | None = None) -> float:
    """max |u(s) - u(s exp(2 pi i / d))| over s on the positive real axis.

    These are the two one-sided limits of the lift across the cut arg z = 0;
    their difference measures how far u is from the single-valuedness the
    lift needs.
    """
    geom = u.geom
    r_min = 3 * geom.h if r_min is None else r_min
    s = np.arange(r_min, geom.R, geom.h / 2)
    c = complex(*geom.center)
    a = _resample(u, (c + s).real, (c + s).imag)
    rot = c + s * np.exp(2j * np.pi / d)
    b = _resample(u, rot.real, rot.imag)
    return float(np.max(np.abs(a - b))) if s.size else 0.0


def lift(u: Field2D, d: int, branch_tol: float = 5e-2) -> LiftedField:
    """Pull u back through z -> z^(1/d) onto a grid of radius R^d.

    The lifted grid keeps the number of nodes per radius of u.  Interior
    nodes are resampled with cubic splines, boundary and exterior nodes are
    set to x/|x|.  Raises :class:`LiftError` unless u has degree d, exactly
    one zero, and that zero lies within one cell of the disk centre, or if
    the branch check exceeds ``branch_tol``.
    """
    geom = u.geom
    if d < 1:
        raise LiftError("the lift needs a positive degree")
    if u.bc_degree != d:
        raise LiftError(f"field has boundary degree {u.bc_degree}, not {d}")
    deg = degree(u, 0.9 * geom.R)
    if deg != d:
        raise LiftError(f"winding number {deg} on |x| = 0.9 R, expected {d}")
    zeros = find_zeros(u)
    if len(zeros) != 1:
        raise LiftError(f"expected a single zero, found {len(zeros)}")
    off = float(np.hypot(*(zeros[0] - np.asarray(geom.center))))
    if off > geom.h:
        raise LiftError(f"zero at distance {off:.3g} from the centre (more than one cell)")

    if d == 1:
        v = u.copy()
        v.info.update(source="lift", d=1)
        return LiftedField(v, 1, math.inf, geom, 0.0, {"zero_offset": off})

    m = (geom.n - 3) // 2
    tgeom = GridGeometry.for_disk(geom.R**d, m, center=geom.center)
    z = (tgeom.X - tgeom.center[0]) + 1j * (tgeom.Y - tgeom.center[1])
    vals = boundary_data(tgeom, 1)
    inner = tgeom.interior
    vals[inner] = _pull_back(u, d, z[inner])
    err = branch_mismatch(u, d)
    if err > branch_tol:
        raise LiftError(f"branch mismatch {err:.3g} exceeds {branch_tol:.3g}; u is not liftable")
    v = Field2D.from_complex(tgeom, vals, 1, {"source": "lift", "d": d})
    return LiftedField(v, d, conjugate_exponent(d), geom, err, {"zero_offset": off})


def lifted_residual(lf: LiftedField, r_min: float | None = None,
                    r_max: float | None = None) -> ScalarField:
    """|-Lap_h v - d^-2 r^(-2/d*) v (1 - |v|^2)| on interior nodes.

    For d >= 2 nodes with r < r_min (default 3 h) are set to zero; for d = 1
    and default bounds the result coincides with ``gl_residual``.  Nodes
    with r > r_max are zeroed as well; this removes the boundary layer of a
    snapped Dirichlet solution when a refinement study needs it.
    """
    v = lf.v
    g = v.geom
    w = v.u
    lap = laplacian_5pt(w.real, g.h) + 1j * laplacian_5pt(w.imag, g.h)
    if r_min is None:
        r_min = 0.0 if lf.d == 1 else ORIGIN_EXCLUSION * g.h
    if lf.d == 1:
        res = np.abs(-lap - w * (1 - np.abs(w) ** 2))
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            wt = lf.weight(g.X, g.Y)
            res = np.abs(-lap - wt * w * (1 - np.abs(w) ** 2))
    keep = g.interior & (g.radius >= r_min)
    if r_max is not None:
        keep &= g.radius <= r_max
    res = np.where(keep, res, 0.0)
    return ScalarField(g, res, {"r_min": r_min, "r_max": r_max})


@dataclass
class KappaReport:
    t: np.ndarray
    rho: np.ndarray
    mean: np.ndarray
    spread: np.ndarray        # arclength-weighted standard deviation
    levels: RadialRearrangement
    g: NonlinearityG
    phi: ScalarField

    @property
    def relative_spread(self) -> np.ndarray:
        return self.spread / np.abs(self.mean)

    def g_nonnegative(self, tol: float = 0.0) -> bool:
        return bool(np.all(self.g.g >= -tol))

    def g_nondecreasing(self, tol: float = 0.0) -> bool:
        ga = self.g.g[::-1]          # ascending in t
        return bool(np.all(np.diff(ga) >= -tol))


def lifted_potential(lf: LiftedField) -> ScalarField:
    """phi with -grad phi = v, normalised to min phi = 0.

    Raises :class:`PathDependenceError` when v is not curl-free.
    """
    return potential(lf.v, sign=1, start=lf.v.geom.center, normalize="inf")


def kappa_constancy(lf: LiftedField, n_levels: int | None = None,
                    phi: ScalarField | None = None) -> KappaReport:
    """Per-level arclength mean and spread of d^-2 r^(-2/d*) (1 - |grad phi|^2).

    The same weighted quantity is integrated in t into the scalar
    nonlinearity g of -Lap phi = g(phi).
    """
    if phi is None:
        phi = lifted_potential(lf)
    levels = sweep_levels(phi, n_levels=n_levels, center=lf.v.geom.center)
    g = reconstruct_nonlinearity(phi, levels, weight=lf.weight, anchor="laplacian")
    spread = g.theta_spread
    return KappaReport(levels.t_grid, levels.rho, g.theta, spread, levels, g, phi)


def boundary_potential_error(phi: ScalarField) -> float:
    """max |phi| over the boundary nodes (phi = 0 on the circle up to O(h))."""
    vals = phi.vals[phi.geom.boundary]
    return float(np.max(np.abs(vals)))


def starshaped_decay(levels: RadialRearrangement, x0=None) -> np.ndarray:
    """Rows (t, rho, I, I rho^2) with I = int ds / <x - x0, nu> - 2 pi.

    Levels that are not star-shaped about x0 get NaN for I.
    """
    x0 = levels.center if x0 is None else np.asarray(x0, dtype=float)
    rows = []
    for t, rho, ls in zip(levels.t_grid, levels.rho, levels.level_sets):
        if is_star_shaped(ls, x0):
            val = starshaped_integral(ls, x0)
        else:
            val = math.nan
        rows.append((t, rho, val, val * rho**2))
    return np.array(rows)


def write_lifted(path: str | Path, lf: LiftedField) -> None:
    """Field file plus a ``.meta`` sidecar with d, d* and the branch error."""
    path = Path(path)
    write_field(path, lf.v)
    write_keyvalue(path.with_suffix(path.suffix + ".meta"), {
        "d": lf.d,
        "d_star": repr(float(lf.d_star)),
        "branch_error": repr(float(lf.branch_error)),
        "source_n": lf.source_geom.n,
        "source_h": repr(float(lf.source_geom.h)),
        "source_R": repr(float(lf.source_geom.R)),
    })


def read_lifted(path: str | Path) -> LiftedField:
    """Inverse of :func:`write_lifted`."""
    path = Path(path)
    v = read_field(path)
    meta = read_keyvalue(path.with_suffix(path.suffix + ".meta"))
    d = int(meta["d"])
    src = GridGeometry(int(meta["source_n"]), float(meta["source_h"]), float(meta["source_R"]))
    return LiftedField(v, d, conjugate_exponent(d), src, float(meta["branch_error"]))


def require_kappa_constant(kr: KappaReport, spread_tol: float = 0.05) -> None:
    """Raise :class:`HypothesisError` if kappa varies on some level curve by
    more than ``spread_tol`` of its mean."""
    bad = kr.relative_spread > spread_tol
    if np.any(bad):
        raise HypothesisError(
            f"kappa varies on {int(bad.sum())} level curves (max relative spread "
            f"{float(kr.relative_spread.max()):.3g})")
