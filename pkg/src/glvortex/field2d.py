"""Complex fields on disk-embedded Cartesian grids.

Nodes are classified as interior (|x| < R), boundary (outside the open disk
but 4-adjacent to an interior node) or exterior.  Field arrays are stored on
the full square grid; exterior values are only an extension used by path
integrals and interpolation stencils.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pyamg
import scipy.sparse as sp
from scipy import ndimage
from scipy.sparse.linalg import LinearOperator, minres, spsolve

from .radial import DISK, RadialProfile

EXTERIOR, INTERIOR, BOUNDARY = 0, 1, 2


class ConvergenceError(RuntimeError):
    pass


class DegreeError(ValueError):
    """The modulus is too small on the sampling circle for a winding number."""


class PathDependenceError(ValueError):
    """Two integration paths disagree: the field is not curl-free enough."""


class ZeroFitError(ValueError):
    pass


@dataclass
class GridGeometry:
    n: int
    h: float
    R: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.h * (self.n - 1) < 2 * self.R:
            raise ValueError("grid does not cover the disk: h (n - 1) < 2 R")
        self.center = (float(self.center[0]), float(self.center[1]))
        offs = (np.arange(self.n) - (self.n - 1) / 2) * self.h
        self.x1d = self.center[0] + offs
        self.y1d = self.center[1] + offs
        self.X, self.Y = np.meshgrid(self.x1d, self.y1d)  # [i, j] -> (x_j, y_i)
        rr = np.hypot(self.X - self.center[0], self.Y - self.center[1])
        inside = rr < self.R
        near = np.zeros_like(inside)
        near[1:, :] |= inside[:-1, :]
        near[:-1, :] |= inside[1:, :]
        near[:, 1:] |= inside[:, :-1]
        near[:, :-1] |= inside[:, 1:]
        mask = np.full(inside.shape, EXTERIOR, dtype=np.int8)
        mask[inside] = INTERIOR
        mask[~inside & near] = BOUNDARY
        self.mask = mask
        self.radius = rr

    @classmethod
    def for_disk(cls, R: float, cells_per_radius: int, center=(0.0, 0.0)) -> "GridGeometry":
        """Square grid with spacing R / cells_per_radius and one spare ring."""
        h = R / cells_per_radius
        return cls(2 * cells_per_radius + 3, h, R, center)

    @property
    def interior(self) -> np.ndarray:
        return self.mask == INTERIOR

    @property
    def boundary(self) -> np.ndarray:
        return self.mask == BOUNDARY

    @property
    def active(self) -> np.ndarray:
        return self.mask != EXTERIOR

    def to_index(self, x, y):
        """Fractional (row, col) index of physical points."""
        j = (np.asarray(x) - self.x1d[0]) / self.h
        i = (np.asarray(y) - self.y1d[0]) / self.h
        return i, j

    def same_as(self, other: "GridGeometry") -> bool:
        return (self.n == other.n and math.isclose(self.h, other.h)
                and math.isclose(self.R, other.R) and self.center == other.center)


@dataclass
class Field2D:
    geom: GridGeometry
    re: np.ndarray
    im: np.ndarray
    bc_degree: int
    info: dict = field(default_factory=dict)

    @property
    def u(self) -> np.ndarray:
        return self.re + 1j * self.im

    @classmethod
    def from_complex(cls, geom, u, bc_degree, info=None) -> "Field2D":
        return cls(geom, np.ascontiguousarray(u.real), np.ascontiguousarray(u.imag),
                   bc_degree, dict(info or {}))

    def copy(self) -> "Field2D":
        return Field2D(self.geom, self.re.copy(), self.im.copy(), self.bc_degree, dict(self.info))

    def modulus(self) -> np.ndarray:
        return np.hypot(self.re, self.im)


@dataclass
class ScalarField:
    geom: GridGeometry
    vals: np.ndarray
    info: dict = field(default_factory=dict)


@dataclass
class ZeroFit:
    location: np.ndarray
    degree_est: int
    a1: complex
    a2: complex
    residual: float

    @property
    def positive_orientation(self) -> bool:
        return abs(self.a1) > abs(self.a2)


# ---------------------------------------------------------------- helpers


def boundary_data(geom: GridGeometry, d: int) -> np.ndarray:
    """exp(i d theta) about the disk centre, on every node."""
    z = (geom.X - geom.center[0]) + 1j * (geom.Y - geom.center[1])
    w = np.ones_like(z)
    nz = np.abs(z) > 0
    w[nz] = z[nz] / np.abs(z[nz])
    return w**d if d >= 0 else np.conj(w) ** (-d)


def bilinear(geom: GridGeometry, arr: np.ndarray, x, y) -> np.ndarray:
    """Bilinear interpolation of a nodal array at physical points."""
    i, j = geom.to_index(x, y)
    i = np.asarray(i, dtype=float)
    j = np.asarray(j, dtype=float)
    i0 = np.clip(np.floor(i).astype(int), 0, geom.n - 2)
    j0 = np.clip(np.floor(j).astype(int), 0, geom.n - 2)
    di = i - i0
    dj = j - j0
    a = arr[i0, j0]
    b = arr[i0, j0 + 1]
    c = arr[i0 + 1, j0]
    e = arr[i0 + 1, j0 + 1]
    return (1 - di) * ((1 - dj) * a + dj * b) + di * ((1 - dj) * c + dj * e)


def _keys(s):
    """Keys cubic-convolution weights (a = -1/2) for offsets -1, 0, 1, 2."""
    s2, s3 = s * s, s * s * s
    return (-0.5 * s3 + s2 - 0.5 * s,
            1.5 * s3 - 2.5 * s2 + 1.0,
            -1.5 * s3 + 2.0 * s2 + 0.5 * s,
            0.5 * s3 - 0.5 * s2)


def bicubic(geom: GridGeometry, arr: np.ndarray, x, y) -> np.ndarray:
    """Local cubic-convolution interpolation (4 x 4 stencil, third order).

    Only the 16 surrounding nodes are read, so NaN outside the disk does
    not spread beyond one cell.
    """
    i, j = geom.to_index(x, y)
    i = np.asarray(i, dtype=float)
    j = np.asarray(j, dtype=float)
    i0 = np.clip(np.floor(i).astype(int), 1, geom.n - 3)
    j0 = np.clip(np.floor(j).astype(int), 1, geom.n - 3)
    wi = _keys(i - i0)
    wj = _keys(j - j0)
    out = np.zeros(np.broadcast(i, j).shape)
    for a in range(4):
        row = np.zeros_like(out)
        for b in range(4):
            row = row + wj[b] * arr[i0 - 1 + a, j0 - 1 + b]
        out = out + wi[a] * row
    return out


def laplacian_5pt(arr: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(arr)
    out[1:-1, 1:-1] = (arr[2:, 1:-1] + arr[:-2, 1:-1] + arr[1:-1, 2:] + arr[1:-1, :-2]
                       - 4 * arr[1:-1, 1:-1]) / (h * h)
    return out


def gradient(arr: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Centred differences; returns (d/dx, d/dy) with x along columns."""
    gy, gx = np.gradient(arr, h)
    return gx, gy


def _diff4(arr: np.ndarray, h: float, axis: int) -> np.ndarray:
    d2 = np.gradient(arr, h, axis=axis)
    a = np.moveaxis(arr, axis, 0)
    out = np.moveaxis(d2, axis, 0).copy()
    d4 = (a[:-4] - 8 * a[1:-3] + 8 * a[3:-1] - a[4:]) / (12 * h)
    inner = out[2:-2]
    ok = np.isfinite(d4)
    inner[ok] = d4[ok]
    return np.moveaxis(out, 0, axis)


def gradient4(arr: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Fourth-order centred differences where the 5-point stencil is
    available (finite), second order elsewhere."""
    return _diff4(arr, h, 1), _diff4(arr, h, 0)


def conjugate(u: Field2D) -> Field2D:
    return Field2D(u.geom, u.re.copy(), -u.im, -u.bc_degree, dict(u.info))


def rotate(u: Field2D, beta: float) -> Field2D:
    """Target-space rotation R_beta u = exp(i beta) u."""
    w = np.exp(1j * beta) * u.u
    return Field2D.from_complex(u.geom, w, u.bc_degree, u.info)


# ---------------------------------------------------------------- operations


def synthesize_field(p: RadialProfile, geom: GridGeometry, center=None,
                     snap_boundary: bool | None = None, conjugate_field: bool = False) -> Field2D:
    """u(x) = exp(i d theta) f_d(|x - c|) from a radial profile.

    Boundary nodes are snapped to exp(i d theta) about the disk centre when
    ``snap_boundary`` is true; the default snaps only for disk profiles,
    whose boundary value is exactly 1.
    """
    c = geom.center if center is None else (float(center[0]), float(center[1]))
    if snap_boundary is None:
        snap_boundary = p.domain_kind == DISK
    z = (geom.X - c[0]) + 1j * (geom.Y - c[1])
    r = np.abs(z)
    need = geom.interior if snap_boundary else geom.active
    if r[need].max() > p.r[-1] + 1e-12:
        raise ValueError("profile too short for this grid")
    spline = p.interpolant()
    f = np.ones_like(r)
    inside = r <= p.r[-1]
    f[inside] = spline(r[inside])
    phase = np.zeros_like(z)
    nz = r > 0
    phase[nz] = (z[nz] / r[nz]) ** p.degree
    u = phase * f
    if snap_boundary:
        bd = boundary_data(geom, p.degree)
        u[geom.boundary] = bd[geom.boundary]
    if conjugate_field:
        u = np.conj(u)
    d = -p.degree if conjugate_field else p.degree
    return Field2D.from_complex(geom, u, d, {"source": "synthesized", "center": c})


def gl_residual(u: Field2D) -> ScalarField:
    """|-Lap_h u - u (1 - |u|^2)| on interior nodes, zero elsewhere."""
    w = u.u
    lap = laplacian_5pt(w.real, u.geom.h) + 1j * laplacian_5pt(w.imag, u.geom.h)
    res = np.abs(-lap - w * (1 - np.abs(w) ** 2))
    res[~u.geom.interior] = 0.0
    return ScalarField(u.geom, res)


def _laplacian_matrix(geom: GridGeometry):
    """5-point Laplacian restricted to interior unknowns.

    Returns (L, B, idx): L acts on interior values, B maps the full nodal
    vector (boundary values) into the interior rows.
    """
    interior = geom.interior
    idx = -np.ones(interior.shape, dtype=np.int64)
    ii, jj = np.nonzero(interior)
    idx[ii, jj] = np.arange(len(ii))
    n_int = len(ii)
    rows, cols, vals = [np.arange(n_int)], [np.arange(n_int)], [np.full(n_int, -4.0)]
    brow, bcol = [], []
    flat = geom.n
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ni, nj = ii + di, jj + dj
        nb = idx[ni, nj]
        ok = nb >= 0
        rows.append(np.arange(n_int)[ok])
        cols.append(nb[ok])
        vals.append(np.ones(ok.sum()))
        brow.append(np.arange(n_int)[~ok])
        bcol.append(ni[~ok] * flat + nj[~ok])
    h2 = geom.h**2
    L = sp.csr_matrix((np.concatenate(vals) / h2, (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_int, n_int))
    brow = np.concatenate(brow)
    bcol = np.concatenate(bcol)
    B = sp.csr_matrix((np.full(len(brow), 1.0 / h2), (brow, bcol)), shape=(n_int, flat * flat))
    return L, B, (ii, jj)


def _shifted_laplacian_preconditioner(L):
    """SPD preconditioner for the symmetric, possibly indefinite Newton
    Jacobian: one AMG V-cycle of -L + 2 applied to each component."""
    n = L.shape[0]
    P = pyamg.smoothed_aggregation_solver(
        (-L + 2.0 * sp.identity(n, format="csr")).tocsr()).aspreconditioner(cycle="V")
    return LinearOperator((2 * n, 2 * n), dtype=float,
                          matvec=lambda v: np.concatenate([P @ v[:n], P @ v[n:]]))


def _newton_step(L, precond, a, b, rhs):
    """Solve the linearised system with MINRES; the Jacobian is symmetric.
    Small systems fall back to a direct solve."""
    J = sp.bmat([
        [-L - sp.diags(1 - 3 * a * a - b * b), sp.diags(2 * a * b)],
        [sp.diags(2 * a * b), -L - sp.diags(1 - a * a - 3 * b * b)],
    ], format="csr")
    if J.shape[0] < 20000:
        return spsolve(J.tocsc(), rhs)
    x, info = minres(J, rhs, M=precond, rtol=1e-14, maxiter=1000)
    if info != 0:
        x = spsolve(J.tocsc(), rhs)
    return x


def relax_solve(u0: Field2D, max_iter: int = 50, tol: float = 1e-10) -> Field2D:
    """Damped Newton iteration for the 5-point discretisation of
    -Lap u = u (1 - |u|^2) with the boundary nodes of ``u0`` held fixed.

    The returned field carries ``info`` with the residual history and the
    flags ``converged`` and ``diverged``.  Divergence (a tenfold residual
    growth) raises :class:`ConvergenceError`; running out of iterations
    returns the best iterate with ``converged=False``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    geom = u0.geom
    L, B, (ii, jj) = _laplacian_matrix(geom)
    n_int = len(ii)
    a = u0.re[ii, jj].copy()
    b = u0.im[ii, jj].copy()
    ba = B @ u0.re.ravel()
    bb = B @ u0.im.ravel()

    def resid(a, b):
        m = 1 - a * a - b * b
        return -(L @ a + ba) - a * m, -(L @ b + bb) - b * m

    Fa, Fb = resid(a, b)
    precond = _shifted_laplacian_preconditioner(L) if n_int else None
    hist = [float(np.max(np.hypot(Fa, Fb))) if n_int else 0.0]
    best = (hist[0], a.copy(), b.copy())
    converged = hist[0] < tol
    diverged = False
    it = 0
    while not converged and it < max_iter:
        it += 1
        step = _newton_step(L, precond, a, b, -np.concatenate([Fa, Fb]))
        da, db = step[:n_int], step[n_int:]
        lam = 1.0
        cur = np.linalg.norm(np.concatenate([Fa, Fb]))
        while True:
            na, nb_ = a + lam * da, b + lam * db
            nFa, nFb = resid(na, nb_)
            if np.linalg.norm(np.concatenate([nFa, nFb])) < cur or lam < 1e-4:
                break
            lam *= 0.5
        a, b, Fa, Fb = na, nb_, nFa, nFb
        hist.append(float(np.max(np.hypot(Fa, Fb))))
        if hist[-1] < best[0]:
            best = (hist[-1], a.copy(), b.copy())
        converged = hist[-1] < tol
        window = hist[-100:]
        if len(hist) > 10 and hist[-1] > 10 * min(window):
            diverged = True
            break
    _, a, b = best
    re = u0.re.copy()
    im = u0.im.copy()
    re[ii, jj] = a
    im[ii, jj] = b
    ext = geom.mask == EXTERIOR
    bd = boundary_data(geom, u0.bc_degree)
    re[ext], im[ext] = bd.real[ext], bd.imag[ext]
    info = dict(u0.info)
    info.update(source="relax_solve", iterations=it, residual_history=hist,
                converged=bool(converged), diverged=diverged)
    out = Field2D(geom, re, im, u0.bc_degree, info)
    if diverged:
        raise ConvergenceError(f"Newton iteration diverged (residual {hist[-1]:.3g})")
    if not converged:
        warnings.warn(f"relax_solve: max_iter reached, residual {best[0]:.3g}")
    return out


def degree(u: Field2D, radius: float, center=None) -> int:
    """Winding number of u along a circle, from wrapped phase increments."""
    geom = u.geom
    c = geom.center if center is None else center
    m = 8 * int(math.ceil(radius / geom.h))
    th = np.linspace(0.0, 2 * np.pi, m, endpoint=False)
    x = c[0] + radius * np.cos(th)
    y = c[1] + radius * np.sin(th)
    w = bilinear(geom, u.re, x, y) + 1j * bilinear(geom, u.im, x, y)
    if np.min(np.abs(w)) <= 0.2:
        raise DegreeError(f"|u| <= 0.2 on the circle of radius {radius}")
    ph = np.angle(w)
    inc = np.diff(np.append(ph, ph[0]))
    inc = (inc + np.pi) % (2 * np.pi) - np.pi
    return int(round(inc.sum() / (2 * np.pi)))


def _newton_zero(u: Field2D, x, y, gx_re, gy_re, gx_im, gy_im, steps=10):
    geom = u.geom
    for _ in range(steps):
        fr = float(bilinear(geom, u.re, x, y))
        fi = float(bilinear(geom, u.im, x, y))
        J = np.array([[bilinear(geom, gx_re, x, y), bilinear(geom, gy_re, x, y)],
                      [bilinear(geom, gx_im, x, y), bilinear(geom, gy_im, x, y)]], dtype=float)
        try:
            dx, dy = np.linalg.solve(J, [-fr, -fi])
        except np.linalg.LinAlgError:
            break
        if math.hypot(dx, dy) > 2 * geom.h:
            break
        x, y = x + dx, y + dy
        if math.hypot(dx, dy) < 1e-12 * geom.h:
            break
    return x, y


def find_zeros(u: Field2D, thresh: float = 0.1) -> list[np.ndarray]:
    """Locate isolated zeros of u.

    Each connected component of {|u| < thresh} is reduced to a centroid
    weighted by (thresh - |u|), then refined by Newton steps on (re, im).
    Components touching non-interior nodes are reported by a warning and
    skipped.
    """
    if thresh <= 0:
        raise ValueError("thresh must be positive")
    geom = u.geom
    mod = u.modulus()
    low = (mod < thresh) & geom.interior
    labels, count = ndimage.label(low)
    if count == 0:
        warnings.warn("no node has |u| below the threshold; no zeros resolved")
        return []
    gx_re, gy_re = gradient(u.re, geom.h)
    gx_im, gy_im = gradient(u.im, geom.h)
    edge = np.zeros_like(low)
    edge |= ~ndimage.binary_erosion(geom.interior, border_value=0)
    zeros = []
    for k in range(1, count + 1):
        comp = labels == k
        if np.any(comp & edge):
            warnings.warn("a low-modulus component touches the boundary; skipped")
            continue
        w = (thresh - mod[comp])
        x = float(np.sum(w * geom.X[comp]) / w.sum())
        y = float(np.sum(w * geom.Y[comp]) / w.sum())
        x, y = _newton_zero(u, x, y, gx_re, gy_re, gx_im, gy_im)
        zeros.append(np.array([x, y]))
    return zeros


def divergence_field(u: Field2D) -> ScalarField:
    gx_re, _ = gradient(u.re, u.geom.h)
    _, gy_im = gradient(u.im, u.geom.h)
    return ScalarField(u.geom, gx_re + gy_im)


def curl_field(u: Field2D) -> ScalarField:
    """d(u2)/dx - d(u1)/dy for u = (u1, u2), by centred differences."""
    _, gy_re = gradient(u.re, u.geom.h)
    gx_im, _ = gradient(u.im, u.geom.h)
    return ScalarField(u.geom, gx_im - gy_re)


def best_rotation(u: Field2D) -> float:
    """Angle beta in [0, 2 pi) minimising the L2 norm of curl(exp(i beta) u).

    curl(R_beta u) = cos(beta) curl u + sin(beta) div u, so the objective is
    a quadratic form in (cos beta, sin beta); its minimiser is the smallest
    eigenvector.  Of the two antipodal minimisers the one whose rotated field
    points outward (positive total divergence) is returned.
    """
    m = u.geom.interior
    C = curl_field(u).vals[m]
    D = divergence_field(u).vals[m]
    Q = np.array([[C @ C, C @ D], [C @ D, D @ D]])
    evals, evecs = np.linalg.eigh(Q)
    if evals[1] - evals[0] <= 1e-12 * max(evals[1], 1e-300):
        return 0.0
    c, s = evecs[:, 0]
    if np.sum(c * D - s * C) < 0:
        c, s = -c, -s
    beta = math.atan2(s, c) % (2 * np.pi)
    if beta >= 2 * np.pi - 1e-15:
        beta = 0.0
    return beta


def curl_norm(u: Field2D) -> float:
    m = u.geom.interior
    return float(np.sqrt(np.sum(curl_field(u).vals[m] ** 2) * u.geom.h**2))


def _cumtrap(arr: np.ndarray, axis: int, start: int, h: float) -> np.ndarray:
    """Integral along ``axis`` measured from index ``start``: trapezoid sums
    with the endpoint correction -h^2/12 (f'(x) - f'(x_start)), which makes
    the rule fourth order for smooth data."""
    a = np.moveaxis(arr, axis, 0)
    inc = 0.5 * h * (a[1:] + a[:-1])
    cum = np.zeros_like(a)
    cum[1:] = np.cumsum(inc, axis=0)
    cum -= cum[start]
    if a.shape[0] > 2:
        da = np.gradient(a, h, axis=0)
        cum -= h * h / 12.0 * (da - da[start])
    return np.moveaxis(cum, 0, axis)


def potential(u: Field2D, sign: int = 1, start=None, normalize: str = "inf",
              path_tol: float | None = None) -> ScalarField:
    """Scalar phi with -sign * grad(phi) = u.

    phi is the average of two grid-path integrals from the start node
    (row-then-column and column-then-row); their maximal disagreement is kept
    in ``info['path_dev']`` and must stay below ``path_tol`` (default
    h^2 times the disk radius).  ``normalize`` is ``"inf"`` (min phi = 0
    on the disk) or ``"asymptotic"`` (phi + |x - x0| -> 0 far out, fitted on
    an outer annulus with the correction -d^2 / (2 |x - x0|)).
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    geom = u.geom
    h = geom.h
    if start is None:
        zs = find_zeros(u) if np.min(u.modulus()[geom.interior]) < 0.1 else []
        if zs:
            x0 = zs[0]
        else:
            x0 = np.array(geom.center)
    else:
        x0 = np.asarray(start, dtype=float)
    i0 = int(round((x0[1] - geom.y1d[0]) / h))
    j0 = int(round((x0[0] - geom.x1d[0]) / h))
    px = -sign * u.re
    py = -sign * u.im
    row = _cumtrap(px[i0:i0 + 1, :], 1, j0, h)[0]       # along row i0
    col_from_row = _cumtrap(py, 0, i0, h)                 # along each column from row i0
    phi_hv = row[None, :] + col_from_row
    col = _cumtrap(py[:, j0:j0 + 1], 0, i0, h)[:, 0]     # along column j0
    row_from_col = _cumtrap(px, 1, j0, h)                 # along each row from column j0
    phi_vh = col[:, None] + row_from_col
    act = geom.active
    dev = float(np.max(np.abs(phi_hv - phi_vh)[act]))
    if path_tol is None:
        path_tol = h * h * geom.R
    if dev > path_tol:
        raise PathDependenceError(
            f"path integrals disagree by {dev:.3g} > {path_tol:.3g}; field is not curl-free")
    phi = 0.5 * (phi_hv + phi_vh)
    if normalize == "inf":
        phi -= np.min(phi[act])
    elif normalize == "asymptotic":
        rr = np.hypot(geom.X - x0[0], geom.Y - x0[1])
        ring = act & (rr >= 0.7 * geom.R) & (rr <= 0.95 * geom.R)
        d = abs(u.bc_degree)
        phi -= np.mean(phi[ring] + rr[ring] + d * d / (2 * rr[ring]))
    elif normalize is not None:
        raise ValueError(f"unknown normalisation {normalize!r}")
    out = np.where(act, phi, np.nan)
    return ScalarField(geom, out, {"path_dev": dev, "start": tuple(map(float, x0)),
                                   "sign": sign})


def local_zero_fit(u: Field2D, x0, fit_radius: float) -> ZeroFit:
    """Least-squares fit of u near a zero to a1 z^m + a2 conj(z)^m, m = 1..6."""
    geom = u.geom
    if fit_radius < 5 * geom.h:
        raise ValueError("fit_radius must be at least 5 h")
    x0 = np.asarray(x0, dtype=float)
    z = (geom.X - x0[0]) + 1j * (geom.Y - x0[1])
    sel = (np.abs(z) <= fit_radius) & geom.active
    zs = z[sel]
    us = u.u[sel]
    norm = np.linalg.norm(us)
    best = None
    for m in range(1, 7):
        A = np.column_stack([zs**m, np.conj(zs) ** m])
        coef, *_ = np.linalg.lstsq(A, us, rcond=None)
        res = np.linalg.norm(us - A @ coef) / norm
        if best is None or res < best[0]:
            best = (res, m, coef)
    res, m, coef = best
    if res >= 0.5:
        raise ZeroFitError(f"no degree fits (best relative residual {res:.3g})")
    fit = ZeroFit(x0, m, complex(coef[0]), complex(coef[1]), float(res))
    if not fit.positive_orientation:
        warnings.warn("|a2| >= |a1|: zero has negative orientation")
    return fit


# ---------------------------------------------------------------- file format


def write_field(path: str | Path, u: Field2D) -> None:
    """Header line ``n,h,R,d`` with its values, then ``i,j,re,im`` rows for
    interior and boundary nodes."""
    g = u.geom
    ii, jj = np.nonzero(g.active)
    with open(path, "w", newline="\n") as fh:
        fh.write("n,h,R,d\n")
        fh.write(f"{g.n},{g.h!r},{g.R!r},{u.bc_degree}\n")
        fh.write("i,j,re,im\n")
        for i, j in zip(ii, jj):
            fh.write(f"{i},{j},{u.re[i, j]:.17g},{u.im[i, j]:.17g}\n")


def read_field(path: str | Path) -> Field2D:
    with open(path) as fh:
        head = fh.readline().strip()
        if head != "n,h,R,d":
            raise ValueError(f"{path}: bad field header {head!r}")
        n, h, R, d = fh.readline().strip().split(",")
        n, h, R, d = int(n), float(h), float(R), int(d)
        if fh.readline().strip() != "i,j,re,im":
            raise ValueError(f"{path}: missing node table header")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    geom = GridGeometry(n, h, R)
    ii = data[:, 0].astype(int)
    jj = data[:, 1].astype(int)
    if ii.min() < 0 or jj.min() < 0 or ii.max() >= n or jj.max() >= n:
        raise ValueError(f"{path}: node index outside an {n}x{n} grid")
    got = np.zeros((n, n), dtype=bool)
    got[ii, jj] = True
    if not np.array_equal(got, geom.active):
        raise ValueError(f"{path}: node set inconsistent with header (n, h, R)")
    bd = boundary_data(geom, d)
    re, im = bd.real.copy(), bd.imag.copy()
    re[ii, jj] = data[:, 2]
    im[ii, jj] = data[:, 3]
    return Field2D(geom, re, im, d, {"source": str(path)})
