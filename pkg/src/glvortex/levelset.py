"""Marching-squares extraction of closed level curves {phi = t}.

Curves are oriented counterclockwise around the super-level region
{phi > t}, so the outward unit normal of a segment with direction
(dx, dy) is (dy, -dx) / length and points toward decreasing phi.
Saddle cells are resolved by comparing the cell-centre average with t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field2d import ScalarField


class LevelSetError(ValueError):
    """The requested level cannot be represented by closed curves."""


@dataclass
class LevelSet:
    t: float
    loops: list            # each an (m + 1, 2) array with first == last vertex
    area: float
    perimeter: float
    normals: np.ndarray    # (k, 2) outward unit normals, one per segment
    arclengths: np.ndarray  # (k,) segment lengths
    midpoints: np.ndarray  # (k, 2) segment midpoints (quadrature nodes)
    h: float

    @property
    def vertices(self) -> np.ndarray:
        return np.concatenate([lp[:-1] for lp in self.loops])

    def integrate(self, values: np.ndarray) -> float:
        """Midpoint-rule line integral of per-segment values."""
        return float(np.dot(values, self.arclengths))


# Edge numbering inside a cell, counterclockwise: 0 bottom, 1 right, 2 top,
# 3 left.  Corner k sits between edge k - 1 and edge k (corner 0 is the
# bottom-left node, corner 1 bottom-right, 2 top-right, 3 top-left).
def _segments_for(case: int, centre_high: bool) -> list[tuple[int, int]]:
    high = [(case >> k) & 1 for k in range(4)]
    n_high = sum(high)
    if n_high in (0, 4):
        return []
    if n_high == 1:
        k = high.index(1)
        return [(k, (k - 1) % 4)]
    if n_high == 3:
        k = high.index(0)
        return [((k - 1) % 4, k)]
    # two high corners
    if high[0] == high[2]:          # saddle
        lows = [k for k in range(4) if not high[k]]
        highs = [k for k in range(4) if high[k]]
        if centre_high:
            return [((k - 1) % 4, k) for k in lows]
        return [(k, (k - 1) % 4) for k in highs]
    k = next(k for k in range(4) if high[k] and high[(k + 1) % 4])
    return [((k + 1) % 4, (k - 1) % 4)]


_TABLE = {(c, s): _segments_for(c, s) for c in range(16) for s in (False, True)}


def _edge_ids(n: int, i: np.ndarray, j: np.ndarray, e: int) -> np.ndarray:
    """Global integer id of edge e of cell (i, j) on an n x n node grid.

    Horizontal edge (i, j)-(i, j+1) has id i n + j; vertical edge
    (i, j)-(i+1, j) has id n^2 + i n + j.
    """
    if e == 0:
        return i * n + j
    if e == 2:
        return (i + 1) * n + j
    if e == 1:
        return n * n + i * n + (j + 1)
    return n * n + i * n + j


def _edge_points(vals, x1d, y1d, n, ids, t):
    """Linear interpolation of the crossing point on each edge id."""
    horiz = ids < n * n
    k = np.where(horiz, ids, ids - n * n)
    i, j = np.divmod(k, n)
    i2 = np.where(horiz, i, i + 1)
    j2 = np.where(horiz, j + 1, j)
    va = vals[i, j]
    vb = vals[i2, j2]
    s = (t - va) / (vb - va)
    x = x1d[j] + s * (x1d[j2] - x1d[j])
    y = y1d[i] + s * (y1d[i2] - y1d[i])
    return np.column_stack([x, y])


def extract_level_set(phi: ScalarField, t: float, min_vertices: int = 8) -> LevelSet:
    """Closed polylines of {phi = t} with area, perimeter and normals.

    Nodes outside the computational disk carry NaN; a level that crosses a
    cell with a NaN corner reaches the domain edge and is rejected.
    """
    geom = phi.geom
    v = phi.vals
    finite = np.isfinite(v)
    if not finite.any():
        raise LevelSetError("field has no finite values")
    vmin, vmax = np.nanmin(v), np.nanmax(v)
    if not (vmin < t < vmax):
        raise LevelSetError(f"level {t:.6g} outside the open range ({vmin:.6g}, {vmax:.6g})")
    n = geom.n
    above = np.where(finite, v > t, False)
    c0 = above[:-1, :-1]
    c1 = above[:-1, 1:]
    c2 = above[1:, 1:]
    c3 = above[1:, :-1]
    case = (c0.astype(np.int8) | (c1 << 1) | (c2 << 2) | (c3 << 3)).astype(np.int8)
    cells_nan = ~(finite[:-1, :-1] & finite[:-1, 1:] & finite[1:, 1:] & finite[1:, :-1])
    mixed = (case != 0) & (case != 15)
    if np.any(mixed & cells_nan):
        raise LevelSetError(f"level {t:.6g} reaches the domain boundary (incomplete loop)")
    vv = np.where(finite, v, 0.0)
    centre = 0.25 * (vv[:-1, :-1] + vv[:-1, 1:] + vv[1:, 1:] + vv[1:, :-1]) > t

    src, dst = [], []
    for (cs, ch), segs in _TABLE.items():
        if not segs:
            continue
        sel = mixed & (case == cs)
        if cs in (5, 10):
            sel &= centre == ch
        elif ch:
            continue
        ii, jj = np.nonzero(sel)
        if ii.size == 0:
            continue
        for a, b in segs:
            src.append(_edge_ids(n, ii, jj, a))
            dst.append(_edge_ids(n, ii, jj, b))
    if not src:
        raise LevelSetError(f"level {t:.6g} produced no segments")
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    nxt = dict(zip(src.tolist(), dst.tolist()))
    if len(nxt) != src.size:
        raise LevelSetError("inconsistent contour topology (edge used twice)")

    loops_ids = []
    unvisited = set(nxt)
    for start in src.tolist():
        if start not in unvisited:
            continue
        ids = [start]
        unvisited.discard(start)
        cur = nxt[start]
        while cur != start:
            if cur not in unvisited:
                raise LevelSetError("open contour encountered")
            ids.append(cur)
            unvisited.discard(cur)
            cur = nxt[cur]
        loops_ids.append(np.array(ids))

    loops = []
    for ids in loops_ids:
        pts = _edge_points(v, geom.x1d, geom.y1d, n, ids, t)
        keep = np.ones(len(pts), dtype=bool)
        keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
        pts = pts[keep]
        if len(pts) > 1 and np.all(pts[-1] == pts[0]):
            pts = pts[:-1]
        if len(pts) < 3:
            continue
        loops.append(np.vstack([pts, pts[:1]]))
    if not loops:
        raise LevelSetError(f"level {t:.6g} degenerates to points")
    if sum(len(lp) - 1 for lp in loops) < min_vertices:
        raise LevelSetError(f"level {t:.6g} is resolved by fewer than {min_vertices} vertices")
    return _assemble(t, loops, geom.h)


def _assemble(t: float, loops: list, h: float) -> LevelSet:
    area = 0.0
    normals, lens, mids = [], [], []
    for lp in loops:
        x, y = lp[:, 0], lp[:, 1]
        area += 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))
        d = np.diff(lp, axis=0)
        ln = np.hypot(d[:, 0], d[:, 1])
        normals.append(np.column_stack([d[:, 1], -d[:, 0]]) / ln[:, None])
        lens.append(ln)
        mids.append(0.5 * (lp[1:] + lp[:-1]))
    lens = np.concatenate(lens)
    return LevelSet(float(t), loops, area, float(lens.sum()), np.concatenate(normals),
                    lens, np.concatenate(mids), float(h))


def polygon_level_set(vertices, t: float = 0.0, h: float = 0.0) -> LevelSet:
    """LevelSet from an explicit counterclockwise polygon (test fixtures,
    analytic curves)."""
    pts = np.asarray(vertices, dtype=float)
    if np.all(pts[0] == pts[-1]):
        pts = pts[:-1]
    return _assemble(t, [np.vstack([pts, pts[:1]])], h)


def outer_loop_count(ls: LevelSet) -> int:
    """Number of loops enclosing positive area (separate super-level components)."""
    count = 0
    for lp in ls.loops:
        x, y = lp[:, 0], lp[:, 1]
        if np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]) > 0:
            count += 1
    return count
