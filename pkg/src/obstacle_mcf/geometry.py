"""Signed distances, marching-squares contours and the metrics built on them."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from numba import njit
from scipy import ndimage
from scipy.spatial import ConvexHull, cKDTree

from .grid import BinarySet, ContourSet, Grid, GridError, Polyline, ScalarField


class EmptyContourError(ValueError):
    """A metric was asked for on an empty contour set."""


Disk = tuple[tuple[float, float], float]


# -- signed distances -----------------------------------------------------


def signed_distance_disks(grid: Grid, disks: Sequence[Disk]) -> ScalarField:
    """``min_k (|p - c_k| - r_k)``: negative inside the union of the disks."""
    if not disks:
        raise ValueError("need at least one disk")
    X, Y = grid.coords()
    out = np.full(grid.shape, np.inf)
    for (cx, cy), r in disks:
        if not r > 0:
            raise ValueError(f"disk radius must be positive, got {r}")
        out = np.minimum(out, np.hypot(X - cx, Y - cy) - r)
    return ScalarField(grid, out)


def signed_distance_to_set(E: BinarySet, method: str = "exact") -> ScalarField:
    """Signed distance from every node to the nearest node of the opposite phase.

    ``method="exact"`` uses an exact Euclidean distance transform;
    ``method="sweep"`` propagates nearest opposite nodes in alternating
    raster sweeps (cheaper in memory, occasionally off by a fraction of a cell).
    """
    inside = E.inside
    if inside.all() or not inside.any():
        raise ValueError("signed distance needs both inside and outside nodes")
    g = E.grid
    if method == "exact":
        sampling = (g.hy, g.hx)
        d_in = ndimage.distance_transform_edt(inside, sampling=sampling)
        d_out = ndimage.distance_transform_edt(~inside, sampling=sampling)
    elif method == "sweep":
        d_in = _sweep_distance(~inside, g.hx, g.hy)
        d_out = _sweep_distance(inside, g.hx, g.hy)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ScalarField(g, np.where(inside, -d_in, d_out))


@njit(cache=True)
def _sweep_distance(targets, hx, hy):
    ny, nx = targets.shape
    si = np.full((ny, nx), -1, dtype=np.int64)
    sj = np.full((ny, nx), -1, dtype=np.int64)
    dist = np.full((ny, nx), np.inf)
    for j in range(ny):
        for i in range(nx):
            if targets[j, i]:
                si[j, i] = i
                sj[j, i] = j
                dist[j, i] = 0.0
    for _ in range(2):
        for dj, di in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            j0 = 0 if dj > 0 else ny - 1
            i0 = 0 if di > 0 else nx - 1
            for jj in range(ny):
                j = j0 + dj * jj
                for ii in range(nx):
                    i = i0 + di * ii
                    for oj, oi in ((-dj, 0), (0, -di), (-dj, -di)):
                        qj = j + oj
                        qi = i + oi
                        if qj < 0 or qj >= ny or qi < 0 or qi >= nx or si[qj, qi] < 0:
                            continue
                        cx = (si[qj, qi] - i) * hx
                        cy = (sj[qj, qi] - j) * hy
                        d = np.sqrt(cx * cx + cy * cy)
                        if d < dist[j, i]:
                            dist[j, i] = d
                            si[j, i] = si[qj, qi]
                            sj[j, i] = sj[qj, qi]
    return dist


def signed_distance_to_boundary(E: BinarySet) -> ScalarField:
    """Signed distance to the set boundary drawn through the midpoints of cut grid edges.

    Unlike :func:`signed_distance_to_set` this places the interface half way
    between an inside node and its outside neighbour, so nodes adjacent to the
    interface get ``|d| ~ h/2`` rather than ``h``.
    """
    if E.inside.all() or not E.inside.any():
        raise ValueError("signed distance needs both inside and outside nodes")
    return signed_distance_to_contour(E.indicator(), 0.0)


def signed_distance_to_contour(u: ScalarField, level: float = 0.0) -> ScalarField:
    """Distance to the piecewise-linear contour ``{u = level}``, negative where ``u <= level``."""
    seg = _segments(u.values, u.grid, level)[0]
    if len(seg) == 0:
        raise ValueError("level is never crossed")
    X, Y = u.grid.coords()
    pts = np.column_stack([X.ravel(), Y.ravel()])
    d = _distance_to_segments(pts, seg)
    d = d.reshape(u.grid.shape)
    return ScalarField(u.grid, np.where(u.values <= level, -d, d))


def _distance_to_segments(pts: np.ndarray, seg: np.ndarray, k: int = 8) -> np.ndarray:
    """Distance from each point to the nearest of ``seg``; candidates are pre-screened by a KD-tree."""
    mid = 0.5 * (seg[:, 0] + seg[:, 1])
    half = 0.5 * np.hypot(*(seg[:, 1] - seg[:, 0]).T).max()
    k = min(k, len(seg))
    dmid, idx = cKDTree(mid).query(pts, k=k)
    if k == 1:
        dmid, idx = dmid[:, None], idx[:, None]
    d = _point_segment_distance(pts[:, None, :], seg[idx])
    best = d.min(axis=1)
    # a segment whose midpoint is outside the k-nearest can only win if it is
    # within ``half`` of the k-th midpoint distance; fall back to brute force there
    unsure = np.nonzero(best > dmid[:, -1] - half)[0] if k < len(seg) else np.zeros(0, int)
    if len(unsure):
        best[unsure] = _brute_min_distance(pts[unsure], seg)
    return best


def _point_segment_distance(p: np.ndarray, seg: np.ndarray) -> np.ndarray:
    a, b = seg[..., 0, :], seg[..., 1, :]
    ab = b - a
    denom = np.einsum("...i,...i", ab, ab)
    t = np.einsum("...i,...i", p - a, ab) / np.where(denom > 0, denom, 1.0)
    t = np.clip(t, 0.0, 1.0)
    q = a + t[..., None] * ab
    return np.sqrt(((p - q) ** 2).sum(-1))


@njit(cache=True)
def _brute_min_distance(pts, seg):
    out = np.empty(len(pts))
    for n in range(len(pts)):
        px, py = pts[n, 0], pts[n, 1]
        best = np.inf
        for m in range(len(seg)):
            ax, ay = seg[m, 0, 0], seg[m, 0, 1]
            bx, by = seg[m, 1, 0], seg[m, 1, 1]
            abx, aby = bx - ax, by - ay
            den = abx * abx + aby * aby
            t = 0.0
            if den > 0:
                t = ((px - ax) * abx + (py - ay) * aby) / den
                t = min(1.0, max(0.0, t))
            qx, qy = ax + t * abx - px, ay + t * aby - py
            d = qx * qx + qy * qy
            if d < best:
                best = d
        out[n] = np.sqrt(best)
    return out


# -- marching squares -----------------------------------------------------

# edges of cell (j, i): 0 bottom, 1 right, 2 top, 3 left.  Corner bits: a=(j,i)
# b=(j,i+1) c=(j+1,i+1) d=(j+1,i) contribute 1, 2, 4, 8 when <= level.
_EDGE_CORNERS = ((0, 1), (1, 2), (3, 2), (0, 3))


def _segments(values: np.ndarray, grid: Grid, level: float):
    """All marching-squares segments as ``(m, 2, 2)`` points plus ``(m, 2)`` global edge ids."""
    u = values
    ny, nx = u.shape
    ins = u <= level
    a, b, c, d = u[:-1, :-1], u[:-1, 1:], u[1:, 1:], u[1:, :-1]
    ia, ib, ic, id_ = ins[:-1, :-1], ins[:-1, 1:], ins[1:, 1:], ins[1:, :-1]
    case = ia.astype(np.int8) | (ib << 1) | (ic << 2) | (id_ << 3)

    nh = ny * (nx - 1)
    jj, ii = np.nonzero((case != 0) & (case != 15))
    if len(jj) == 0:
        return np.zeros((0, 2, 2)), np.zeros((0, 2), dtype=np.int64)
    cs = case[jj, ii]
    edge_ids = np.stack(
        [jj * (nx - 1) + ii, nh + jj * nx + ii + 1, (jj + 1) * (nx - 1) + ii, nh + jj * nx + ii], axis=1
    )
    corners_v = np.stack([a[jj, ii], b[jj, ii], c[jj, ii], d[jj, ii]], axis=1)
    corner_xy = np.stack(
        [
            np.column_stack([ii, jj]),
            np.column_stack([ii + 1, jj]),
            np.column_stack([ii + 1, jj + 1]),
            np.column_stack([ii, jj + 1]),
        ],
        axis=1,
    ).astype(float)
    bits = (cs[:, None] >> np.arange(4)) & 1

    def edge_point(e):
        p, q = _EDGE_CORNERS[e]
        vp, vq = corners_v[:, p], corners_v[:, q]
        den = vq - vp
        t = np.where(den != 0, (level - vp) / np.where(den != 0, den, 1.0), 0.5)
        t = np.clip(t, 0.0, 1.0)
        return corner_xy[:, p] + t[:, None] * (corner_xy[:, q] - corner_xy[:, p])

    pts = np.stack([edge_point(e) for e in range(4)], axis=1)  # (n, 4, 2) in index units
    cut = np.stack([bits[:, p] != bits[:, q] for p, q in _EDGE_CORNERS], axis=1)

    pairs = []
    cells = []
    single = cut.sum(axis=1) == 2
    idx = np.nonzero(single)[0]
    if len(idx):
        order = np.argsort(~cut[idx], axis=1, kind="stable")[:, :2]
        pairs.append(order)
        cells.append(idx)
    saddle = np.nonzero(~single)[0]
    if len(saddle):
        centre_in = corners_v[saddle].mean(axis=1) <= level
        s5 = cs[saddle] == 5
        # which corners get cut off: the phase that the centre does not share
        cut_bd = s5 == centre_in  # cut off b and d
        pa = np.where(cut_bd[:, None], [[0, 1]], [[3, 0]])
        pb = np.where(cut_bd[:, None], [[2, 3]], [[1, 2]])
        pairs += [pa, pb]
        cells += [saddle, saddle]
    pairs = np.concatenate(pairs)
    cells = np.concatenate(cells)
    seg_idx = pts[cells[:, None], pairs]  # (m, 2, 2) (col, row) in index units
    seg = np.empty_like(seg_idx)
    seg[..., 0] = grid.x0 + seg_idx[..., 0] * grid.hx
    seg[..., 1] = grid.y0 + seg_idx[..., 1] * grid.hy
    ids = edge_ids[cells[:, None], pairs]
    return seg, ids


def extract_contour(u: ScalarField, level: float = 0.0) -> ContourSet:
    """Polylines approximating ``{u = level}``.

    Corners with ``u <= level`` count as inside; ambiguous (saddle) cells are
    resolved by the bilinear value at the cell centre.  Polylines that reach
    the domain boundary are returned open.
    """
    seg, ids = _segments(u.values, u.grid, level)
    if len(seg) == 0:
        return ContourSet(())
    point_of = {}
    links: dict[int, list[int]] = {}
    for s, (e0, e1) in enumerate(ids):
        point_of[e0] = seg[s, 0]
        point_of[e1] = seg[s, 1]
        links.setdefault(e0, []).append(s)
        links.setdefault(e1, []).append(s)
    used = np.zeros(len(seg), bool)

    def walk(start_edge, first_seg):
        chain = [start_edge]
        e, s = start_edge, first_seg
        while True:
            used[s] = True
            e0, e1 = ids[s]
            e = e1 if e0 == e else e0
            chain.append(e)
            nxt = [t for t in links[e] if not used[t]]
            if not nxt:
                return chain
            s = nxt[0]

    loops = []
    # open chains start at edges with a single incident segment
    for e in sorted(k for k, v in links.items() if len(v) == 1):
        s = links[e][0]
        if used[s]:
            continue
        chain = walk(e, s)
        loops.append(Polyline(np.array([point_of[k] for k in chain]), closed=False))
    for s in range(len(seg)):
        if used[s]:
            continue
        chain = walk(int(ids[s][0]), s)
        if chain[-1] == chain[0]:
            chain = chain[:-1]
        loops.append(Polyline(np.array([point_of[k] for k in chain]), closed=True))
    return ContourSet(tuple(loops))


# -- metrics --------------------------------------------------------------


def hausdorff(a: ContourSet, b: ContourSet) -> float:
    """Symmetric Hausdorff distance: vertices of each side against the segments of the other."""
    if a.is_empty() or b.is_empty():
        raise EmptyContourError("Hausdorff distance of an empty contour set is undefined")
    return max(directed_distance(a, b), directed_distance(b, a))


def directed_distance(a: ContourSet, b: ContourSet) -> float:
    va, sb = a.vertices(), b.segments()
    if len(va) == 0 or len(sb) == 0:
        raise EmptyContourError("empty contour set")
    return float(_brute_min_distance(va, sb).max())


def sublevel_area(u: ScalarField, level: float = 0.0) -> float:
    """Each cell contributes ``hx*hy`` times the fraction of its corners with ``u <= level``."""
    ins = (u.values <= level).astype(float)
    corners = ins[:-1, :-1] + ins[:-1, 1:] + ins[1:, :-1] + ins[1:, 1:]
    return float(corners.sum() * 0.25 * u.grid.cell_area)


def radii(contours: ContourSet, center: Sequence[float] = (0.0, 0.0)) -> np.ndarray:
    v = contours.vertices()
    return np.hypot(v[:, 0] - center[0], v[:, 1] - center[1])


def mean_radius(contours: ContourSet, center: Sequence[float] = (0.0, 0.0)) -> float:
    """Length-weighted mean distance of the contour from ``center`` (nan if empty)."""
    seg = contours.segments()
    if len(seg) == 0:
        return float("nan")
    mid = 0.5 * (seg[:, 0] + seg[:, 1])
    w = np.hypot(*(seg[:, 1] - seg[:, 0]).T)
    r = np.hypot(mid[:, 0] - center[0], mid[:, 1] - center[1])
    if w.sum() == 0:
        return float(r.mean())
    return float((r * w).sum() / w.sum())


def circle_contour(center: Sequence[float], radius: float, n: int = 720) -> ContourSet:
    t = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    pts = np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])
    return ContourSet((Polyline(pts, closed=True),))


def disk_hull_contour(disks: Sequence[Disk], n: int = 2048) -> ContourSet:
    """Boundary of the convex hull of a union of disks: arcs joined by exact common tangents."""
    if not disks:
        raise ValueError("need at least one disk")
    C = np.array([c for c, _ in disks], float)
    R = np.array([r for _, r in disks], float)

    def support(theta):
        nrm = np.stack([np.cos(theta), np.sin(theta)], -1)
        return np.argmax(C @ nrm.T + R[:, None], axis=0) if np.ndim(theta) else int(
            np.argmax(C @ nrm + R)
        )

    theta = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    owner = support(theta)
    pts = []
    for k in range(n):
        t0, i0 = theta[k], owner[k]
        pts.append(C[i0] + R[i0] * np.array([np.cos(t0), np.sin(t0)]))
        t1 = theta[(k + 1) % n] + (2 * np.pi if k == n - 1 else 0.0)
        i1 = owner[(k + 1) % n]
        if i1 != i0:
            lo, hi = t0, t1
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if support(mid) == i0:
                    lo = mid
                else:
                    hi = mid
            nrm = np.array([np.cos(lo), np.sin(lo)])
            pts.append(C[i0] + R[i0] * nrm)
            pts.append(C[i1] + R[i1] * nrm)
    return ContourSet((Polyline(np.array(pts), closed=True),))


def convex_hull_area(points: np.ndarray) -> float:
    points = np.asarray(points, float)
    if len(points) < 3:
        return 0.0
    return float(ConvexHull(points).volume)


def dilate(E: BinarySet, cells: int = 1) -> BinarySet:
    """Grow ``E`` by ``cells`` grid steps in the 8-neighbourhood sense."""
    if cells <= 0:
        return E
    st = ndimage.generate_binary_structure(2, 2)
    return BinarySet(E.grid, ndimage.binary_dilation(E.inside, structure=st, iterations=cells))


def count_outside(a: BinarySet, b: BinarySet, band: int = 0) -> int:
    """Number of nodes of ``a`` that are not in ``b`` grown by ``band`` cells."""
    return (a - dilate(b, band)).count


def discrete_lipschitz(u: ScalarField) -> float:
    """Largest forward-difference quotient of ``u`` along either axis."""
    v = u.values
    gx = np.abs(np.diff(v, axis=1)).max() / u.grid.hx
    gy = np.abs(np.diff(v, axis=0)).max() / u.grid.hy
    return float(max(gx, gy))


def iter_points(contours: Iterable[ContourSet]) -> np.ndarray:
    pts = [c.vertices() for c in contours if not c.is_empty()]
    if not pts:
        raise GridError("no contour points")
    return np.vstack(pts)
