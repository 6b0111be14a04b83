"""Minimizing-movement steps for perimeter with an inner obstacle.

One step replaces ``E`` by a minimizer of ``Per(F) + (1/h) * integral_F d_E`` over
sets ``F`` containing the obstacle ``omega``.  The set problem is relaxed to

    min  TV(v) + sum(w * v)     over 0 <= v <= 1,  v = 1 on omega,   w = d_E / h

and solved by a primal-dual (PDHG) iteration; thresholding ``v`` recovers a set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit
from scipy.optimize import minimize_scalar

from .geometry import dilate, signed_distance_to_boundary, signed_distance_to_set
from .grid import BinarySet, GridError, ScalarField, write_binary_set
from .levelset import Trajectory


@dataclass(frozen=True)
class SchemeConfig:
    h: float = 0.005
    gap_tol: float = 1e-6
    max_iters: int = 20000
    theta_generic: float = 0.5
    theta_max: float = 1e-3
    check_every: int = 50
    band_cells: float = 8.0
    distance: str = "boundary"

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        if not self.gap_tol > 0:
            raise ValueError("gap_tol must be positive")
        if self.max_iters < 1 or self.check_every < 1:
            raise ValueError("iteration counts must be positive")
        if not 0 < self.theta_generic < 1:
            raise ValueError("theta_generic must lie in (0, 1)")
        if not 0 < self.theta_max < self.theta_generic:
            raise ValueError("theta_max must lie in (0, theta_generic)")
        if self.distance not in ("boundary", "nodes"):
            raise ValueError("distance must be 'boundary' or 'nodes'")

    def with_h(self, h: float) -> "SchemeConfig":
        return SchemeConfig(
            h, self.gap_tol, self.max_iters, self.theta_generic, self.theta_max,
            self.check_every, self.band_cells, self.distance,
        )


@dataclass(frozen=True, eq=False)
class RelaxedSolution:
    v: ScalarField
    gap: float
    iters: int
    converged: bool

    def threshold(self, theta: float) -> BinarySet:
        return BinarySet(self.v.grid, self.v.values >= theta)


# -- PDHG kernels ---------------------------------------------------------


@njit(cache=True, error_model="numpy", inline="always")
def _divergence(px, qx, py, qy, j, i, hx, hy):
    """Backward divergence of the edge duals; an x-edge carries p of its left node plus q of its right."""
    ny, nx = px.shape
    ax = px[j, i]
    if i + 1 < nx:
        ax += qx[j, i + 1]
    if i > 0:
        ax -= px[j, i - 1] + qx[j, i]
    ay = py[j, i]
    if j + 1 < ny:
        ay += qy[j + 1, i]
    if j > 0:
        ay -= py[j - 1, i] + qy[j, i]
    return ax / hx + ay / hy


@njit(cache=True, error_model="numpy")
def _pdhg_band(v, vbar, px, py, qx, qy, w, dj, di, flags, vj, vi, hx, hy, tau, sigma, n):
    ny, nx = v.shape
    for _ in range(n):
        # dual ascent: p pairs the edges leaving a node forwards, q the edges
        # entering it; each pair is projected onto the disk of radius 1/2
        for m in range(len(dj)):
            j, i = dj[m], di[m]
            f = flags[m]
            ax = px[j, i]
            ay = py[j, i]
            if f & 1:
                ax += sigma * (vbar[j, i + 1] - vbar[j, i]) / hx
            if f & 2:
                ay += sigma * (vbar[j + 1, i] - vbar[j, i]) / hy
            nrm = ax * ax + ay * ay
            if nrm > 0.25:
                nrm = 2.0 * np.sqrt(nrm)
                ax /= nrm
                ay /= nrm
            px[j, i] = ax
            py[j, i] = ay
            bx = qx[j, i]
            by = qy[j, i]
            if f & 4:
                bx += sigma * (vbar[j, i] - vbar[j, i - 1]) / hx
            if f & 8:
                by += sigma * (vbar[j, i] - vbar[j - 1, i]) / hy
            nrm = bx * bx + by * by
            if nrm > 0.25:
                nrm = 2.0 * np.sqrt(nrm)
                bx /= nrm
                by /= nrm
            qx[j, i] = bx
            qy[j, i] = by
        for m in range(len(vj)):
            j, i = vj[m], vi[m]
            old = v[j, i]
            dvx = px[j, i]
            if i + 1 < nx:
                dvx += qx[j, i + 1]
            if i > 0:
                dvx -= px[j, i - 1] + qx[j, i]
            dvy = py[j, i]
            if j + 1 < ny:
                dvy += qy[j + 1, i]
            if j > 0:
                dvy -= py[j - 1, i] + qy[j, i]
            new = old + tau * (dvx / hx + dvy / hy - w[j, i])
            new = min(1.0, max(0.0, new))
            v[j, i] = new
            vbar[j, i] = 2.0 * new - old


@njit(cache=True, error_model="numpy")
def _energies(v, px, py, qx, qy, w, fixed, hx, hy):
    """Primal ``TV(v) + sum(w v)`` and the dual value of the current ``(p, q)``."""
    ny, nx = v.shape
    P = 0.0
    D = 0.0
    for j in range(ny):
        for i in range(nx):
            fx = (v[j, i + 1] - v[j, i]) / hx if i < nx - 1 else 0.0
            fy = (v[j + 1, i] - v[j, i]) / hy if j < ny - 1 else 0.0
            bx = (v[j, i] - v[j, i - 1]) / hx if i > 0 else 0.0
            by = (v[j, i] - v[j - 1, i]) / hy if j > 0 else 0.0
            P += 0.5 * (np.sqrt(fx * fx + fy * fy) + np.sqrt(bx * bx + by * by)) + w[j, i] * v[j, i]
            c = w[j, i] - _divergence(px, qx, py, qy, j, i, hx, hy)
            if fixed[j, i]:
                D += c
            elif c < 0.0:
                D += c
    return P, D


def _relative_gap(P: float, D: float) -> float:
    scale = max(abs(P), abs(D))
    return 0.0 if scale == 0 else (P - D) / scale


def _step_sizes(hx: float, hy: float, ratio: float = 0.5) -> tuple[float, float]:
    # the stacked forward/backward gradient has squared norm at most 2 (4/hx^2 + 4/hy^2)
    tau = ratio / (2.0 / hx + 2.0 / hy)
    sigma = 1.0 / (tau * 2.0 * (4.0 / hx**2 + 4.0 / hy**2))
    return tau, sigma


def _run(w, fixed, active, v, duals, hx, hy, cfg: SchemeConfig, budget: int):
    """Iterate on ``active`` nodes until the full-grid gap certificate drops below tolerance."""
    px, py, qx, qy = duals
    vj, vi = np.nonzero(active)
    # dual components on edges joining two live nodes with at least one of them
    # active; edges into frozen nodes carry no dual, so the band edge acts as a Neumann cut
    live = active | fixed
    ex = live[:, :-1] & live[:, 1:] & (active[:, :-1] | active[:, 1:])
    ey = live[:-1, :] & live[1:, :] & (active[:-1, :] | active[1:, :])
    flags = np.zeros(w.shape, np.int8)
    flags[:, :-1] |= ex * np.int8(1)
    flags[:-1, :] |= ey * np.int8(2)
    flags[:, 1:] |= ex * np.int8(4)
    flags[1:, :] |= ey * np.int8(8)
    dj, di = np.nonzero(flags)
    fl = flags[dj, di]
    tau, sigma = _step_sizes(hx, hy)
    vbar = v.copy()
    iters = 0
    P, D = _energies(v, px, py, qx, qy, w, fixed, hx, hy)
    gap = _relative_gap(P, D)
    while gap > cfg.gap_tol and iters < budget:
        n = min(cfg.check_every, budget - iters)
        _pdhg_band(v, vbar, px, py, qx, qy, w, dj, di, fl, vj, vi, hx, hy, tau, sigma, n)
        iters += n
        P, D = _energies(v, px, py, qx, qy, w, fixed, hx, hy)
        gap = _relative_gap(P, D)
    return gap, iters


def _band_edge_mismatch(v: np.ndarray, active: np.ndarray, fixed: np.ndarray) -> bool:
    """True when an active node next to a frozen one disagrees with it."""
    frozen = ~active & ~fixed
    for axis in (0, 1):
        for shift in (1, -1):
            nb_frozen = np.roll(frozen, shift, axis)
            nb_v = np.roll(v, shift, axis)
            edge = active & nb_frozen
            # np.roll wraps around; drop the wrapped row/column
            if axis == 0:
                edge[0 if shift == 1 else -1, :] = False
            else:
                edge[:, 0 if shift == 1 else -1] = False
            if np.any(np.abs(v[edge] - nb_v[edge]) > 1e-2):
                return True
    return False


_ROUND = 2000  # iterations between band-edge checks


def tv_solve(
    w: ScalarField,
    mask: BinarySet,
    cfg: SchemeConfig,
    band: np.ndarray | None = None,
    init: np.ndarray | None = None,
) -> RelaxedSolution:
    """Minimise ``TV(v) + sum(w v)`` over ``0 <= v <= 1`` with ``v = 1`` on ``mask``.

    TV is the mean of the isotropic forward-difference and backward-difference
    variants, with a Neumann boundary; either variant alone shifts the
    interface half a cell towards one corner of the grid.  If
    ``band`` is given, only those nodes are iterated; the rest stay at ``init``
    (default ``1`` where ``w < 0``).  The band is doubled whenever the solution
    presses against its edge, and convergence is always certified by the
    duality gap of the full problem.
    """
    if mask.grid != w.grid:
        raise GridError("mask lives on a different grid")
    g = w.grid
    wv = np.ascontiguousarray(w.values)
    fixed = np.ascontiguousarray(mask.inside)
    if init is None:
        v = (wv < 0).astype(float)
    else:
        v = np.array(init, dtype=float)
    v[fixed] = 1.0
    duals = tuple(np.zeros(g.shape) for _ in range(4))
    if band is None:
        region = np.ones(g.shape, bool)
    else:
        region = np.asarray(band, bool).copy()
    iters = 0
    while True:
        active = region & ~fixed
        budget = min(cfg.max_iters - iters, _ROUND)
        gap, n = _run(wv, fixed, active, v, duals, g.hx, g.hy, cfg, budget)
        iters += n
        if not region.all() and _band_edge_mismatch(v, active, fixed):
            region = dilate(BinarySet(g, region), max(2, int(np.ceil(cfg.band_cells)))).inside
        elif gap <= cfg.gap_tol:
            break
        if iters >= cfg.max_iters:
            break
    return RelaxedSolution(ScalarField(g, v), float(gap), iters, bool(gap <= cfg.gap_tol))


# -- one step and the flow ------------------------------------------------


def step_weight(E: BinarySet, cfg: SchemeConfig) -> ScalarField:
    """``d_E / h`` with the configured distance convention."""
    if cfg.distance == "boundary":
        d = signed_distance_to_boundary(E)
    else:
        d = signed_distance_to_set(E)
    return d * (1.0 / cfg.h)


def th_relaxed(E: BinarySet, omega: BinarySet, cfg: SchemeConfig) -> RelaxedSolution:
    """Relaxed solution of one step, before thresholding."""
    if omega.grid != E.grid:
        raise GridError("omega lives on a different grid")
    if not omega.issubset(E):
        raise ValueError("omega must be contained in E")
    return _relaxed(E, omega, step_weight(E, cfg), cfg)


def _relaxed(E: BinarySet, omega: BinarySet, w: ScalarField, cfg: SchemeConfig) -> RelaxedSolution:
    cells = cfg.band_cells * max(E.grid.hx, E.grid.hy)
    band = np.abs(w.values) * cfg.h <= cells
    return tv_solve(w, omega, cfg, band=band, init=E.inside)


def set_energy(S: np.ndarray, w: np.ndarray, hx: float, hy: float) -> float:
    """Discrete energy ``TV(1_S) + sum_S w`` of a node set, same TV as the relaxed problem."""
    v = S.astype(float)
    dx = np.diff(v, axis=1) / hx
    dy = np.diff(v, axis=0) / hy
    fx = np.zeros_like(v)
    fy = np.zeros_like(v)
    bx = np.zeros_like(v)
    by = np.zeros_like(v)
    fx[:, :-1] = dx
    fy[:-1, :] = dy
    bx[:, 1:] = dx
    by[1:, :] = dy
    tv = 0.5 * (np.hypot(fx, fy).sum() + np.hypot(bx, by).sum())
    return float(tv + (w * v).sum())


def th_step(E: BinarySet, omega: BinarySet, cfg: SchemeConfig, threshold: str = "generic") -> BinarySet:
    """One minimizing-movement step ``E -> T_h(E)`` constrained to contain ``omega``.

    The candidate is ``{v >= theta_generic}`` (``threshold="generic"``) or the
    larger ``{v >= theta_max}`` (``"max"``, a stand-in for the maximal
    minimizer), joined with ``omega``.  ``E`` itself is always feasible, so it
    is kept whenever the candidate's discrete set energy is not lower.
    """
    if omega.grid != E.grid:
        raise GridError("omega lives on a different grid")
    if not omega.issubset(E):
        raise ValueError("omega must be contained in E")
    if threshold not in ("generic", "max"):
        raise ValueError("threshold must be 'generic' or 'max'")
    if E.is_empty() or E.inside.all():
        # no boundary to move: the empty set and the whole box are fixed points
        return E
    w = step_weight(E, cfg)
    sol = _relaxed(E, omega, w, cfg)
    theta = cfg.theta_generic if threshold == "generic" else cfg.theta_max
    F = sol.threshold(theta) | omega
    g = E.grid
    if set_energy(E.inside, w.values, g.hx, g.hy) <= set_energy(F.inside, w.values, g.hx, g.hy):
        return E
    return F


def flow(
    E0: BinarySet, omega: BinarySet, cfg: SchemeConfig, t_end: float, threshold: str = "generic"
) -> list[tuple[float, BinarySet]]:
    """Iterate :func:`th_step` ``floor(t_end / h)`` times, recording every step."""
    if not omega.issubset(E0):
        raise ValueError("omega must be contained in E0")
    steps = int(math.floor(t_end / cfg.h + 1e-9))
    out = [(0.0, E0)]
    E = E0
    for n in range(1, steps + 1):
        nxt = th_step(E, omega, cfg, threshold)
        out.append((n * cfg.h, nxt))
        if nxt == E:
            # th_step is a deterministic function of (E, omega): a fixed point stays fixed
            out.extend((m * cfg.h, nxt) for m in range(n + 1, steps + 1))
            break
        E = nxt
    return out


def export_flow(sets: Sequence[tuple[float, BinarySet]], directory, prefix: str = "E") -> list:
    """One ``{0,1}`` field file per step plus an index of ``step time filename count``."""
    from pathlib import Path

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths, lines = [], []
    for n, (t, E) in enumerate(sets):
        name = f"{prefix}_{n:05d}.dat"
        paths.append(write_binary_set(d / name, E))
        lines.append(f"{n} {t:.6f} {name} {E.count}")
    index = d / f"{prefix}_index.txt"
    index.write_text("\n".join(lines) + "\n")
    return paths + [index]


# -- balls ----------------------------------------------------------------


def ball_step_radius(R: float, h: float, n: int = 2) -> float:
    """Closed-form radius of one step applied to a ball: ``(R + sqrt(R^2 - 4 n h)) / 2``."""
    if R <= 0 or h < 0 or n < 1:
        raise ValueError("need R > 0, h >= 0, n >= 1")
    disc = R * R - 4 * n * h
    if disc < -1e-15 * R * R:
        raise ValueError(f"h={h} exceeds the validity bound R^2/(4n)={R * R / (4 * n)}")
    return 0.5 * (R + math.sqrt(max(disc, 0.0)))


def disk_step_energy(r: float, R: float, h: float) -> float:
    """Exact step energy of the disk of radius ``r`` against the disk of radius ``R`` (planar)."""
    return 2 * math.pi * r + (2 * math.pi / h) * (r**3 / 3 - R * r**2 / 2)


def disk_step_radius(R: float, h: float, inner: float = 0.0) -> float:
    """Radius of the best concentric disk for one planar step, by direct 1D minimisation.

    ``inner`` is the radius of a concentric obstacle disk; 0 means no obstacle,
    in which case the empty set (energy 0) is also a candidate.
    """
    lo = max(inner, 0.0)
    hi = max(R, lo) + 1.0
    grid = np.linspace(lo, hi, 20001)
    e = [disk_step_energy(r, R, h) for r in grid]
    k = int(np.argmin(e))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(lambda r: disk_step_energy(r, R, h), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-13})
    r = float(res.x) if res.fun <= e[k] else float(grid[k])
    if inner <= 0 and disk_step_energy(r, R, h) > 0:
        return 0.0
    return r


# -- levels ---------------------------------------------------------------


def stack_evolution(
    u0: ScalarField,
    obstacle_field: ScalarField,
    cfg: SchemeConfig,
    t_end: float,
    levels: Sequence[float],
    per_level_obstacle: bool = True,
    progress=None,
) -> Trajectory:
    """Evolve every sublevel set ``{u0 <= s}`` and stack the results into ``u_h``.

    Level ``s`` is constrained to contain ``{obstacle_field <= s}`` (or, with
    ``per_level_obstacle=False``, the single set ``{obstacle_field <= 0}``),
    which is also merged into its starting set.  Sets are made nested by
    cumulative union before ``u_h(x) = min{s : x in E_s}`` is formed; nodes in
    no set get the top level.
    """
    levels = [float(s) for s in levels]
    if len(levels) < 3:
        raise ValueError("need at least 3 levels")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be strictly increasing")
    if obstacle_field.grid != u0.grid:
        raise GridError("obstacle field lives on a different grid")
    g = u0.grid
    steps = int(math.floor(t_end / cfg.h + 1e-9))
    times = [n * cfg.h for n in range(steps + 1)]
    per_level = []
    base = obstacle_field.sublevel(0.0)
    for s in levels:
        omega = obstacle_field.sublevel(s) if per_level_obstacle else base
        E0 = u0.sublevel(s) | omega
        sets = flow(E0, omega, cfg, t_end)
        per_level.append([E.inside for _, E in sets])
        if progress is not None:
            progress(s)
    snaps = []
    for n, t in enumerate(times):
        vals = np.full(g.shape, levels[-1])
        acc = np.zeros(g.shape, bool)
        for s, sets in zip(levels, per_level):
            new = sets[n] & ~acc
            vals[new] = s
            acc |= new
        snaps.append((t, ScalarField(g, vals)))
    return Trajectory(tuple(snaps))


def stack_zero_level(levels: Sequence[float]) -> float:
    """Contour level separating ``{u_h <= 0}`` from the next level up."""
    levels = sorted(levels)
    above = [s for s in levels if s > 0]
    at_or_below = [s for s in levels if s <= 0]
    if not above or not at_or_below:
        raise ValueError("levels must straddle 0")
    return 0.5 * (max(at_or_below) + min(above))


def default_levels(count: int = 33) -> list[float]:
    return [float(s) for s in np.linspace(-1.0, 1.0, count)]


def h_monotonicity_check(
    E: BinarySet, omega: BinarySet, h_coarse: float, h_fine: float, cfg: SchemeConfig, band: int = 0
) -> int:
    """Nodes of ``T_{h_coarse}(E)`` outside ``T_{h_fine}(E)`` grown by ``band`` cells."""
    if not h_coarse > h_fine:
        raise ValueError("need h_coarse > h_fine")
    if not omega.issubset(E):
        raise ValueError("omega must be contained in E")
    coarse = th_step(E, omega, cfg.with_h(h_coarse))
    fine = th_step(E, omega, cfg.with_h(h_fine))
    return (coarse - dilate(fine, band)).count
