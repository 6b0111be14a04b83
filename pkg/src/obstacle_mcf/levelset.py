"""Explicit level-set evolution by curvature plus forcing, clamped between two obstacles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .grid import Grid, GridError, ScalarField, write_field


class SolverError(RuntimeError):
    """The explicit solver was asked to do something it cannot do safely."""


@dataclass(frozen=True, eq=False)
class ObstacleSet:
    """Lower/upper obstacle pairs keyed by time; a single keyframe is time-constant."""

    keyframes: tuple[tuple[float, ScalarField, ScalarField], ...]

    def __post_init__(self):
        kf = tuple((float(t), lo, up) for t, lo, up in self.keyframes)
        if not kf:
            raise ValueError("ObstacleSet needs at least one keyframe")
        grid = kf[0][1].grid
        prev = -math.inf
        for t, lo, up in kf:
            if lo.grid != grid or up.grid != grid:
                raise GridError("all obstacle fields must share one grid")
            if not t > prev:
                raise ValueError("keyframe times must be strictly increasing")
            prev = t
            bad = lo.values > up.values
            if bad.any():
                j, i = np.argwhere(bad)[0]
                raise ValueError(f"lower > upper at node (i={i}, j={j}) of keyframe t={t}")
        object.__setattr__(self, "keyframes", kf)

    @classmethod
    def static(cls, lower: ScalarField, upper: ScalarField) -> "ObstacleSet":
        return cls(((0.0, lower, upper),))

    @classmethod
    def wide(cls, grid: Grid, bound: float = 10.0) -> "ObstacleSet":
        """Obstacles at ``-bound`` and ``+bound``: inactive for fields of smaller magnitude."""
        return cls.static(ScalarField.constant(grid, -bound), ScalarField.constant(grid, bound))

    @property
    def grid(self) -> Grid:
        return self.keyframes[0][1].grid

    @property
    def is_static(self) -> bool:
        return len(self.keyframes) == 1

    def at(self, t: float) -> tuple[ScalarField, ScalarField]:
        return obstacles_at(self, t)

    def map(self, fn) -> "ObstacleSet":
        """Apply a nodewise monotone map to every obstacle field."""
        return ObstacleSet(tuple((t, lo.map(fn), up.map(fn)) for t, lo, up in self.keyframes))


def obstacles_at(obs: ObstacleSet, t: float) -> tuple[ScalarField, ScalarField]:
    if t < 0:
        raise ValueError("time must be nonnegative")
    kf = obs.keyframes
    if t <= kf[0][0]:
        return kf[0][1], kf[0][2]
    if t >= kf[-1][0]:
        return kf[-1][1], kf[-1][2]
    times = [k[0] for k in kf]
    n = int(np.searchsorted(times, t, side="right"))
    (t0, l0, u0), (t1, l1, u1) = kf[n - 1], kf[n]
    s = (t - t0) / (t1 - t0)
    lo = (1 - s) * l0.values + s * l1.values
    up = (1 - s) * u0.values + s * u1.values
    # convex combinations of ordered pairs stay ordered up to rounding
    return ScalarField(l0.grid, np.minimum(lo, up)), ScalarField(l0.grid, up)


@dataclass(frozen=True)
class SolverConfig:
    t_end: float
    record_times: tuple[float, ...] = ()
    eps: float = 1e-6
    cfl: float = 0.5

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.t_end >= 0:
            raise ValueError("t_end must be nonnegative")
        rt = tuple(float(t) for t in self.record_times)
        if not rt and self.t_end > 0:
            rt = (float(self.t_end),)
        if any(b <= a for a, b in zip(rt, rt[1:])):
            raise ValueError("record_times must be strictly increasing")
        if rt and (rt[0] < 0 or rt[-1] > self.t_end + 1e-12):
            raise ValueError("record_times must lie in [0, t_end]")
        object.__setattr__(self, "record_times", rt)

    @classmethod
    def uniform(cls, t_end: float, count: int, **kw) -> "SolverConfig":
        """``count`` record times evenly spaced on ``(0, t_end]``."""
        return cls(t_end, tuple(t_end * (n + 1) / count for n in range(count)), **kw)

    def dt(self, grid: Grid) -> float:
        return self.cfl * grid.h**2 / 4.0


def max_dt(grid: Grid) -> float:
    return grid.h**2 / 4.0


@dataclass(frozen=True, eq=False)
class Trajectory:
    snapshots: tuple[tuple[float, ScalarField], ...] = field(default_factory=tuple)

    def __post_init__(self):
        snaps = tuple((float(t), f) for t, f in self.snapshots)
        if not snaps:
            raise ValueError("a trajectory needs at least one snapshot")
        if snaps[0][0] != 0.0:
            raise ValueError("the first snapshot must be at time 0")
        if any(b[0] <= a[0] for a, b in zip(snaps, snaps[1:])):
            raise ValueError("snapshot times must be strictly increasing")
        if any(f.grid != snaps[0][1].grid for _, f in snaps):
            raise GridError("snapshots must share one grid")
        object.__setattr__(self, "snapshots", snaps)

    def __len__(self):
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)

    @property
    def grid(self) -> Grid:
        return self.snapshots[0][1].grid

    @property
    def times(self) -> list[float]:
        return [t for t, _ in self.snapshots]

    @property
    def fields(self) -> list[ScalarField]:
        return [f for _, f in self.snapshots]

    @property
    def final(self) -> ScalarField:
        return self.snapshots[-1][1]

    def at(self, t: float) -> ScalarField:
        for s, f in self.snapshots:
            if abs(s - t) <= 1e-12 * max(1.0, abs(t)):
                return f
        raise KeyError(f"no snapshot at t={t}")

    def map(self, fn) -> "Trajectory":
        return Trajectory(tuple((t, f.map(fn)) for t, f in self.snapshots))


def curvature_rhs(u: ScalarField, eps: float) -> ScalarField:
    """Regularised ``|grad u| div(grad u / |grad u|)`` with central differences."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    g = u.grid
    return u.like(_kernels.curvature(np.ascontiguousarray(u.values), g.hx, g.hy, float(eps)))


def forcing_rhs(u: ScalarField, k: ScalarField) -> ScalarField:
    """``-k |grad u|`` with Godunov upwinding; ``k > 0`` grows the sublevel set ``{u <= 0}``."""
    if k.grid != u.grid:
        raise GridError("forcing lives on a different grid")
    g = u.grid
    return u.like(_kernels.forcing(np.ascontiguousarray(u.values), np.ascontiguousarray(k.values), g.hx, g.hy))


def _check_inside(u: np.ndarray, lo: np.ndarray, up: np.ndarray, what: str) -> None:
    below = lo - u
    above = u - up
    worst = np.maximum(below, above)
    if worst.max() > 0:
        j, i = np.unravel_index(int(np.argmax(worst)), worst.shape)
        side = "below the lower" if below[j, i] > 0 else "above the upper"
        raise SolverError(f"{what} is {side} obstacle by {worst[j, i]:.3g} at node (i={i}, j={j})")


def step(
    u: ScalarField, obs: ObstacleSet, k: ScalarField, t: float, dt: float, eps: float = 1e-6
) -> ScalarField:
    """One explicit step from ``t`` to ``t + dt``, clamped to the obstacles at ``t + dt``."""
    g = u.grid
    if obs.grid != g or k.grid != g:
        raise GridError("u, obstacles and forcing must share one grid")
    if not 0 < dt <= max_dt(g) * (1 + 1e-12):
        raise SolverError(f"dt={dt:.3g} violates the stability bound {max_dt(g):.3g}")
    lo, up = obstacles_at(obs, t)
    _check_inside(u.values, lo.values, up.values, "u")
    lo1, up1 = obstacles_at(obs, t + dt)
    out = np.empty(g.shape)
    _kernels.advance(
        np.ascontiguousarray(u.values), out, np.empty(g.shape), np.ascontiguousarray(k.values),
        np.ascontiguousarray(lo1.values), np.ascontiguousarray(up1.values),
        g.hx, g.hy, float(eps), float(dt), bool(np.any(k.values != 0)),
    )
    return u.like(out)


def evolve(
    u0: ScalarField,
    obs: ObstacleSet,
    k: ScalarField | None,
    cfg: SolverConfig,
    progress=None,
) -> Trajectory:
    """Step from 0 to ``t_end`` and record snapshots at ``0`` and every ``cfg.record_times`` entry.

    Snapshots between solver steps are linear interpolants of the two
    neighbouring steps, clamped again to the obstacles at the record time.
    """
    g = u0.grid
    if k is None:
        k = ScalarField.constant(g, 0.0)
    if obs.grid != g or k.grid != g:
        raise GridError("u0, obstacles and forcing must share one grid")
    lo0, up0 = obstacles_at(obs, 0.0)
    _check_inside(u0.values, lo0.values, up0.values, "initial datum")

    dt = cfg.dt(g)
    kv = np.ascontiguousarray(k.values)
    use_k = bool(np.any(kv != 0))
    cur = np.array(u0.values)
    nxt = np.empty_like(cur)
    rate = np.empty_like(cur)
    snaps = [(0.0, u0)]
    pending = [t for t in cfg.record_times if t > 0]
    lo, up = lo0.values, up0.values
    t, n = 0.0, 0
    while pending:
        t1 = (n + 1) * dt
        if not obs.is_static:
            l1, u1 = obstacles_at(obs, t1)
            lo, up = l1.values, u1.values
        _kernels.advance(cur, nxt, rate, kv, lo, up, g.hx, g.hy, cfg.eps, dt, use_k)
        while pending and pending[0] <= t1 + 1e-12 * dt:
            tr = pending.pop(0)
            s = min(max((tr - t) / dt, 0.0), 1.0)
            vals = (1 - s) * cur + s * nxt
            lr, ur = obstacles_at(obs, tr)
            vals = np.minimum(np.maximum(vals, lr.values), ur.values)
            if not np.all(np.isfinite(vals)):
                raise SolverError(f"non-finite values at t={tr}")
            snaps.append((tr, ScalarField(g, vals)))
            if progress is not None:
                progress(tr, cfg.t_end)
        cur, nxt = nxt, cur
        t, n = t1, n + 1
    return Trajectory(tuple(snaps))


def barrier_field(grid: Grid, xi: Sequence[float], t: float) -> ScalarField:
    """``-(|x - xi|^2 + 4 t)``, a classical subsolution of planar curvature flow."""
    X, Y = grid.coords()
    return ScalarField(grid, -((X - xi[0]) ** 2 + (Y - xi[1]) ** 2 + 4.0 * t))


def barrier_residual(grid: Grid, xi: Sequence[float], times: Sequence[float], eps: float = 1e-6) -> float:
    """Max over times and interior nodes of ``d/dt h - curvature_rhs(h)``; nonpositive for a subsolution.

    Nodes where the central-difference gradient is below ``eps`` are skipped.
    """
    times = list(times)
    if not times or min(times) < 0:
        raise ValueError("times must be a nonempty list of nonnegative values")
    worst = -math.inf
    for t in times:
        h = barrier_field(grid, xi, t)
        v = h.values
        gx = (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * grid.hx)
        gy = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * grid.hy)
        ok = np.hypot(gx, gy) >= eps
        res = -4.0 - curvature_rhs(h, eps).values[1:-1, 1:-1]
        if ok.any():
            worst = max(worst, float(res[ok].max()))
    return worst


def export_trajectory(traj: Trajectory, directory, prefix: str = "u") -> list[Path]:
    """Write one field file per snapshot plus ``index.txt`` (``time filename`` per line)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths, lines = [], []
    for t, f in traj:
        name = f"{prefix}_t{t:.6f}.dat"
        paths.append(write_field(d / name, f))
        lines.append(f"{t:.6f} {name}")
    index = d / f"{prefix}_index.txt"
    index.write_text("\n".join(lines) + "\n")
    return paths + [index]
