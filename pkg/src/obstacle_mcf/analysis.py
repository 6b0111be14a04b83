"""Measurements over trajectories: order, relabelling invariance, fattening, consistency, hulls."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .atw import SchemeConfig, stack_evolution, stack_zero_level
from .geometry import (
    ContourSet,
    Disk,
    convex_hull_area,
    discrete_lipschitz,
    disk_hull_contour,
    extract_contour,
    hausdorff,
    signed_distance_disks,
    sublevel_area,
)
from .grid import Grid, GridError, ScalarField
from .levelset import ObstacleSet, SolverConfig, Trajectory, evolve


# -- order ----------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonReport:
    max_violation: float
    worst_time: float
    worst_node: tuple[int, int]


def check_order(a: Trajectory, b: Trajectory) -> ComparisonReport:
    """Largest value of ``a - b`` over all nodes and snapshot times (``<= 0`` means ordered)."""
    if a.grid != b.grid:
        raise GridError("trajectories live on different grids")
    if len(a) != len(b) or any(abs(s - t) > 1e-12 for s, t in zip(a.times, b.times)):
        raise ValueError("trajectories must share their snapshot times")
    best = (-math.inf, 0.0, (0, 0))
    for (t, fa), (_, fb) in zip(a, b):
        d = fa.values - fb.values
        k = int(np.argmax(d))
        j, i = np.unravel_index(k, d.shape)
        if d[j, i] > best[0]:
            best = (float(d[j, i]), t, (int(i), int(j)))
    return ComparisonReport(*best)


# -- relabelling ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MonotoneMap:
    """A strictly increasing map given by a sampled table, linear in between and beyond."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, float)
        ys = np.asarray(self.ys, float)
        if xs.ndim != 1 or xs.shape != ys.shape or len(xs) < 2:
            raise ValueError("table needs matching 1D sample arrays of length >= 2")
        if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
            raise ValueError("relabel table is not strictly increasing")
        if not (xs[0] <= 0 <= xs[-1]):
            raise ValueError("relabel table must cover 0")
        if abs(float(np.interp(0.0, xs, ys))) > 1e-12:
            raise ValueError("relabel must fix 0")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @classmethod
    def from_function(cls, fn: Callable, lo: float, hi: float, n: int = 4001) -> "MonotoneMap":
        xs = np.union1d(np.linspace(lo, hi, n), [0.0])
        return cls(xs, np.asarray(fn(xs), float))

    @classmethod
    def identity(cls) -> "MonotoneMap":
        return cls(np.array([-1.0, 0.0, 1.0]), np.array([-1.0, 0.0, 1.0]))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        xs, ys = self.xs, self.ys
        out = np.interp(x, xs, ys)
        lo_slope = (ys[1] - ys[0]) / (xs[1] - xs[0])
        hi_slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        out = np.where(x < xs[0], ys[0] + lo_slope * (x - xs[0]), out)
        return np.where(x > xs[-1], ys[-1] + hi_slope * (x - xs[-1]), out)

    def is_identity(self) -> bool:
        return bool(np.allclose(self.xs, self.ys, rtol=0, atol=0))


def contour_distance(a: ContourSet, b: ContourSet) -> float:
    """Hausdorff distance, 0 when both are empty and infinity when exactly one is."""
    if a.is_empty() and b.is_empty():
        return 0.0
    if a.is_empty() or b.is_empty():
        return math.inf
    return hausdorff(a, b)


def zero_set_invariance(
    u0: ScalarField,
    relabel: MonotoneMap,
    obs: ObstacleSet,
    cfg: SolverConfig,
    k: ScalarField | None = None,
) -> list[tuple[float, float]]:
    """Evolve ``u0`` and ``relabel(u0)`` (obstacles relabelled too) and compare zero contours."""
    a = evolve(u0, obs, k, cfg)
    if relabel.is_identity():
        b = a
    else:
        b = evolve(u0.map(relabel), obs.map(relabel), k, cfg)
    return [
        (t, contour_distance(extract_contour(fa, 0.0), extract_contour(fb, 0.0)))
        for (t, fa), (_, fb) in zip(a, b)
    ]


# -- fattening ------------------------------------------------------------


def fattening_metrics(traj: Trajectory, band: float) -> list[tuple[float, float, float]]:
    """Per snapshot: ``(t, area{|u| <= band}, area{u <= 0})``."""
    if not band > 0:
        raise ValueError("band must be positive")
    return [(t, sublevel_area(f.map(np.abs), band), sublevel_area(f, 0.0)) for t, f in traj]


# -- scheme consistency ---------------------------------------------------


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple[tuple[float, float], ...]

    def __post_init__(self):
        rows = tuple((float(h), float(d)) for h, d in self.rows)
        if any(b[0] >= a[0] for a, b in zip(rows, rows[1:])):
            raise ValueError("h must decrease down the table")
        object.__setattr__(self, "rows", rows)

    @property
    def distances(self) -> list[float]:
        return [d for _, d in self.rows]

    def inversions(self) -> int:
        """Number of consecutive rows whose distance went up as h went down."""
        d = self.distances
        return sum(1 for a, b in zip(d, d[1:]) if b > a)

    def to_csv(self) -> str:
        return "h,sup_contour_distance\n" + "".join(f"{h:.6g},{d:.9g}\n" for h, d in self.rows)


def stack_at(traj: Trajectory, h: float, t: float) -> ScalarField:
    """Value of the piecewise-constant scheme trajectory at time ``t``."""
    n = int(math.floor(t / h + 1e-9))
    return traj.fields[min(n, len(traj) - 1)]


def scheme_consistency(
    u0: ScalarField,
    obstacle_field: ScalarField,
    h_list: Sequence[float],
    solver_cfg: SolverConfig,
    scheme_cfg: SchemeConfig,
    levels: Sequence[float],
    lower_bound: float = -10.0,
    progress=None,
) -> ConvergenceTable:
    """Sup over the solver's record times of the distance between the two flows' zero contours."""
    h_list = [float(h) for h in h_list]
    if len(h_list) < 2:
        raise ValueError("need at least two values of h")
    if any(b >= a for a, b in zip(h_list, h_list[1:])):
        raise ValueError("h_list must be strictly decreasing")
    g = u0.grid
    obs = ObstacleSet.static(ScalarField.constant(g, lower_bound), obstacle_field)
    pde = evolve(u0, obs, None, solver_cfg)
    level0 = stack_zero_level(levels)
    times = [t for t in pde.times if t > 0]
    rows = []
    for h in h_list:
        traj = stack_evolution(u0, obstacle_field, scheme_cfg.with_h(h), solver_cfg.t_end, levels)
        worst = 0.0
        for t in times:
            a = extract_contour(pde.at(t), 0.0)
            b = extract_contour(stack_at(traj, h, t), level0)
            worst = max(worst, contour_distance(a, b))
        rows.append((h, worst))
        if progress is not None:
            progress(h, worst)
    return ConvergenceTable(tuple(rows))


# -- long time ------------------------------------------------------------


def steady_state(traj: Trajectory, tol: float) -> tuple[float, ScalarField] | None:
    """Earliest snapshot after which consecutive snapshots differ by at most ``tol`` (sup norm)."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    fields = traj.fields
    diffs = [float(np.abs(b.values - a.values).max()) for a, b in zip(fields, fields[1:])]
    k = len(fields) - 1
    while k > 0 and diffs[k - 1] <= tol:
        k -= 1
    if k == len(fields) - 1 and len(fields) > 1:
        return None
    return traj.times[k], fields[k]


class HullError(RuntimeError):
    def __init__(self, message: str, report: "HullReport"):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class HullReport:
    hausdorff: float
    convexity_defect: float
    steady_time: float | None
    perimeter: float
    area: float
    hull_area: float
    hx: float
    extra: dict = field(default_factory=dict)

    def defect_bound(self) -> float:
        return 4.0 * self.hx * self.perimeter

    def to_text(self) -> str:
        lines = [
            f"hausdorff = {self.hausdorff:.9g}",
            f"hausdorff_cells = {self.hausdorff / self.hx:.6g}",
            f"convexity_defect = {self.convexity_defect:.9g}",
            f"convexity_defect_bound = {self.defect_bound():.9g}",
            f"steady_time = {'none' if self.steady_time is None else f'{self.steady_time:.6f}'}",
            f"perimeter = {self.perimeter:.9g}",
            f"area = {self.area:.9g}",
            f"hull_area = {self.hull_area:.9g}",
        ]
        lines += [f"{k} = {v}" for k, v in self.extra.items()]
        return "\n".join(lines) + "\n"


def hull_setup(omega_disks: Sequence[Disk], grid: Grid, margin: float = 0.2, cap: float = 0.3):
    """Initial field and obstacle for the hull experiment.

    ``u0`` is the signed distance to a circle enclosing every disk with
    ``margin`` to spare, ``u+`` the signed distance to the disk union; both
    are capped at ``cap`` so the far field has nothing left to evolve.
    All three are floored at minus half the smallest radius, which leaves
    every sublevel set of ``u+`` at or above the floor unchanged: every
    negative level then contains a nonempty shrunken disk union and has a
    limit, instead of collapsing late and spoiling the steady-state test.
    """
    centers = np.array([c for c, _ in omega_disks], float)
    radii = [r for _, r in omega_disks]
    mid = 0.5 * (centers.min(axis=0) + centers.max(axis=0))
    reach = max(float(np.hypot(*(c - mid))) + r for c, r in zip(centers, radii))
    floor = -0.5 * min(radii)
    upper = signed_distance_disks(grid, omega_disks).map(lambda v: np.clip(v, floor, cap))
    outer = signed_distance_disks(grid, [(tuple(mid), reach + margin)]).map(lambda v: np.clip(v, floor, cap))
    lower = ScalarField.constant(grid, floor)
    return outer, ObstacleSet.static(lower, upper)


def hull_compare(
    omega_disks: Sequence[Disk],
    grid: Grid,
    cfg: SolverConfig,
    steady_tol: float = 1e-4,
    margin: float = 0.2,
    cap: float = 0.3,
) -> HullReport:
    """Evolve a large set constrained to contain the disks and compare its limit with their convex hull."""
    if len(omega_disks) < 2:
        raise ValueError("hull comparison needs at least two disks")
    u0, obs = hull_setup(omega_disks, grid, margin, cap)
    traj = evolve(u0, obs, None, cfg)
    ss = steady_state(traj, steady_tol)
    final = traj.final if ss is None else ss[1]
    limit = extract_contour(final, 0.0)
    oracle = disk_hull_contour(omega_disks)
    area = limit.enclosed_area()
    hull_area = convex_hull_area(limit.vertices())
    report = HullReport(
        hausdorff=contour_distance(limit, oracle),
        convexity_defect=max(hull_area - area, 0.0),
        steady_time=None if ss is None else ss[0],
        perimeter=oracle.length(),
        area=area,
        hull_area=hull_area,
        hx=grid.hx,
        extra={"oracle_area": f"{oracle.enclosed_area():.9g}", "t_end": f"{cfg.t_end:.6f}"},
    )
    if ss is None:
        raise HullError(f"no steady state within t_end={cfg.t_end}", report)
    return report


# -- modulus --------------------------------------------------------------


def lipschitz_growth(traj: Trajectory, L: float, L0: float) -> float:
    """Max over snapshots of ``Lip(u(t)) / (L0 exp(L t))``."""
    if L < 0 or not L0 > 0:
        raise ValueError("need L >= 0 and L0 > 0")
    return max(discrete_lipschitz(f) / (L0 * math.exp(L * t)) for t, f in traj)
