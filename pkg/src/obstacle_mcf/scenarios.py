"""Initial data, obstacles and forcing for the built-in scenarios."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .analysis import hull_setup
from .config import ConfigError, ScenarioConfig
from .geometry import signed_distance_disks
from .grid import Grid, GridError, ScalarField, make_grid, read_field
from .levelset import ObstacleSet


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    grid: Grid
    u0: ScalarField
    obs: ObstacleSet
    k: ScalarField
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def upper(self) -> ScalarField:
        return self.obs.keyframes[0][2]

    @property
    def lower(self) -> ScalarField:
        return self.obs.keyframes[0][1]


def triangle_points(radius: float, center=(0.0, 0.0)) -> list[tuple[float, float]]:
    """Vertices of an equilateral triangle inscribed in a circle of ``radius``, one vertex on top."""
    return [
        (center[0] + radius * math.cos(a), center[1] + radius * math.sin(a))
        for a in np.deg2rad([90.0, 210.0, 330.0])
    ]


def triangle_area(pts) -> float:
    (ax, ay), (bx, by), (cx, cy) = pts
    return 0.5 * abs((bx - ax) * (cy - ay) - (cx - ax) * (by - ay))


def signed_distance_box(grid: Grid, center, half_size) -> ScalarField:
    X, Y = grid.coords()
    qx = np.abs(X - center[0]) - half_size[0]
    qy = np.abs(Y - center[1]) - half_size[1]
    outside = np.hypot(np.maximum(qx, 0), np.maximum(qy, 0))
    inside = np.minimum(np.maximum(qx, qy), 0)
    return ScalarField(grid, outside + inside)


def circle(grid: Grid, center=(0.0, 0.0), radius=0.5, forcing=0.0, slope=0.0, bound=10.0) -> Scenario:
    u0 = signed_distance_disks(grid, [(tuple(center), radius)])
    X, _ = grid.coords()
    k = ScalarField(grid, forcing + slope * X)
    meta = {"center": tuple(center), "radius": radius, "lipschitz_forcing": abs(slope)}
    return Scenario("circle", grid, u0, ObstacleSet.wide(grid, bound), k, meta)


def circle_obstacle(grid: Grid, center=(0.0, 0.0), radius=0.5, inner_radius=0.3, bound=10.0) -> Scenario:
    u0 = signed_distance_disks(grid, [(tuple(center), radius)])
    upper = signed_distance_disks(grid, [(tuple(center), inner_radius)])
    obs = ObstacleSet.static(ScalarField.constant(grid, -bound), upper)
    meta = {"center": tuple(center), "radius": radius, "inner_radius": inner_radius}
    return Scenario("circle_obstacle", grid, u0, obs, ScalarField.constant(grid, 0.0), meta)


def triangle_fattening(
    grid: Grid, center=(0.0, 0.0), radius=0.6, triangle_radius=0.35, point_radius_cells=2.0, free=False
) -> Scenario:
    """Three point obstacles (small disks) inside a circle; ``free=True`` drops them (``u+ = 1``)."""
    pts = triangle_points(triangle_radius, center)
    rp = point_radius_cells * max(grid.hx, grid.hy)
    u0 = signed_distance_disks(grid, [(tuple(center), radius)])
    if not free:
        upper = signed_distance_disks(grid, [(p, rp) for p in pts]).map(lambda v: np.maximum(v, 0.0))
    else:
        upper = ScalarField.constant(grid, 1.0)
        # the far corners of the box sit above 1; cap them so u0 <= u+
        u0 = u0.map(lambda v: np.minimum(v, 1.0))
    lower = ScalarField.constant(grid, -1.0)
    meta = {"center": tuple(center), "radius": radius, "points": pts, "triangle_area": triangle_area(pts),
            "point_radius": rp, "free": free}
    name = "triangle_fattening"
    return Scenario(name, grid, u0, ObstacleSet.static(lower, upper), ScalarField.constant(grid, 0.0), meta)


def disks_hull(grid: Grid, disks, margin=0.2, cap=0.3) -> Scenario:
    if len(disks) < 2:
        raise ValueError("need at least two disks")
    u0, obs = hull_setup(disks, grid, margin, cap)
    meta = {"disks": tuple(disks), "margin": margin, "cap": cap}
    return Scenario("disks_hull", grid, u0, obs, ScalarField.constant(grid, 0.0), meta)


def dumbbell(grid: Grid, center=(0.0, 0.0), radius=0.3, separation=0.9, neck_width=0.12, bound=10.0) -> Scenario:
    cx, cy = center
    half = separation / 2
    lobes = signed_distance_disks(grid, [((cx - half, cy), radius), ((cx + half, cy), radius)])
    neck = signed_distance_box(grid, center, (half, neck_width / 2))
    u0 = ScalarField(grid, np.minimum(lobes.values, neck.values))
    meta = {"center": tuple(center), "radius": radius, "separation": separation, "neck_width": neck_width}
    return Scenario("dumbbell", grid, u0, ObstacleSet.wide(grid, bound), ScalarField.constant(grid, 0.0), meta)


def _read(cfg: ScenarioConfig, key: str) -> ScalarField | None:
    rel = cfg.get("custom", key)
    if rel is None:
        return None
    path = cfg.resolve(rel)
    try:
        return read_field(path)
    except (GridError, OSError) as exc:
        raise ConfigError(f"{key}: {exc}", key=key, line=cfg.lines.get(("custom", key)), path=cfg.path) from None


def custom(cfg: ScenarioConfig) -> Scenario:
    u0 = _read(cfg, "u0_file")
    g = u0.grid
    bound = cfg.get("geometry", "obstacle_bound")
    lower = _read(cfg, "lower_file") or ScalarField.constant(g, -bound)
    upper = _read(cfg, "upper_file") or ScalarField.constant(g, bound)
    k = _read(cfg, "forcing_file") or ScalarField.constant(g, cfg.get("geometry", "forcing"))
    for key, f in (("lower_file", lower), ("upper_file", upper), ("forcing_file", k)):
        if f.grid != g:
            raise ConfigError(f"{key}: grid differs from u0_file", key=key, path=cfg.path)
    try:
        obs = ObstacleSet.static(lower, upper)
    except ValueError as exc:
        raise ConfigError(str(exc), path=cfg.path) from None
    return Scenario("custom", g, u0, obs, k, {"center": (0.0, 0.0)})


def build(cfg: ScenarioConfig) -> Scenario:
    """Scenario described by a parsed config."""
    name = cfg.name
    if name == "custom":
        return custom(cfg)
    gs = cfg.values["grid"]
    grid = make_grid(gs["nx"], gs["ny"], gs["bounds"])
    geo = cfg.values["geometry"]
    bound = geo["obstacle_bound"]
    if name == "circle":
        return circle(grid, geo["center"], geo["radius"], geo["forcing"], geo["forcing_slope"], bound)
    if name == "circle_obstacle":
        return circle_obstacle(grid, geo["center"], geo["radius"], geo["inner_radius"], bound)
    if name == "triangle_fattening":
        return triangle_fattening(grid, geo["center"], geo["radius"], geo["triangle_radius"], geo["point_radius_cells"])
    if name == "disks_hull":
        return disks_hull(grid, geo["disks"], geo["margin"], geo["cap"])
    if name == "dumbbell":
        return dumbbell(grid, geo["center"], geo["radius"], geo["separation"], geo["neck_width"], bound)
    raise ConfigError(f"unknown scenario {name!r}", key="name")


def twin(scn: Scenario) -> Scenario | None:
    """The obstacle-free companion of a fattening scenario."""
    if scn.name != "triangle_fattening":
        return None
    m = scn.meta
    tri_r = math.hypot(m["points"][0][0] - m["center"][0], m["points"][0][1] - m["center"][1])
    g = scn.grid
    return triangle_fattening(g, m["center"], m["radius"], tri_r, m["point_radius"] / max(g.hx, g.hy), free=True)
