"""Sectioned ``key = value`` scenario files.

Example::

    [scenario]
    name = circle_obstacle
    seed = 42

    [grid]
    nx = 256
    bounds = -1 1 -1 1

    [solver]
    t_end = 0.1
    records = 10

    [geometry]
    radius = 0.5
    inner_radius = 0.3

Blank lines and lines starting with ``#`` or ``;`` are ignored.  Every key
belongs to a section; unknown sections and keys are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

SCENARIOS = ("circle", "circle_obstacle", "triangle_fattening", "disks_hull", "dumbbell", "custom")


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None, path=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        text = f"{prefix}: {message}" if prefix else message
        super().__init__(text)
        self.key = key
        self.line = line


def _float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _int(text: str) -> int:
    return int(text)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(_float(t) for t in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected true/false")


def _disks(text: str) -> tuple[tuple[tuple[float, float], float], ...]:
    out = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        x, y, r = _floats(chunk)
        out.append(((x, y), r))
    return tuple(out)


def _str(text: str) -> str:
    return text.strip()


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any = None
    required: bool = False
    check: Callable[[Any], bool] | None = None
    rule: str = ""


def _positive(v) -> bool:
    return v > 0


SCHEMA: dict[str, dict[str, Key]] = {
    "scenario": {
        "name": Key(_str, required=True, check=lambda v: v in SCENARIOS, rule=f"one of {', '.join(SCENARIOS)}"),
        "seed": Key(_int, 42),
    },
    "grid": {
        "nx": Key(_int, required=True, check=lambda v: v >= 3, rule=">= 3"),
        "ny": Key(_int, None, check=lambda v: v >= 3, rule=">= 3"),
        "bounds": Key(
            _floats, (-1.0, 1.0, -1.0, 1.0),
            check=lambda b: len(b) == 4 and b[1] > b[0] and b[3] > b[2], rule="xmin xmax ymin ymax, nondegenerate",
        ),
    },
    "solver": {
        "t_end": Key(_float, required=True, check=lambda v: v >= 0, rule=">= 0"),
        "eps": Key(_float, 1e-6, check=_positive, rule="> 0"),
        "cfl": Key(_float, 0.5, check=lambda v: 0 < v <= 1, rule="in (0, 1]"),
        "records": Key(_int, 10, check=lambda v: v >= 1, rule=">= 1"),
    },
    "scheme": {
        "h": Key(_float, 0.005, check=_positive, rule="> 0"),
        "gap_tol": Key(_float, 1e-6, check=_positive, rule="> 0"),
        "max_iters": Key(_int, 20000, check=_positive, rule="> 0"),
        "levels": Key(
            _floats, (33.0,),
            check=lambda v: (len(v) == 1 and v[0] >= 3 and v[0] == int(v[0]))
            or (len(v) >= 3 and all(b > a for a, b in zip(v, v[1:]))),
            rule="a count >= 3 or an increasing list of >= 3 levels",
        ),
        "h_list": Key(_floats, (0.02, 0.01, 0.005), check=lambda v: len(v) >= 1 and min(v) > 0, rule="positive values"),
    },
    "geometry": {
        "center": Key(_floats, (0.0, 0.0), check=lambda v: len(v) == 2, rule="two numbers"),
        "radius": Key(_float, None, check=_positive, rule="> 0"),
        "inner_radius": Key(_float, 0.3, check=_positive, rule="> 0"),
        "forcing": Key(_float, 0.0),
        "forcing_slope": Key(_float, 0.0),
        "triangle_radius": Key(_float, 0.35, check=_positive, rule="> 0"),
        "point_radius_cells": Key(_float, 2.0, check=_positive, rule="> 0"),
        "disks": Key(_disks, (), check=lambda d: all(r > 0 for _, r in d), rule="'x y r; x y r; ...' with r > 0"),
        "margin": Key(_float, 0.2, check=_positive, rule="> 0"),
        "cap": Key(_float, 0.3, check=_positive, rule="> 0"),
        "neck_width": Key(_float, 0.12, check=_positive, rule="> 0"),
        "separation": Key(_float, 0.9, check=_positive, rule="> 0"),
        "obstacle_bound": Key(_float, 10.0, check=_positive, rule="> 0"),
    },
    "analysis": {
        "band_cells": Key(_float, 2.0, check=_positive, rule="> 0"),
        "steady_tol": Key(_float, 1e-4, check=_positive, rule="> 0"),
        "order_check": Key(_bool, False),
        "order_gap": Key(_float, 0.05, check=_positive, rule="> 0"),
        "fattening_threshold": Key(_float, 0.5, check=lambda v: v >= 0, rule=">= 0"),
    },
    "custom": {
        "u0_file": Key(_str, None),
        "lower_file": Key(_str, None),
        "upper_file": Key(_str, None),
        "forcing_file": Key(_str, None),
    },
    "output": {
        "dir": Key(_str, "out"),
        "previews": Key(_bool, True),
    },
}

# default radius of the evolving circle per scenario
_RADIUS = {"circle": 0.5, "circle_obstacle": 0.5, "triangle_fattening": 0.6, "dumbbell": 0.3}


@dataclass
class ScenarioConfig:
    values: dict[str, dict[str, Any]] = field(default_factory=dict)
    lines: dict[tuple[str, str], int] = field(default_factory=dict)
    path: Path | None = None

    def get(self, section: str, key: str):
        return self.values[section][key]

    @property
    def name(self) -> str:
        return self.values["scenario"]["name"]

    @property
    def seed(self) -> int:
        return self.values["scenario"]["seed"]

    @property
    def out_dir(self) -> Path:
        return Path(self.values["output"]["dir"])

    def set_out_dir(self, path) -> None:
        self.values["output"]["dir"] = str(path)

    def level_list(self) -> list[float]:
        lv = self.values["scheme"]["levels"]
        if len(lv) == 1:
            n = int(lv[0])
            return [-1.0 + 2.0 * k / (n - 1) for k in range(n)]
        return list(lv)

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        if not p.is_absolute() and self.path is not None:
            p = self.path.parent / p
        return p


def parse_text(text: str, path=None) -> ScenarioConfig:
    values: dict[str, dict[str, Any]] = {}
    lines: dict[tuple[str, str], int] = {}
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", line=n, path=path)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", key=section, line=n, path=path)
            values.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", line=n, path=path)
        key, _, val = (s.strip() for s in line.partition("="))
        if section is None:
            raise ConfigError(f"key {key!r} appears before any section", key=key, line=n, path=path)
        entry = SCHEMA[section].get(key)
        if entry is None:
            raise ConfigError(f"unknown key {key!r} in [{section}]", key=key, line=n, path=path)
        if key in values[section]:
            raise ConfigError(f"duplicate key {key!r}", key=key, line=n, path=path)
        try:
            parsed = entry.parse(val)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key!r}: {val!r} ({exc})", key=key, line=n, path=path) from None
        if entry.check is not None and not entry.check(parsed):
            raise ConfigError(f"{key} = {val} out of range: must be {entry.rule}", key=key, line=n, path=path)
        values[section][key] = parsed
        lines[(section, key)] = n

    for section, keys in SCHEMA.items():
        got = values.setdefault(section, {})
        for key, entry in keys.items():
            if key in got:
                continue
            if entry.required:
                raise ConfigError(f"missing required key {key!r} in [{section}]", key=key, path=path)
            got[key] = entry.default

    cfg = ScenarioConfig(values, lines, Path(path) if path is not None else None)
    _cross_check(cfg)
    return cfg


def _cross_check(cfg: ScenarioConfig) -> None:
    v = cfg.values
    g = v["grid"]
    if g["ny"] is None:
        g["ny"] = g["nx"]
    geo = v["geometry"]
    if geo["radius"] is None:
        geo["radius"] = _RADIUS.get(cfg.name, 0.5)
    name = cfg.name

    def fail(msg, section, key):
        raise ConfigError(msg, key=key, line=cfg.lines.get((section, key)), path=cfg.path)

    if name == "circle_obstacle" and not geo["inner_radius"] < geo["radius"]:
        fail("inner_radius must be smaller than radius", "geometry", "inner_radius")
    if name == "disks_hull" and len(geo["disks"]) < 2:
        fail("disks_hull needs at least two disks in 'disks'", "geometry", "disks")
    if name == "custom":
        if v["custom"]["u0_file"] is None:
            fail("custom scenario needs u0_file", "custom", "u0_file")
        for key in ("u0_file", "lower_file", "upper_file", "forcing_file"):
            rel = v["custom"][key]
            if rel is not None and not cfg.resolve(rel).is_file():
                fail(f"{key}: file not found: {cfg.resolve(rel)}", "custom", key)


def parse_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=path) from None
    return parse_text(text, path)
