"""Uniform node-centred grids and the field/set/contour value types.

Arrays are stored with shape ``(ny, nx)``: row ``j`` holds the nodes with
``y = y0 + j*hy``, column ``i`` the nodes with ``x = x0 + i*hx``.  Flattening
in C order therefore gives the row-major node index ``j*nx + i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np


class GridError(ValueError):
    """Raised for malformed grids or mismatched field/grid pairs."""


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    x0: float
    y0: float
    hx: float
    hy: float

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise GridError("node counts must be integers")
        if self.nx < 3 or self.ny < 3:
            raise GridError(f"need at least 3x3 nodes, got {self.nx}x{self.ny}")
        for name in ("x0", "y0", "hx", "hy"):
            if not math.isfinite(getattr(self, name)):
                raise GridError(f"{name} must be finite")
        if self.hx <= 0 or self.hy <= 0:
            raise GridError("node spacing must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def xmax(self) -> float:
        return self.x0 + (self.nx - 1) * self.hx

    @property
    def ymax(self) -> float:
        return self.y0 + (self.ny - 1) * self.hy

    @property
    def h(self) -> float:
        """Smallest node spacing."""
        return min(self.hx, self.hy)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    def x(self) -> np.ndarray:
        return self.x0 + self.hx * np.arange(self.nx)

    def y(self) -> np.ndarray:
        return self.y0 + self.hy * np.arange(self.ny)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates as two ``(ny, nx)`` arrays."""
        return np.meshgrid(self.x(), self.y())

    def node(self, i: int, j: int) -> tuple[float, float]:
        return (self.x0 + i * self.hx, self.y0 + j * self.hy)

    def index_to_xy(self, ij: np.ndarray) -> np.ndarray:
        """Map fractional ``(row, col)`` index pairs to ``(x, y)`` points."""
        ij = np.asarray(ij, dtype=float)
        return np.column_stack([self.x0 + ij[:, 1] * self.hx, self.y0 + ij[:, 0] * self.hy])

    def translated(self, dx: float, dy: float) -> "Grid":
        return Grid(self.nx, self.ny, self.x0 + dx, self.y0 + dy, self.hx, self.hy)


def make_grid(nx: int, ny: int, bounds: Sequence[float]) -> Grid:
    """Grid with ``nx * ny`` nodes spanning ``bounds = (xmin, xmax, ymin, ymax)``."""
    if nx < 3 or ny < 3:
        raise GridError(f"need at least 3x3 nodes, got {nx}x{ny}")
    xmin, xmax, ymin, ymax = (float(b) for b in bounds)
    if not (xmax > xmin and ymax > ymin):
        raise GridError(f"degenerate bounds {tuple(bounds)}")
    return Grid(int(nx), int(ny), xmin, ymin, (xmax - xmin) / (nx - 1), (ymax - ymin) / (ny - 1))


def _frozen(values: np.ndarray, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            if vals.size == self.grid.size:
                vals = vals.reshape(self.grid.shape)
            else:
                raise GridError(f"field has {vals.size} values, grid needs {self.grid.size}")
        if not np.all(np.isfinite(vals)):
            raise GridError("field values must be finite")
        object.__setattr__(self, "values", _frozen(vals, float))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "ScalarField":
        X, Y = grid.coords()
        return cls(grid, np.broadcast_to(fn(X, Y), grid.shape))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    def like(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "ScalarField":
        return ScalarField(self.grid, fn(self.values))

    def sublevel(self, level: float = 0.0) -> "BinarySet":
        return BinarySet(self.grid, self.values <= level)

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.grid, -self.values)

    def __add__(self, other) -> "ScalarField":
        if isinstance(other, ScalarField):
            _same_grid(self.grid, other.grid)
            other = other.values
        return ScalarField(self.grid, self.values + other)

    def __sub__(self, other) -> "ScalarField":
        if isinstance(other, ScalarField):
            _same_grid(self.grid, other.grid)
            other = other.values
        return ScalarField(self.grid, self.values - other)

    def __mul__(self, scalar: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class BinarySet:
    grid: Grid
    inside: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.inside, dtype=bool)
        if arr.shape != self.grid.shape:
            if arr.size == self.grid.size:
                arr = arr.reshape(self.grid.shape)
            else:
                raise GridError(f"set has {arr.size} nodes, grid needs {self.grid.size}")
        object.__setattr__(self, "inside", _frozen(arr, bool))

    @classmethod
    def empty(cls, grid: Grid) -> "BinarySet":
        return cls(grid, np.zeros(grid.shape, bool))

    @property
    def count(self) -> int:
        return int(self.inside.sum())

    def is_empty(self) -> bool:
        return not self.inside.any()

    def issubset(self, other: "BinarySet") -> bool:
        _same_grid(self.grid, other.grid)
        return not np.any(self.inside & ~other.inside)

    def __or__(self, other: "BinarySet") -> "BinarySet":
        _same_grid(self.grid, other.grid)
        return BinarySet(self.grid, self.inside | other.inside)

    def __and__(self, other: "BinarySet") -> "BinarySet":
        _same_grid(self.grid, other.grid)
        return BinarySet(self.grid, self.inside & other.inside)

    def __sub__(self, other: "BinarySet") -> "BinarySet":
        _same_grid(self.grid, other.grid)
        return BinarySet(self.grid, self.inside & ~other.inside)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinarySet):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.inside, other.inside)

    __hash__ = None

    def indicator(self) -> ScalarField:
        """``-1/2`` inside, ``+1/2`` outside; its zero contour runs through edge midpoints."""
        return ScalarField(self.grid, np.where(self.inside, -0.5, 0.5))


@dataclass(frozen=True, eq=False)
class Polyline:
    points: np.ndarray
    closed: bool

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        need = 3 if self.closed else 2
        if len(pts) < need:
            kind = "closed" if self.closed else "open"
            raise GridError(f"{kind} polyline needs at least {need} vertices, got {len(pts)}")
        object.__setattr__(self, "points", _frozen(pts, float))

    def segments(self) -> np.ndarray:
        """``(m, 2, 2)`` array of segment endpoints."""
        p = self.points
        if self.closed:
            q = np.roll(p, -1, axis=0)
        else:
            p, q = p[:-1], p[1:]
        return np.stack([p, q], axis=1)

    def length(self) -> float:
        s = self.segments()
        return float(np.hypot(*(s[:, 1] - s[:, 0]).T).sum())

    def signed_area(self) -> float:
        x, y = self.points[:, 0], self.points[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


@dataclass(frozen=True, eq=False)
class ContourSet:
    loops: tuple[Polyline, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "loops", tuple(self.loops))

    def __len__(self) -> int:
        return len(self.loops)

    def is_empty(self) -> bool:
        return not self.loops

    def vertices(self) -> np.ndarray:
        if not self.loops:
            return np.zeros((0, 2))
        return np.vstack([pl.points for pl in self.loops])

    def segments(self) -> np.ndarray:
        if not self.loops:
            return np.zeros((0, 2, 2))
        return np.concatenate([pl.segments() for pl in self.loops])

    def length(self) -> float:
        return sum(pl.length() for pl in self.loops)

    def enclosed_area(self) -> float:
        """Absolute shoelace area summed over the closed loops."""
        return sum(abs(pl.signed_area()) for pl in self.loops if pl.closed)


def _same_grid(a: Grid, b: Grid) -> None:
    if a != b:
        raise GridError("operands live on different grids")


# -- file formats ---------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_field(path, f: ScalarField) -> Path:
    """Write ``f`` as a header line ``nx ny x0 y0 hx hy`` then ``ny`` rows of ``nx`` values."""
    g = f.grid
    lines = [" ".join([str(g.nx), str(g.ny)] + [_fmt(v) for v in (g.x0, g.y0, g.hx, g.hy)])]
    lines += [" ".join(_fmt(v) for v in row) for row in f.values]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_field(path) -> ScalarField:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise GridError(f"cannot read field file {path}: {exc}") from exc
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 6:
        raise GridError(f"{path}: header must be 'nx ny x0 y0 hx hy'")
    try:
        nx, ny = int(rows[0][0]), int(rows[0][1])
        x0, y0, hx, hy = (float(v) for v in rows[0][2:])
        grid = Grid(nx, ny, x0, y0, hx, hy)
        body = rows[1:]
        if len(body) != ny or any(len(r) != nx for r in body):
            raise GridError(f"{path}: expected {ny} rows of {nx} values")
        values = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise GridError(f"{path}: {exc}") from exc
    return ScalarField(grid, values)


def write_binary_set(path, s: BinarySet) -> Path:
    return write_field(path, ScalarField(s.grid, s.inside.astype(float)))


def write_contours(path, contours: ContourSet) -> Path:
    """One ``x y`` pair per line, loops separated by a blank line, each headed by ``#closed``/``#open``."""
    blocks = []
    for pl in contours.loops:
        head = "#closed" if pl.closed else "#open"
        blocks.append("\n".join([head] + [f"{_fmt(x)} {_fmt(y)}" for x, y in pl.points]))
    path = Path(path)
    path.write_text("\n\n".join(blocks) + ("\n" if blocks else ""))
    return path


def read_contours(path) -> ContourSet:
    loops = []
    for block in Path(path).read_text().strip().split("\n\n"):
        lines = [ln for ln in block.splitlines() if ln.strip()]
        if not lines:
            continue
        closed = lines[0].strip() == "#closed"
        pts = [tuple(float(v) for v in ln.split()) for ln in lines[1:]]
        loops.append(Polyline(np.array(pts), closed))
    return ContourSet(tuple(loops))
