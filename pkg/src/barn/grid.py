"""Occupancy grids and the geometric primitives shared by every other module.

Cells are addressed as ``(x, y)`` with ``x`` the column and ``y`` the row.
The backing array is indexed ``cells[y, x]`` and is row-major, row 0 being
``y = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy import ndimage

from .errors import InvalidOrigin, MapFormatError, OutOfBounds

MAGIC = "BARN1"


class Cell(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """Boolean obstacle raster, ``True`` = occupied.

    ``resolution`` is the side of one cell in meters. The array is copied and
    frozen on construction so a grid can be shared freely.
    """

    cells: np.ndarray
    resolution: float = 0.1016

    def __post_init__(self):
        arr = np.array(self.cells, dtype=bool, copy=True)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise MapFormatError(f"grid must be a non-empty 2D array, got shape {arr.shape}")
        if not (self.resolution > 0 and math.isfinite(self.resolution)):
            raise MapFormatError(f"resolution must be positive, got {self.resolution}")
        arr.setflags(write=False)
        object.__setattr__(self, "cells", arr)
        object.__setattr__(self, "resolution", float(self.resolution))

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def is_occupied(self, cell: Sequence[int]) -> bool:
        x, y = cell
        self.check_bounds(cell)
        return bool(self.cells[y, x])

    def check_bounds(self, cell: Sequence[int]) -> None:
        x, y = cell
        if not self.in_bounds(x, y):
            raise OutOfBounds(f"cell {tuple(cell)} outside {self.width}x{self.height} grid")

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return self.resolution == other.resolution and np.array_equal(self.cells, other.cells)

    def __hash__(self):
        return hash((self.cells.shape, self.cells.tobytes(), self.resolution))

    @classmethod
    def empty(cls, width: int, height: int, resolution: float = 0.1016) -> "OccupancyGrid":
        return cls(np.zeros((height, width), dtype=bool), resolution)

    # -- BARN1 text format ------------------------------------------------

    def to_text(self, comments: Sequence[str] = ()) -> str:
        lines = [f"{MAGIC} {self.width} {self.height} {self.resolution!r}"]
        lines.extend(f"# {c}" for c in comments)
        for row in self.cells:
            lines.append("".join("1" if v else "0" for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "OccupancyGrid":
        lines = text.splitlines()
        if not lines:
            raise MapFormatError("empty map file")
        header = lines[0].split()
        if len(header) != 4 or header[0] != MAGIC:
            raise MapFormatError(f"bad header: {lines[0]!r}")
        try:
            width, height, resolution = int(header[1]), int(header[2]), float(header[3])
        except ValueError as exc:
            raise MapFormatError(f"bad header: {lines[0]!r}") from exc
        if width <= 0 or height <= 0:
            raise MapFormatError(f"bad dimensions {width}x{height}")
        body = lines[1:]
        while body and body[0].startswith("#"):
            body = body[1:]
        # tolerate trailing blank lines only
        while body and body[-1] == "":
            body = body[:-1]
        if len(body) != height:
            raise MapFormatError(f"expected {height} rows, got {len(body)}")
        cells = np.zeros((height, width), dtype=bool)
        for y, row in enumerate(body):
            if len(row) != width:
                raise MapFormatError(f"row {y} has {len(row)} characters, expected {width}")
            bad = set(row) - {"0", "1"}
            if bad:
                raise MapFormatError(f"row {y} contains invalid characters {sorted(bad)}")
            cells[y] = [c == "1" for c in row]
        return cls(cells, resolution)

    def save(self, path, comments: Sequence[str] = ()) -> None:
        Path(path).write_text(self.to_text(comments), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "OccupancyGrid":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class Ray:
    origin: Cell
    direction: tuple[float, float]
    max_steps: int | None = None

    def __post_init__(self):
        dx, dy = self.direction
        if abs(math.hypot(dx, dy) - 1.0) > 1e-9:
            raise ValueError(f"ray direction {self.direction} is not a unit vector")
        if self.max_steps is not None and self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")
        object.__setattr__(self, "origin", Cell(*self.origin))


def unit_direction(angle: float) -> tuple[float, float]:
    return (math.cos(angle), math.sin(angle))


def scan_directions(count: int) -> list[tuple[float, float]]:
    """``count`` unit vectors evenly spaced counter-clockwise from angle 0."""
    return [unit_direction(2.0 * math.pi * i / count) for i in range(count)]


def filled_neighbors(grid: OccupancyGrid, cell: Sequence[int]) -> int:
    """Occupied cells among the 8 Moore neighbors; out-of-bounds counts as free."""
    grid.check_bounds(cell)
    x, y = cell
    window = grid.cells[max(0, y - 1):y + 2, max(0, x - 1):x + 2]
    return int(window.sum()) - int(grid.cells[y, x])


def step_vector(direction: tuple[float, float]) -> tuple[float, float]:
    """Scale ``direction`` so one step advances exactly one cell along its dominant axis.

    A diagonal step therefore lands on the diagonal neighbor and counts as one
    step, and no cell is visited twice along a ray.
    """
    dx, dy = direction
    major = max(abs(dx), abs(dy))
    sx, sy = dx / major, dy / major
    # exact axes/diagonals must not drift off integer offsets
    sx = float(round(sx)) if abs(sx - round(sx)) < 1e-9 else sx
    sy = float(round(sy)) if abs(sy - round(sy)) < 1e-9 else sy
    return sx, sy


@lru_cache(maxsize=256)
def _offsets(direction: tuple[float, float], n: int) -> np.ndarray:
    sx, sy = step_vector(direction)
    k = np.arange(1, n + 1, dtype=float)
    off = np.empty((n, 2), dtype=np.int64)
    off[:, 0] = np.floor(k * sx + 0.5)
    off[:, 1] = np.floor(k * sy + 0.5)
    off.setflags(write=False)
    return off


def ray_free_counts(
    grid: OccupancyGrid,
    origin: Sequence[int],
    directions: Sequence[tuple[float, float]],
    max_steps: int | None = None,
) -> np.ndarray:
    """Vectorized ``cast_ray`` over several directions from one origin.

    Returns one free-cell count per direction. Out-of-bounds cells block.
    """
    grid.check_bounds(origin)
    x0, y0 = origin
    if grid.cells[y0, x0]:
        raise InvalidOrigin(f"ray origin {tuple(origin)} is occupied")
    # the dominant axis advances one cell per step, so this always exits the grid
    reach = max(grid.width, grid.height)
    n = reach if max_steps is None else min(max_steps, reach)
    if n == 0:
        return np.zeros(len(directions), dtype=np.int64)
    off = np.stack([_offsets(tuple(map(float, d)), n) for d in directions])
    xs = x0 + off[..., 0]
    ys = y0 + off[..., 1]
    inside = (xs >= 0) & (xs < grid.width) & (ys >= 0) & (ys < grid.height)
    blocked = ~inside
    blocked[inside] = grid.cells[ys[inside], xs[inside]]
    hit = blocked.any(axis=1)
    return np.where(hit, blocked.argmax(axis=1), n).astype(np.int64)


def cast_ray(grid: OccupancyGrid, ray: Ray) -> int:
    """Number of free cells a ray crosses before an obstacle, the boundary or ``max_steps``."""
    return int(ray_free_counts(grid, ray.origin, [ray.direction], ray.max_steps)[0])


def distance_transform(grid: OccupancyGrid) -> np.ndarray:
    """Euclidean distance in cells from each cell center to the nearest occupied center.

    Occupied cells map to 0. With no obstacle at all every entry is ``inf``.
    The result is indexed ``[y, x]`` like the grid.
    """
    if not grid.cells.any():
        return np.full(grid.cells.shape, np.inf)
    return ndimage.distance_transform_edt(~grid.cells)
