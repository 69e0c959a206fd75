"""Endpoint selection, flood-fill connectivity and A* on the C-space."""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import InvalidEndpoint, NoEndpoint, NoPath
from .grid import Cell, OccupancyGrid

SQRT2 = math.sqrt(2.0)

_MOVES = [(dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dx, dy) != (0, 0)]


@dataclass(frozen=True)
class Path:
    cells: tuple[Cell, ...]
    resolution: float

    def __post_init__(self):
        cells = tuple(Cell(int(c[0]), int(c[1])) for c in self.cells)
        if not cells:
            raise ValueError("a path needs at least one cell")
        for a, b in zip(cells, cells[1:]):
            if max(abs(a.x - b.x), abs(a.y - b.y)) != 1:
                raise ValueError(f"cells {a} and {b} are not 8-adjacent")
        object.__setattr__(self, "cells", cells)

    def __len__(self):
        return len(self.cells)

    @property
    def start(self) -> Cell:
        return self.cells[0]

    @property
    def goal(self) -> Cell:
        return self.cells[-1]

    def step_counts(self) -> tuple[int, int]:
        """(cardinal steps, diagonal steps)."""
        diag = sum(1 for a, b in zip(self.cells, self.cells[1:]) if a.x != b.x and a.y != b.y)
        return len(self.cells) - 1 - diag, diag

    @property
    def cost(self) -> float:
        """Length in cells; computed from step counts so equal-cost paths compare equal."""
        card, diag = self.step_counts()
        return card + diag * SQRT2

    def is_free_in(self, cspace: OccupancyGrid) -> bool:
        return all(cspace.in_bounds(*c) and not cspace.cells[c.y, c.x] for c in self.cells)

    def to_json(self) -> str:
        return json.dumps({"cells": [[c.x, c.y] for c in self.cells], "resolution": self.resolution})

    @classmethod
    def from_json(cls, text: str) -> "Path":
        data = json.loads(text)
        return cls(tuple(Cell(*c) for c in data["cells"]), float(data["resolution"]))


def path_length_m(path: Path) -> float:
    return path.cost * path.resolution


def select_endpoints(cspace: OccupancyGrid, rng_seed: int) -> tuple[Cell, Cell]:
    """Uniform free start on column 0 and uniform free goal on the last column."""
    left = np.flatnonzero(~cspace.cells[:, 0])
    right = np.flatnonzero(~cspace.cells[:, -1])
    if left.size == 0 or right.size == 0:
        side = "left" if left.size == 0 else "right"
        raise NoEndpoint(f"no free cell on the {side} edge")
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    start = Cell(0, int(left[rng.integers(left.size)]))
    goal = Cell(cspace.width - 1, int(right[rng.integers(right.size)]))
    return start, goal


def _check_endpoint(cspace: OccupancyGrid, cell: Sequence[int], name: str) -> None:
    if not cspace.in_bounds(*cell) or cspace.cells[cell[1], cell[0]]:
        raise InvalidEndpoint(f"{name} {tuple(cell)} is not a free cell")


def can_move(cells: np.ndarray, x: int, y: int, dx: int, dy: int) -> bool:
    """Move legality shared by flood fill and A*: target free, no corner cutting."""
    h, w = cells.shape
    nx, ny = x + dx, y + dy
    if not (0 <= nx < w and 0 <= ny < h) or cells[ny, nx]:
        return False
    if dx and dy and cells[y, nx] and cells[ny, x]:
        return False
    return True


_CROSS = ndimage.generate_binary_structure(2, 1)


def is_connected(cspace: OccupancyGrid, start: Sequence[int], goal: Sequence[int]) -> bool:
    """Whether ``goal`` is reachable from ``start`` over free cells.

    A diagonal move is legal only when one of its two cardinal neighbors is
    free, so it can always be replaced by two cardinal moves: reachability
    under the planner's move rule is exactly 4-connected reachability.
    """
    _check_endpoint(cspace, start, "start")
    _check_endpoint(cspace, goal, "goal")
    if tuple(start) == tuple(goal):
        return True
    labels, _ = ndimage.label(~cspace.cells, structure=_CROSS)
    return bool(labels[start[1], start[0]] == labels[goal[1], goal[0]])


def octile(a: Sequence[int], b: Sequence[int]) -> float:
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)


def astar(cspace: OccupancyGrid, start: Sequence[int], goal: Sequence[int]) -> Path:
    """Minimum-cost 8-connected path with octile heuristic.

    Cardinal steps cost 1, diagonal steps sqrt(2). Heap ties break on lower
    heuristic, then row-major cell order, so output is deterministic.
    """
    _check_endpoint(cspace, start, "start")
    _check_endpoint(cspace, goal, "goal")
    start, goal = Cell(*start), Cell(*goal)
    cells = cspace.cells
    g = {start: 0.0}
    parent: dict[Cell, Cell] = {}
    closed: set[Cell] = set()
    h0 = octile(start, goal)
    heap = [(h0, h0, start.y, start.x)]
    while heap:
        _, _, y, x = heapq.heappop(heap)
        cur = Cell(x, y)
        if cur in closed:
            continue
        if cur == goal:
            out = [cur]
            while out[-1] in parent:
                out.append(parent[out[-1]])
            return Path(tuple(reversed(out)), cspace.resolution)
        closed.add(cur)
        gc = g[cur]
        for dx, dy in _MOVES:
            if not can_move(cells, x, y, dx, dy):
                continue
            nxt = Cell(x + dx, y + dy)
            if nxt in closed:
                continue
            ng = gc + (SQRT2 if dx and dy else 1.0)
            if ng < g.get(nxt, math.inf) - 1e-12:
                g[nxt] = ng
                parent[nxt] = cur
                h = octile(nxt, goal)
                heapq.heappush(heap, (ng + h, h, nxt.y, nxt.x))
    raise NoPath(f"no path from {tuple(start)} to {tuple(goal)}")
