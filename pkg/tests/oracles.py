"""Slow, deliberately naive reference implementations used as test oracles.

None of these import the package's geometry helpers; they work on plain
nested lists or numpy arrays with explicit loops.
"""

from __future__ import annotations

import heapq
import math
from collections import deque

import numpy as np

SQRT2 = math.sqrt(2.0)


def brute_edt(cells: np.ndarray) -> np.ndarray:
    h, w = cells.shape
    obstacles = [(x, y) for y in range(h) for x in range(w) if cells[y, x]]
    out = np.full((h, w), math.inf)
    for y in range(h):
        for x in range(w):
            for ox, oy in obstacles:
                d = math.sqrt((x - ox) ** 2 + (y - oy) ** 2)
                if d < out[y, x]:
                    out[y, x] = d
    return out


def brute_neighbors(cells, x, y) -> int:
    h, w = len(cells), len(cells[0])
    n = 0
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if (dx or dy) and 0 <= x + dx < w and 0 <= y + dy < h and cells[y + dy][x + dx]:
                n += 1
    return n


def brute_smooth(cells: np.ndarray, fill: int, clear: int) -> np.ndarray:
    """One literal raster pass, mutating a list-of-lists copy."""
    grid = [[bool(v) for v in row] for row in cells]
    for y in range(len(grid)):
        for x in range(len(grid[0])):
            n = brute_neighbors(grid, x, y)
            if n >= fill:
                grid[y][x] = True
            if n <= clear:
                grid[y][x] = False
    return np.array(grid, dtype=bool)


def brute_dilate(cells: np.ndarray, k: int) -> np.ndarray:
    h, w = cells.shape
    r = k // 2
    out = np.zeros_like(cells, dtype=bool)
    for y in range(h):
        for x in range(w):
            if cells[y, x]:
                for yy in range(y - r, y + r + 1):
                    for xx in range(x - r, x + r + 1):
                        if 0 <= xx < w and 0 <= yy < h:
                            out[yy, xx] = True
    return out


def ray_walk(cells: np.ndarray, origin, angle: float, max_steps=None) -> int:
    """Walk from the origin cell center, one cell along the dominant axis per step.

    The point is advanced by repeated addition and mapped to the containing
    cell with ``floor``; out of bounds blocks.
    """
    h, w = cells.shape
    dx, dy = math.cos(angle), math.sin(angle)
    major = max(abs(dx), abs(dy))
    sx, sy = dx / major, dy / major
    sx = round(sx) if abs(sx - round(sx)) < 1e-9 else sx
    sy = round(sy) if abs(sy - round(sy)) < 1e-9 else sy
    px, py = origin[0] + 0.5, origin[1] + 0.5
    count = 0
    limit = max(w, h) if max_steps is None else max_steps
    while count < limit:
        px += sx
        py += sy
        cx, cy = math.floor(px), math.floor(py)
        if not (0 <= cx < w and 0 <= cy < h) or cells[cy, cx]:
            break
        count += 1
    return count


def brute_visibility(cells, cell) -> float:
    angles = [2 * math.pi * i / 8 for i in range(8)]
    return sum(ray_walk(cells, cell, a) + 1 for a in angles) / 8


def brute_dispersion(cells, cell, max_range) -> int:
    angles = [2 * math.pi * i / 16 for i in range(16)]
    blocked = [ray_walk(cells, cell, a, max_range) < max_range for a in angles]
    return sum(1 for i in range(16) if blocked[i] != blocked[(i + 1) % 16])


def brute_char_dim(cells, cell) -> int:
    best = None
    for i in range(8):
        a = 2 * math.pi * i / 16
        total = ray_walk(cells, cell, a) + ray_walk(cells, cell, a + math.pi)
        best = total if best is None else min(best, total)
    return best


def brute_tortuosity(cells_path) -> float:
    arc = sum(math.dist(a, b) for a, b in zip(cells_path, cells_path[1:]))
    return arc / math.dist(cells_path[0], cells_path[-1])


def _moves(cells, x, y):
    h, w = cells.shape
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if not (dx or dy):
                continue
            nx, ny = x + dx, y + dy
            if not (0 <= nx < w and 0 <= ny < h) or cells[ny, nx]:
                continue
            if dx and dy and cells[y, nx] and cells[ny, x]:
                continue
            yield nx, ny, (SQRT2 if dx and dy else 1.0)


def bfs_reachable(cells: np.ndarray, start, goal) -> bool:
    seen = {tuple(start)}
    queue = deque([tuple(start)])
    while queue:
        x, y = queue.popleft()
        if (x, y) == tuple(goal):
            return True
        for nx, ny, _ in _moves(cells, x, y):
            if (nx, ny) not in seen:
                seen.add((nx, ny))
                queue.append((nx, ny))
    return False


def dijkstra_counts(cells: np.ndarray, start, goal):
    """Optimal (cardinal, diagonal) step counts, compared lexicographically by exact cost.

    Costs are kept as integer pairs so equality with the planner's cost is exact.
    """
    def cost(c):
        return c[0] + c[1] * SQRT2

    best = {tuple(start): (0, 0)}
    heap = [(0.0, 0, 0, tuple(start))]
    done = set()
    while heap:
        _, card, diag, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        if node == tuple(goal):
            return card, diag
        x, y = node
        for nx, ny, step in _moves(cells, x, y):
            nc = (card + (step == 1.0), diag + (step != 1.0))
            old = best.get((nx, ny))
            if old is None or cost(nc) < cost(old) - 1e-12:
                best[(nx, ny)] = nc
                heapq.heappush(heap, (cost(nc), nc[0], nc[1], (nx, ny)))
    return None
