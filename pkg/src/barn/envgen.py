"""Cellular-automaton obstacle worlds."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from numba import njit

from .errors import ConfigurationError
from .grid import OccupancyGrid

NEIGHBORHOOD = 8


@dataclass(frozen=True)
class AutomatonParams:
    initial_fill_percentage: float
    smoothing_iterations: int
    fill_threshold: int = 5
    clear_threshold: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.initial_fill_percentage <= 1.0:
            raise ConfigurationError("initial_fill_percentage must lie in [0, 1]")
        if self.smoothing_iterations < 0:
            raise ConfigurationError("smoothing_iterations must be non-negative")
        for name in ("fill_threshold", "clear_threshold"):
            if not 0 <= getattr(self, name) <= NEIGHBORHOOD:
                raise ConfigurationError(f"{name} must lie in [0, {NEIGHBORHOOD}]")
        if self.clear_threshold >= self.fill_threshold:
            raise ConfigurationError("clear_threshold must be below fill_threshold")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")

    def with_seed(self, seed: int) -> "AutomatonParams":
        return AutomatonParams(**{**asdict(self), "seed": seed})

    def to_dict(self) -> dict:
        return asdict(self)


def random_fill(width: int, height: int, params: AutomatonParams, resolution: float = 0.1016) -> OccupancyGrid:
    """Occupy each cell independently with probability ``initial_fill_percentage``.

    Draws exactly ``width * height`` uniforms in row-major order from a
    PCG64 stream seeded with ``params.seed``.
    """
    if width <= 0 or height <= 0:
        raise ConfigurationError("grid dimensions must be positive")
    rng = np.random.Generator(np.random.PCG64(params.seed))
    draws = rng.random((height, width))
    return OccupancyGrid(draws < params.initial_fill_percentage, resolution)


@njit(cache=True)
def _smooth_inplace(cells, fill_threshold, clear_threshold):
    h, w = cells.shape
    for y in range(h):
        for x in range(w):
            count = 0
            for dy in range(-1, 2):
                for dx in range(-1, 2):
                    if dx == 0 and dy == 0:
                        continue
                    nx = x + dx
                    ny = y + dy
                    if 0 <= nx < w and 0 <= ny < h and cells[ny, nx]:
                        count += 1
            if count >= fill_threshold:
                cells[y, x] = True
            if count <= clear_threshold:
                cells[y, x] = False


def smooth_step(grid: OccupancyGrid, params: AutomatonParams) -> OccupancyGrid:
    """One smoothing pass, updating cells in place in raster order.

    Later cells see the updates of earlier ones. Within a visit the fill rule
    is applied before the clear rule.
    """
    cells = np.array(grid.cells, dtype=np.bool_)
    _smooth_inplace(cells, params.fill_threshold, params.clear_threshold)
    return OccupancyGrid(cells, grid.resolution)


def generate(width: int, height: int, params: AutomatonParams, resolution: float = 0.1016) -> OccupancyGrid:
    grid = random_fill(width, height, params, resolution)
    cells = np.array(grid.cells, dtype=np.bool_)
    for _ in range(params.smoothing_iterations):
        _smooth_inplace(cells, params.fill_threshold, params.clear_threshold)
    return OccupancyGrid(cells, resolution)
