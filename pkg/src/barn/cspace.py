"""Configuration-space inflation by a square robot footprint."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError
from .grid import OccupancyGrid

JACKAL_LENGTH_M = 0.508
JACKAL_WIDTH_M = 0.430
DEFAULT_RESOLUTION = JACKAL_LENGTH_M / 5


@dataclass(frozen=True)
class RobotFootprint:
    length_m: float
    width_m: float
    cells: int

    def __post_init__(self):
        if self.cells < 1 or self.cells % 2 == 0:
            raise ConfigurationError(f"footprint kernel must be odd and >= 1, got {self.cells}")

    @classmethod
    def for_resolution(cls, length_m: float, width_m: float, resolution: float) -> "RobotFootprint":
        """Smallest odd square kernel that covers the robot at ``resolution``."""
        # tolerate float noise so 0.508 / 0.1016 gives 5, not 6
        n = math.ceil(max(length_m, width_m) / resolution - 1e-9)
        if n % 2 == 0:
            n += 1
        return cls(length_m, width_m, max(n, 1))

    def covers(self, resolution: float) -> bool:
        return self.cells * resolution >= max(self.length_m, self.width_m) - 1e-12


JACKAL = RobotFootprint(JACKAL_LENGTH_M, JACKAL_WIDTH_M, 5)


def inflate(grid: OccupancyGrid, footprint: RobotFootprint = JACKAL) -> OccupancyGrid:
    """Minkowski dilation of the obstacles by a ``cells x cells`` square.

    Area outside the grid counts as free, so edge cells may stay free.
    """
    if footprint.cells % 2 == 0:
        raise ConfigurationError("footprint kernel must be odd")
    if footprint.cells == 1:
        return grid
    kernel = np.ones((footprint.cells, footprint.cells), dtype=bool)
    out = ndimage.binary_dilation(grid.cells, structure=kernel, border_value=0)
    return OccupancyGrid(out, grid.resolution)
