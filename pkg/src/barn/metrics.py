"""The five navigation difficulty metrics and their z-normalization.

All lengths are in cells. Two ray counting rules coexist on purpose:

* *visibility distance* counts the step that hits the obstacle, so a ray
  blocked by the adjacent cell has length 1;
* *free run* counts only the free cells crossed, so the same ray has length 0.

Average visibility uses the first rule, characteristic dimension the second.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, EmptyPath, InvalidOrigin, NoObstacle, UndefinedChord
from .grid import OccupancyGrid, distance_transform, ray_free_counts, scan_directions
from .planner import Path

VISIBILITY_DIRECTIONS = scan_directions(8)
SCAN_DIRECTIONS = scan_directions(16)
DEFAULT_MAX_RANGE = 5

METRIC_NAMES = (
    "distance_to_closest_obstacle",
    "average_visibility",
    "dispersion",
    "characteristic_dimension",
    "tortuosity",
)


@dataclass(frozen=True)
class MetricVector:
    distance_to_closest_obstacle: float
    average_visibility: float
    dispersion: float
    characteristic_dimension: float
    tortuosity: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, values: Iterable[float]) -> "MetricVector":
        return cls(*(float(v) for v in values))

    def to_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class MetricStats:
    mean: tuple[float, ...]
    std: tuple[float, ...]
    name: str = "custom"

    def __post_init__(self):
        if len(self.mean) != 5 or len(self.std) != 5:
            raise ConfigurationError("stats need five means and five standard deviations")
        if any(not s > 0 for s in self.std):
            raise ConfigurationError(f"standard deviations must be positive: {self.std}")

    @classmethod
    def from_vectors(cls, vectors: Sequence[MetricVector], name: str = "dataset") -> "MetricStats":
        data = np.stack([v.as_array() for v in vectors])
        return cls(tuple(data.mean(axis=0).tolist()), tuple(data.std(axis=0).tolist()), name)

    def to_dict(self) -> dict:
        return {"name": self.name, "mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_dict(cls, data: dict) -> "MetricStats":
        return cls(tuple(data["mean"]), tuple(data["std"]), data.get("name", "custom"))


# Means and deviations of the original 300-environment benchmark population;
# the CLI calls this set "table2".
REFERENCE_STATS = MetricStats(
    mean=(2.37, 4.42, 4.35, 4.05, 1.21),
    std=(0.93, 1.64, 0.89, 2.66, 0.14),
    name="table2",
)


def _require_path(cspace: OccupancyGrid, path: Path) -> None:
    if len(path.cells) == 0:
        raise EmptyPath("metric requested for an empty path")
    for c in path.cells:
        if cspace.is_occupied(c):
            raise InvalidOrigin(f"path cell {tuple(c)} is occupied in the C-space")


def avg_distance_to_obstacle(cspace: OccupancyGrid, path: Path) -> float:
    _require_path(cspace, path)
    dist = distance_transform(cspace)
    values = [dist[c.y, c.x] for c in path.cells]
    if not np.isfinite(values).all():
        raise NoObstacle("C-space has no obstacle; distance to closest obstacle is undefined")
    return float(np.mean(values))


def visibility_at(cspace: OccupancyGrid, cell) -> float:
    runs = ray_free_counts(cspace, cell, VISIBILITY_DIRECTIONS)
    return float(np.mean(runs + 1))


def avg_visibility(cspace: OccupancyGrid, path: Path) -> float:
    _require_path(cspace, path)
    return float(np.mean([visibility_at(cspace, c) for c in path.cells]))


def dispersion_at(cspace: OccupancyGrid, cell, max_range: int = DEFAULT_MAX_RANGE) -> int:
    """Blocked/open alternations around a 16-ray scan, compared cyclically."""
    runs = ray_free_counts(cspace, cell, SCAN_DIRECTIONS, max_range)
    blocked = runs < max_range
    return int(np.count_nonzero(blocked != np.roll(blocked, -1)))


def dispersion(cspace: OccupancyGrid, path: Path, max_range: int = DEFAULT_MAX_RANGE) -> float:
    if max_range < 1:
        raise ConfigurationError("max_range must be at least 1")
    _require_path(cspace, path)
    return float(np.mean([dispersion_at(cspace, c, max_range) for c in path.cells]))


def characteristic_dimension_at(cspace: OccupancyGrid, cell) -> int:
    runs = ray_free_counts(cspace, cell, SCAN_DIRECTIONS)
    return int((runs[:8] + runs[8:]).min())


def characteristic_dimension(cspace: OccupancyGrid, path: Path) -> float:
    _require_path(cspace, path)
    return float(np.mean([characteristic_dimension_at(cspace, c) for c in path.cells]))


def tortuosity(path: Path) -> float:
    if len(path.cells) < 2 or path.start == path.goal:
        raise UndefinedChord("tortuosity needs distinct start and goal")
    chord = math.hypot(path.goal.x - path.start.x, path.goal.y - path.start.y)
    return path.cost / chord


def compute_all(cspace: OccupancyGrid, path: Path, max_range: int = DEFAULT_MAX_RANGE) -> MetricVector:
    return MetricVector(
        avg_distance_to_obstacle(cspace, path),
        avg_visibility(cspace, path),
        dispersion(cspace, path, max_range),
        characteristic_dimension(cspace, path),
        tortuosity(path),
    )


def normalize(v: MetricVector, stats: MetricStats) -> np.ndarray:
    return (v.as_array() - np.asarray(stats.mean)) / np.asarray(stats.std)


def denormalize(z: Sequence[float], stats: MetricStats) -> MetricVector:
    return MetricVector.from_array(np.asarray(z) * np.asarray(stats.std) + np.asarray(stats.mean))
