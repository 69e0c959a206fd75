"""Kinematic navigation trials: a circular differential-drive robot in a world of
square obstacles, steered by a dynamic-window sampling planner that tracks
the A* path.

World coordinates are meters with the origin at the outer corner of cell
(0, 0); cell ``(x, y)`` spans ``[x*res, (x+1)*res] x [y*res, (y+1)*res]``.
Nothing exists outside the grid: there are no boundary walls.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from .grid import Cell, OccupancyGrid, distance_transform
from .planner import Path, astar, path_length_m

ROBOT_RADIUS_M = 0.215
GOAL_TOLERANCE_M = 0.2
FAILURE_PENALTY_S = 30.0
DEFAULT_TIMEOUT_S = 50.0


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    heading: float
    v: float = 0.0
    w: float = 0.0


@dataclass(frozen=True)
class PlannerConfig:
    v_max: float = 0.5
    w_max: float = 1.57
    acc_lin: float = 0.5
    acc_ang: float = 3.0
    v_samples: int = 6
    w_samples: int = 15
    horizon_s: float = 1.0
    control_period_s: float = 0.1
    substeps: int = 2
    weight_clearance: float = 0.3
    weight_path: float = 0.4
    weight_progress: float = 0.3
    path_scale_m: float = 0.6
    lookahead_m: float = 1.0
    forward_point_m: float = 0.3
    path_deadband_m: float = 0.05
    robot_radius_m: float = ROBOT_RADIUS_M
    seed: int = 0

    def __post_init__(self):
        positive = (
            "v_max", "w_max", "acc_lin", "acc_ang", "horizon_s", "control_period_s",
            "weight_clearance", "weight_path", "weight_progress",
            "path_scale_m", "lookahead_m", "robot_radius_m",
        )
        if self.forward_point_m < 0:
            raise ValueError("forward_point_m must be non-negative")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.v_samples < 2 or self.w_samples < 2:
            raise ValueError("need at least two samples per velocity dimension")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")

    @property
    def dt(self) -> float:
        """Integration substep."""
        return self.control_period_s / self.substeps

    def with_seed(self, seed: int) -> "PlannerConfig":
        return PlannerConfig(**{**asdict(self), "seed": seed})


@dataclass(frozen=True)
class TrialResult:
    success: bool
    traversal_time: float
    path_length: float
    normalized_time: float
    seed: int = 0
    trajectory: np.ndarray | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class World:
    occupied: np.ndarray
    resolution: float
    robot_radius: float = ROBOT_RADIUS_M
    # distance in cells from each cell to the nearest occupied cell; prunes clearance queries
    cell_clearance: np.ndarray = field(default=None, repr=False)

    @property
    def width_m(self) -> float:
        return self.occupied.shape[1] * self.resolution

    @property
    def height_m(self) -> float:
        return self.occupied.shape[0] * self.resolution

    def clearance(self, x: float, y: float, cap: float = math.inf) -> float:
        """Distance from a point to the nearest obstacle square, at most ``cap``."""
        reach = _reach(self, cap)
        return float(_clearance(self.occupied, self.cell_clearance, self.resolution, x, y, reach, cap))

    def collides(self, x: float, y: float) -> bool:
        return self.clearance(x, y, self.robot_radius + 1e-6) < self.robot_radius


def build_world(grid: OccupancyGrid, robot_radius: float = ROBOT_RADIUS_M) -> World:
    occ = np.ascontiguousarray(grid.cells, dtype=np.bool_)
    edt = distance_transform(grid)
    edt = np.where(np.isfinite(edt), edt, 1e9)
    return World(occ, grid.resolution, robot_radius, np.ascontiguousarray(edt))


def _reach(world: World, cap: float) -> int:
    if not math.isfinite(cap):
        return max(world.occupied.shape)
    return int(math.ceil(cap / world.resolution)) + 1


@njit(cache=True)
def _clearance(occ, edt, res, px, py, reach, cap):
    h, w = occ.shape
    cx = int(math.floor(px / res))
    cy = int(math.floor(py / res))
    if 0 <= cx < w and 0 <= cy < h:
        if occ[cy, cx]:
            return 0.0
        # nearest obstacle center is edt cells away; squares are at most sqrt(2) cells closer
        if (edt[cy, cx] - 1.5) * res >= cap:
            return cap
    best = cap
    for y in range(max(0, cy - reach), min(h, cy + reach + 1)):
        for x in range(max(0, cx - reach), min(w, cx + reach + 1)):
            if occ[y, x]:
                dx = max(x * res - px, 0.0, px - (x + 1) * res)
                dy = max(y * res - py, 0.0, py - (y + 1) * res)
                d = math.sqrt(dx * dx + dy * dy)
                if d < best:
                    best = d
    return best


@njit(cache=True)
def _advance(x, y, th, v, w, dt):
    if abs(w) < 1e-9:
        return x + v * math.cos(th) * dt, y + v * math.sin(th) * dt, th
    nth = th + w * dt
    r = v / w
    return x + r * (math.sin(nth) - math.sin(th)), y - r * (math.cos(nth) - math.cos(th)), nth


@njit(cache=True)
def _free_arc(occ, edt, res, radius, reach, x, y, th, k, arc_cap, min_step):
    """Arc length along curvature ``k`` before the robot body touches an obstacle.

    Clearance changes no faster than the distance travelled, so stepping by
    the current margin cannot jump over a contact.
    """
    s = 0.0
    probe = radius + 4.0 * res
    while s < arc_cap:
        margin = _clearance(occ, edt, res, x, y, reach, probe) - radius
        if margin < 0.0:
            return s
        step = max(margin, min_step)
        x, y, th = _advance(x, y, th, 1.0, k, step)
        s += step
    return arc_cap


@njit(cache=True)
def _rollouts(occ, edt, res, radius, reach, x0, y0, th0, vs, ws, dt, n_steps, stop_dist, arc_cap, min_step):
    """Score inputs for every (v, w) sample.

    Returns admissibility, free arc length (at most ``arc_cap``) and the pose
    after ``n_steps`` at constant velocity. A sample is inadmissible when its
    free arc is shorter than its stopping distance. Rotation in place keeps
    the full free arc as long as the current pose is collision-free.
    """
    n = vs.shape[0]
    ok = np.ones(n, dtype=np.bool_)
    free = np.empty(n)
    ex = np.empty(n)
    ey = np.empty(n)
    eth = np.empty(n)
    here_free = _clearance(occ, edt, res, x0, y0, reach, radius + 1e-6) >= radius
    for i in range(n):
        v = vs[i]
        if not here_free:
            free[i] = 0.0
        elif v < 1e-9:
            free[i] = arc_cap
        else:
            free[i] = _free_arc(occ, edt, res, radius, reach, x0, y0, th0, ws[i] / v, arc_cap, min_step)
        ok[i] = here_free and free[i] >= stop_dist[i]
        x, y, th = x0, y0, th0
        for _ in range(n_steps):
            x, y, th = _advance(x, y, th, v, ws[i], dt)
        ex[i] = x
        ey[i] = y
        eth[i] = th
    return ok, free, ex, ey, eth


@njit(cache=True)
def _segment_free(occ, edt, res, radius, reach, x0, y0, x1, y1, step):
    n = max(1, int(math.ceil(math.hypot(x1 - x0, y1 - y0) / step)))
    for i in range(1, n + 1):
        t = i / n
        if _clearance(occ, edt, res, x0 + t * (x1 - x0), y0 + t * (y1 - y0), reach, radius + 1e-6) < radius:
            return False
    return True


@njit(cache=True)
def _farthest_visible(occ, edt, res, radius, reach, x, y, pts, lo, hi, stride):
    """Index of the farthest path point in ``[lo, hi]`` the robot can drive to in a straight line."""
    i = hi
    while i > lo:
        if _segment_free(occ, edt, res, radius, reach, x, y, pts[i, 0], pts[i, 1], res / 2.0):
            return i
        i -= stride
    return lo


class GlobalPath:
    """A* path resampled densely in world coordinates, for tracking queries."""

    def __init__(self, path: Path, spacing: float = 0.02):
        res = path.resolution
        pts = np.array([[(c.x + 0.5) * res, (c.y + 0.5) * res] for c in path.cells], dtype=float)
        dense = [pts[0]]
        for a, b in zip(pts[:-1], pts[1:]):
            n = max(1, int(math.ceil(np.linalg.norm(b - a) / spacing)))
            t = np.arange(1, n + 1)[:, None] / n
            dense.extend(a + t * (b - a))
        self.points = np.array(dense)
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        self.arclength = np.concatenate([[0.0], np.cumsum(seg)])
        self.goal = self.points[-1]

    def nearest_index(self, x: float, y: float, hint: int = 0, window_m: float = 1.5) -> int:
        """Closest point at or after ``hint`` within ``window_m`` of arclength."""
        hi = int(np.searchsorted(self.arclength, self.arclength[hint] + window_m, side="right"))
        seg = self.points[hint:max(hi, hint + 1)]
        d = np.hypot(seg[:, 0] - x, seg[:, 1] - y)
        return hint + int(np.argmin(d))

    def point_at(self, s: float) -> np.ndarray:
        return self.points[self.index_at(s)]

    def distance_to(self, xs: np.ndarray, ys: np.ndarray, lo: int = 0, hi: int | None = None) -> np.ndarray:
        """Distance from each query point to the nearest path point in ``[lo, hi)``."""
        pts = self.points[lo:hi]
        return _nearest_distance(np.ascontiguousarray(pts), xs, ys)

    def local_goal(self, world: "World", x: float, y: float, idx: int, lookahead_m: float) -> int:
        """Farthest point within ``lookahead_m`` of arclength past ``idx`` in line of sight."""
        hi = self.index_at(self.arclength[idx] + lookahead_m)
        lo = min(idx + 1, hi)
        reach = _reach(world, world.robot_radius + 1e-6)
        return int(_farthest_visible(
            world.occupied, world.cell_clearance, world.resolution, world.robot_radius, reach,
            x, y, self.points, lo, hi, 5,
        ))

    def index_at(self, s: float) -> int:
        return min(int(np.searchsorted(self.arclength, s, side="left")), len(self.points) - 1)


@njit(cache=True)
def _nearest_distance(pts, xs, ys):
    out = np.empty(xs.shape[0])
    for i in range(xs.shape[0]):
        best = np.inf
        for j in range(pts.shape[0]):
            dx = pts[j, 0] - xs[i]
            dy = pts[j, 1] - ys[i]
            d = dx * dx + dy * dy
            if d < best:
                best = d
        out[i] = math.sqrt(best)
    return out


def velocity_samples(state: RobotState, config: PlannerConfig, rng: np.random.Generator):
    """Jittered grid over the dynamic window reachable within one control period."""
    T = config.control_period_s
    v_lo = max(0.0, state.v - config.acc_lin * T)
    v_hi = min(config.v_max, state.v + config.acc_lin * T)
    w_lo = max(-config.w_max, state.w - config.acc_ang * T)
    w_hi = min(config.w_max, state.w + config.acc_ang * T)
    vs = np.linspace(v_lo, v_hi, config.v_samples)
    ws = np.linspace(w_lo, w_hi, config.w_samples)
    # interior samples move by up to half a spacing; window edges stay exact
    if config.v_samples > 2:
        dv = (v_hi - v_lo) / (config.v_samples - 1)
        vs[1:-1] += rng.uniform(-0.5, 0.5, config.v_samples - 2) * dv
    if config.w_samples > 2:
        dw = (w_hi - w_lo) / (config.w_samples - 1)
        ws[1:-1] += rng.uniform(-0.5, 0.5, config.w_samples - 2) * dw
    V, W = np.meshgrid(vs, ws, indexing="ij")
    V, W = V.ravel(), W.ravel()
    if state.v > 1e-9:
        # hardest braking along the current curvature; admissible whenever the last command was
        w_brake = _clamp(state.w * v_lo / state.v, w_lo, w_hi)
        V, W = np.append(V, v_lo), np.append(W, w_brake)
    return V, W


@dataclass(frozen=True)
class SampleScores:
    """Per-sample planner terms, kept together for inspection."""

    v: np.ndarray
    w: np.ndarray
    admissible: np.ndarray
    clearance: np.ndarray
    path: np.ndarray
    progress: np.ndarray
    total: np.ndarray
    local_goal: np.ndarray

    def best(self) -> int | None:
        if not self.admissible.any():
            return None
        return int(np.argmax(np.where(self.admissible, self.total, -np.inf)))  # first maximum wins ties


def score_samples(
    world: World,
    state: RobotState,
    global_path: GlobalPath,
    config: PlannerConfig,
    rng: np.random.Generator,
    path_index: int = 0,
) -> SampleScores:
    vs, ws = velocity_samples(state, config, rng)
    n_steps = max(1, int(round(config.horizon_s / config.dt)))
    stop = vs * config.control_period_s + vs**2 / (2.0 * config.acc_lin)
    # distance a sample needs to be clear: the whole horizon plus braking afterwards
    need = vs * config.horizon_s + vs**2 / (2.0 * config.acc_lin)
    arc_cap = config.v_max * config.horizon_s + config.v_max**2 / (2.0 * config.acc_lin)
    reach = _reach(world, world.robot_radius + 4.0 * world.resolution)
    ok, free, ex, ey, eth = _rollouts(
        world.occupied, world.cell_clearance, world.resolution, world.robot_radius, reach,
        state.x, state.y, state.heading, vs, ws, config.dt, n_steps, stop,
        arc_cap, 0.002,
    )
    idx = global_path.nearest_index(state.x, state.y, path_index)
    goal_idx = global_path.local_goal(world, state.x, state.y, idx, config.lookahead_m)
    local_goal = global_path.points[goal_idx]
    clearance = np.where(need > 0, np.minimum(free / np.maximum(need, 1e-12), 1.0), 1.0)
    s_here = global_path.arclength[idx]
    reach_m = config.v_max * config.horizon_s + config.path_scale_m
    lo = global_path.index_at(s_here - reach_m)
    hi = global_path.index_at(s_here + reach_m) + 1
    # the grid path is only accurate to half a cell, so small offsets cost nothing
    off = np.maximum(global_path.distance_to(ex, ey, lo, hi) - config.path_deadband_m, 0.0)
    path_term = 1.0 - np.minimum(off / config.path_scale_m, 1.0)
    # progress is judged at a point ahead of the robot so turning toward the goal pays off;
    # the probe never reaches past the local goal, and vanishes at the final goal
    fp = 0.0
    if goal_idx < len(global_path.points) - 1:
        fp = min(config.forward_point_m, 0.5 * math.hypot(local_goal[0] - state.x, local_goal[1] - state.y))
    d_now = math.hypot(
        local_goal[0] - state.x - fp * math.cos(state.heading),
        local_goal[1] - state.y - fp * math.sin(state.heading),
    )
    d_end = np.hypot(local_goal[0] - ex - fp * np.cos(eth), local_goal[1] - ey - fp * np.sin(eth))
    progress = (d_now - d_end) / (config.v_max * config.horizon_s)
    total = (
        config.weight_clearance * clearance
        + config.weight_path * path_term
        + config.weight_progress * progress
    )
    return SampleScores(vs, ws, ok, clearance, path_term, progress, total, local_goal)


def dwa_step(
    world: World,
    state: RobotState,
    global_path: GlobalPath,
    config: PlannerConfig,
    rng: np.random.Generator,
    path_index: int = 0,
) -> tuple[float, float]:
    """Pick the best admissible ``(v, w)`` sample, or rotate in place if none survives."""
    scores = score_samples(world, state, global_path, config, rng, path_index)
    best = scores.best()
    if best is None:
        return 0.0, config.w_max
    return float(scores.v[best]), float(scores.w[best])


def _clamp(value: float, lo: float, hi: float) -> float:
    return min(max(value, lo), hi)


def run_trial(
    grid: OccupancyGrid,
    cspace: OccupancyGrid,
    start: Sequence[int],
    goal: Sequence[int],
    config: PlannerConfig = PlannerConfig(),
    timeout_s: float = DEFAULT_TIMEOUT_S,
    world: World | None = None,
    path: Path | None = None,
    record: bool = False,
) -> TrialResult:
    """Drive from the start cell center to the goal cell center.

    Succeeds once the robot center is within 0.2 m of the goal. Collision or
    timeout fails the trial, and the reported time is elapsed + 30 s.
    """
    if path is None:
        path = astar(cspace, start, goal)
    if world is None:
        world = build_world(grid, config.robot_radius_m)
    length = path_length_m(path)
    gp = GlobalPath(path)
    rng = np.random.Generator(np.random.PCG64(config.seed))

    x, y = gp.points[0]
    aim = gp.points[gp.local_goal(world, float(x), float(y), 0, config.lookahead_m)]
    heading = math.atan2(aim[1] - y, aim[0] - x) if len(path) > 1 else 0.0
    state = RobotState(float(x), float(y), heading)
    T, dt = config.control_period_s, config.dt
    n_ctrl = int(math.floor(timeout_s / T + 1e-9))
    idx = 0
    traj = [(state.x, state.y, state.heading, state.v, state.w)] if record else None
    success = False
    elapsed = 0.0

    def done(s: RobotState) -> bool:
        return math.hypot(s.x - gp.goal[0], s.y - gp.goal[1]) <= GOAL_TOLERANCE_M

    if done(state):
        success = True
    collided = False
    for k in range(n_ctrl):
        if success:
            break
        v_cmd, w_cmd = dwa_step(world, state, gp, config, rng, idx)
        v = _clamp(v_cmd, state.v - config.acc_lin * T, state.v + config.acc_lin * T)
        w = _clamp(w_cmd, state.w - config.acc_ang * T, state.w + config.acc_ang * T)
        v = _clamp(v, -config.v_max, config.v_max)
        w = _clamp(w, -config.w_max, config.w_max)
        px, py, th = state.x, state.y, state.heading
        for j in range(config.substeps):
            px, py, th = _advance(px, py, th, v, w, dt)
            if world.collides(px, py):
                collided = True
                elapsed = k * T + (j + 1) * dt
                break
            if math.hypot(px - gp.goal[0], py - gp.goal[1]) <= GOAL_TOLERANCE_M:
                success = True
                elapsed = k * T + (j + 1) * dt
                break
        state = RobotState(px, py, th, v, w)
        if record:
            traj.append((px, py, th, v, w))
        if collided:
            break
        idx = gp.nearest_index(px, py, idx)
        elapsed = (k + 1) * T if not success else elapsed

    if not success and not collided:
        elapsed = n_ctrl * T
    traversal = elapsed if success else elapsed + FAILURE_PENALTY_S
    return TrialResult(
        success=success,
        traversal_time=traversal,
        path_length=length,
        normalized_time=traversal / length if length > 0 else math.inf,
        seed=config.seed,
        trajectory=np.array(traj) if record else None,
    )


@dataclass(frozen=True)
class BenchmarkResult:
    mean: float
    variance: float
    trials: tuple[TrialResult, ...]


def benchmark_env(
    grid: OccupancyGrid,
    cspace: OccupancyGrid,
    path: Path,
    n_trials: int = 5,
    config: PlannerConfig = PlannerConfig(),
    timeout_s: float = DEFAULT_TIMEOUT_S,
) -> BenchmarkResult:
    """Run ``n_trials`` with seeds ``config.seed + i``; population variance of normalized time."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    world = build_world(grid, config.robot_radius_m)
    trials = tuple(
        run_trial(grid, cspace, path.start, path.goal, config.with_seed(config.seed + i),
                  timeout_s, world=world, path=path)
        for i in range(n_trials)
    )
    times = np.array([t.normalized_time for t in trials])
    return BenchmarkResult(float(times.mean()), float(times.var()), trials)


TRIAL_CSV_FIELDS = ("env_id", "trial", "seed", "success", "time_s", "path_m", "norm_s_per_m")


def trial_rows(env_id: str, trials: Iterable[TrialResult]) -> list[dict]:
    return [
        {
            "env_id": env_id,
            "trial": i,
            "seed": t.seed,
            "success": int(t.success),
            "time_s": f"{t.traversal_time:.6f}",
            "path_m": f"{t.path_length:.6f}",
            "norm_s_per_m": f"{t.normalized_time:.6f}",
        }
        for i, t in enumerate(trials)
    ]


def write_trial_csv(path, rows: Iterable[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRIAL_CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
