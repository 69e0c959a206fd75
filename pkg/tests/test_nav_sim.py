import csv
import math

import numpy as np
import pytest

from barn.cspace import inflate
from barn.envgen import AutomatonParams, generate
from barn.grid import Cell, OccupancyGrid
from barn.nav_sim import (
    FAILURE_PENALTY_S,
    TRIAL_CSV_FIELDS,
    GlobalPath,
    PlannerConfig,
    RobotState,
    benchmark_env,
    build_world,
    dwa_step,
    run_trial,
    trial_rows,
    velocity_samples,
    write_trial_csv,
)
from barn.planner import Path, astar, path_length_m, select_endpoints


def row_path(y, x0, x1, res=0.1016):
    return Path(tuple(Cell(x, y) for x in range(x0, x1 + 1)), res)


@pytest.fixture(scope="module")
def cluttered():
    """A generated 30x30 environment with a connected start and goal."""
    for seed in range(100):
        grid = generate(30, 30, AutomatonParams(0.2, 2, 5, 1, seed))
        cs = inflate(grid)
        try:
            s, g = select_endpoints(cs, seed)
            return grid, cs, astar(cs, s, g)
        except Exception:
            continue
    raise RuntimeError("no usable environment")


class TestWorld:
    def test_empty_world_is_free_everywhere(self):
        w = build_world(OccupancyGrid.empty(10, 10))
        for x, y in np.random.default_rng(0).uniform(-1, 2, (50, 2)):
            assert not w.collides(x, y)

    def test_center_inside_obstacle(self):
        cells = np.zeros((10, 10), bool)
        cells[4, 6] = True
        w = build_world(OccupancyGrid(cells))
        assert w.collides(6.5 * 0.1016, 4.5 * 0.1016)

    def test_exact_radius_is_free(self):
        cells = np.zeros((11, 20), bool)
        cells[5, 10] = True
        w = build_world(OccupancyGrid(cells, 0.125), robot_radius=0.25)
        # obstacle square spans x in [1.25, 1.375]
        assert w.clearance(1.0, 5.5 * 0.125) == 0.25
        assert not w.collides(1.0, 5.5 * 0.125)
        assert w.collides(1.0 + 1e-9, 5.5 * 0.125)

    def test_corner_distance(self):
        cells = np.zeros((10, 10), bool)
        cells[5, 5] = True
        w = build_world(OccupancyGrid(cells, 1.0))
        assert w.clearance(5.0 - 0.3, 5.0 - 0.4) == pytest.approx(0.5)


class TestConfig:
    @pytest.mark.parametrize(
        "kw", [{"v_max": 0}, {"acc_lin": -1}, {"v_samples": 1}, {"substeps": 0}, {"forward_point_m": -0.1}]
    )
    def test_rejects_invalid(self, kw):
        with pytest.raises(ValueError):
            PlannerConfig(**kw)

    def test_samples_stay_in_window(self):
        cfg = PlannerConfig()
        state = RobotState(0, 0, 0, 0.3, -0.2)
        vs, ws = velocity_samples(state, cfg, np.random.default_rng(1))
        T = cfg.control_period_s
        assert vs.min() >= 0.3 - cfg.acc_lin * T - 1e-12 and vs.max() <= 0.3 + cfg.acc_lin * T + 1e-12
        assert ws.min() >= -0.2 - cfg.acc_ang * T - 1e-12 and ws.max() <= -0.2 + cfg.acc_ang * T + 1e-12
        assert len(vs) == cfg.v_samples * cfg.w_samples + 1


class TestDwaStep:
    def test_open_space_runs_at_top_speed(self):
        grid = OccupancyGrid.empty(60, 30)
        cfg = PlannerConfig()
        gp = GlobalPath(row_path(15, 0, 59))
        state = RobotState(1.0, 15.5 * 0.1016, 0.0, cfg.v_max, 0.0)
        v, w = dwa_step(build_world(grid), state, gp, cfg, np.random.default_rng(0))
        spacing = 2 * cfg.acc_ang * cfg.control_period_s / (cfg.w_samples - 1)
        assert v == cfg.v_max
        assert abs(w) <= spacing

    def test_wall_inside_stopping_distance_triggers_recovery(self):
        cells = np.zeros((30, 30), bool)
        cells[:, 20] = True
        grid = OccupancyGrid(cells)
        cfg = PlannerConfig()
        gp = GlobalPath(row_path(15, 0, 29))
        x = 20 * 0.1016 - 0.3
        state = RobotState(x, 15.5 * 0.1016, 0.0, cfg.v_max, 0.0)
        assert not build_world(grid).collides(state.x, state.y)
        v, w = dwa_step(build_world(grid), state, gp, cfg, np.random.default_rng(0))
        assert (v, w) == (0.0, cfg.w_max)

    def test_same_seed_same_command(self, cluttered):
        grid, cs, path = cluttered
        world = build_world(grid)
        gp = GlobalPath(path)
        x, y = gp.points[0]
        state = RobotState(float(x), float(y), 0.3, 0.2, 0.1)
        cmds = {dwa_step(world, state, gp, PlannerConfig(), np.random.default_rng(42)) for _ in range(3)}
        assert len(cmds) == 1


class TestRunTrial:
    def test_straight_corridor(self):
        grid = OccupancyGrid.empty(31, 11)
        path = row_path(5, 0, 30)
        assert path_length_m(path) == pytest.approx(3.048)
        r = run_trial(grid, grid, (0, 5), (30, 5))
        assert r.success
        assert 6.0 <= r.traversal_time <= 12.0
        assert r.normalized_time == pytest.approx(r.traversal_time / r.path_length)

    def test_sealed_goal_times_out_with_penalty(self):
        cells = np.zeros((20, 30), bool)
        cells[:, 15] = True
        grid = OccupancyGrid(cells)
        # the planner sees open space, the robot meets a wall
        r = run_trial(grid, OccupancyGrid.empty(30, 20), (2, 10), (28, 10), timeout_s=8.0)
        assert not r.success
        assert r.traversal_time == pytest.approx(8.0 + FAILURE_PENALTY_S, abs=1e-9)

    def test_repeatable(self, cluttered):
        grid, cs, path = cluttered
        cfg = PlannerConfig(seed=7)
        a = run_trial(grid, cs, path.start, path.goal, cfg, record=True)
        b = run_trial(grid, cs, path.start, path.goal, cfg, record=True)
        assert a == b
        np.testing.assert_array_equal(a.trajectory, b.trajectory)

    def test_kinematic_limits(self, cluttered):
        grid, cs, path = cluttered
        cfg = PlannerConfig(seed=3)
        traj = run_trial(grid, cs, path.start, path.goal, cfg, record=True).trajectory
        v, w = traj[:, 3], traj[:, 4]
        T = cfg.control_period_s
        assert np.all(np.abs(np.diff(v)) <= cfg.acc_lin * T + 1e-12)
        assert np.all(np.abs(np.diff(w)) <= cfg.acc_ang * T + 1e-12)
        assert np.all(np.abs(v) <= 0.5) and np.all(np.abs(w) <= 1.57)

    def test_success_never_collides(self, cluttered):
        grid, cs, path = cluttered
        world = build_world(grid)
        for seed in range(3):
            r = run_trial(grid, cs, path.start, path.goal, PlannerConfig(seed=seed), world=world, record=True)
            if r.success:
                assert not any(world.collides(x, y) for x, y in r.trajectory[:, :2])
                assert r.normalized_time >= 1.9

    def test_failure_penalty(self, cluttered):
        grid, cs, path = cluttered
        r = run_trial(grid, cs, path.start, path.goal, timeout_s=0.5)
        assert not r.success
        assert r.traversal_time == pytest.approx(0.5 + 30.0)


class TestBenchmark:
    def test_single_trial_has_zero_variance(self, cluttered):
        grid, cs, path = cluttered
        b = benchmark_env(grid, cs, path, n_trials=1)
        assert b.variance == 0.0 and b.mean == b.trials[0].normalized_time

    def test_trial_seeds(self, cluttered):
        grid, cs, path = cluttered
        b = benchmark_env(grid, cs, path, n_trials=3, config=PlannerConfig(seed=10))
        assert [t.seed for t in b.trials] == [10, 11, 12]
        times = [t.normalized_time for t in b.trials]
        assert b.mean == pytest.approx(np.mean(times))
        assert b.variance == pytest.approx(np.var(times))
        with pytest.raises(ValueError):
            benchmark_env(grid, cs, path, n_trials=0)

    def test_csv(self, cluttered, tmp_path):
        grid, cs, path = cluttered
        b = benchmark_env(grid, cs, path, n_trials=2)
        write_trial_csv(tmp_path / "t.csv", trial_rows("env_007", b.trials))
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0] == "env_id,trial,seed,success,time_s,path_m,norm_s_per_m"
        rows = list(csv.DictReader(lines))
        assert [r["trial"] for r in rows] == ["0", "1"]
        assert tuple(rows[0]) == TRIAL_CSV_FIELDS
        assert math.isclose(float(rows[1]["norm_s_per_m"]), b.trials[1].normalized_time, abs_tol=1e-6)
