import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

from barn.errors import InvalidEndpoint, NoEndpoint, NoPath
from barn.grid import Cell, OccupancyGrid
from barn.planner import Path, astar, can_move, is_connected, octile, path_length_m, select_endpoints
from conftest import bool_grids
from oracles import bfs_reachable, dijkstra_counts


def grid_from(rows):
    return OccupancyGrid(np.array([[c == "#" for c in r] for r in rows]))


class TestPath:
    def test_adjacency_enforced(self):
        with pytest.raises(ValueError):
            Path((Cell(0, 0), Cell(2, 0)), 0.1)
        with pytest.raises(ValueError):
            Path((Cell(0, 0), Cell(0, 0)), 0.1)
        with pytest.raises(ValueError):
            Path((), 0.1)

    def test_lengths(self):
        straight = Path(tuple(Cell(x, 5) for x in range(30)), 0.1016)
        assert straight.cost == 29.0
        assert path_length_m(straight) == pytest.approx(2.9464)
        assert path_length_m(Path((Cell(3, 3),), 0.1016)) == 0.0
        diag = Path(tuple(Cell(i, i) for i in range(6)), 0.2)
        assert path_length_m(diag) == pytest.approx(5 * math.sqrt(2) * 0.2)
        assert diag.step_counts() == (0, 5)

    def test_json_round_trip(self):
        p = Path((Cell(0, 0), Cell(1, 1), Cell(2, 1)), 0.1016)
        assert Path.from_json(p.to_json()) == p
        assert '"cells": [[0, 0], [1, 1], [2, 1]]' in p.to_json()


class TestEndpoints:
    def test_free_grid_reproducible(self):
        g = OccupancyGrid.empty(30, 30)
        s, t = select_endpoints(g, 17)
        assert s.x == 0 and t.x == 29
        assert (s, t) == select_endpoints(g, 17)

    def test_blocked_left_edge(self):
        cells = np.zeros((5, 5), bool)
        cells[:, 0] = True
        with pytest.raises(NoEndpoint):
            select_endpoints(OccupancyGrid(cells), 0)

    def test_blocked_right_edge(self):
        cells = np.zeros((5, 5), bool)
        cells[:, -1] = True
        with pytest.raises(NoEndpoint):
            select_endpoints(OccupancyGrid(cells), 0)

    def test_one_by_one(self):
        assert select_endpoints(OccupancyGrid.empty(1, 1), 3) == (Cell(0, 0), Cell(0, 0))

    def test_only_free_edge_cells_are_drawn(self):
        cells = np.zeros((10, 6), bool)
        cells[::2, 0] = True
        cells[1::2, -1] = True
        for seed in range(200):
            s, t = select_endpoints(OccupancyGrid(cells), seed)
            assert not cells[s.y, s.x] and not cells[t.y, t.x]

    def test_start_rows_uniform(self):
        cells = np.zeros((12, 5), bool)
        cells[[0, 3, 4, 9], 0] = True
        g = OccupancyGrid(cells)
        free_rows = [y for y in range(12) if not cells[y, 0]]
        counts = dict.fromkeys(free_rows, 0)
        for seed in range(10_000):
            counts[select_endpoints(g, seed)[0].y] += 1
        assert chisquare(list(counts.values())).pvalue > 0.01


class TestConnectivity:
    def test_same_cell(self):
        g = OccupancyGrid.empty(3, 3)
        assert is_connected(g, (1, 1), (1, 1))

    def test_wall_blocks(self):
        g = grid_from(["..#..", "..#..", "..#.."])
        assert not is_connected(g, (0, 0), (4, 2))

    def test_diagonal_gap_between_two_blocks_is_closed(self):
        # the only link is a diagonal squeeze between two occupied cells
        g = grid_from([".#", "#."])
        assert not is_connected(g, (0, 0), (1, 1))
        assert not can_move(g.cells, 0, 0, 1, 1)

    def test_diagonal_with_one_free_side_is_open(self):
        g = grid_from(["..", "#."])
        assert is_connected(g, (0, 0), (1, 1))
        assert can_move(g.cells, 0, 0, 1, 1)

    def test_occupied_endpoint(self):
        g = grid_from(["#.", ".."])
        with pytest.raises(InvalidEndpoint):
            is_connected(g, (0, 0), (1, 1))
        with pytest.raises(InvalidEndpoint):
            astar(g, (1, 1), (5, 5))

    @given(bool_grids(min_side=2, max_side=15, density=0.4), st.data())
    def test_matches_bfs(self, cells, data):
        free = np.argwhere(~cells)
        if len(free) == 0:
            return
        a = free[data.draw(st.integers(0, len(free) - 1))][::-1]
        b = free[data.draw(st.integers(0, len(free) - 1))][::-1]
        g = OccupancyGrid(cells)
        assert is_connected(g, a, b) == bfs_reachable(cells, a, b)


class TestAstar:
    def test_straight_row(self):
        p = astar(OccupancyGrid.empty(30, 10), (0, 5), (29, 5))
        assert len(p) == 30 and p.cost == 29.0

    def test_start_is_goal(self):
        p = astar(OccupancyGrid.empty(4, 4), (2, 2), (2, 2))
        assert p.cells == (Cell(2, 2),) and p.cost == 0.0

    def test_disconnected(self):
        with pytest.raises(NoPath):
            astar(grid_from([".#.", ".#.", ".#."]), (0, 0), (2, 2))

    def test_no_corner_cutting(self):
        g = grid_from(["..#", "#..", "..."])
        p = astar(g, (0, 0), (2, 1))
        for a, b in zip(p.cells, p.cells[1:]):
            assert can_move(g.cells, a.x, a.y, b.x - a.x, b.y - a.y)

    def test_deterministic_output(self):
        g = OccupancyGrid(np.random.default_rng(8).random((15, 15)) < 0.25)
        g = OccupancyGrid(np.where(np.eye(15, dtype=bool), False, g.cells))
        assert astar(g, (0, 0), (14, 14)).cells == astar(g, (0, 0), (14, 14)).cells

    def test_octile(self):
        assert octile((0, 0), (3, 5)) == pytest.approx(5 + 3 * (math.sqrt(2) - 1))

    def test_optimal_on_hundred_random_grids(self):
        rng = np.random.default_rng(2024)
        checked = 0
        while checked < 100:
            cells = rng.random((15, 15)) < 0.3
            free = np.argwhere(~cells)
            a, b = free[rng.integers(len(free))][::-1], free[rng.integers(len(free))][::-1]
            want = dijkstra_counts(cells, a, b)
            g = OccupancyGrid(cells)
            if want is None:
                with pytest.raises(NoPath):
                    astar(g, a, b)
                continue
            p = astar(g, a, b)
            assert p.cost == want[0] + want[1] * math.sqrt(2)
            assert p.start == tuple(a) and p.goal == tuple(b)
            assert p.is_free_in(g)
            checked += 1
