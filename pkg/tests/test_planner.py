"""A* search, sensor reveal, and the replanning simulator."""

import heapq
import math

import numpy as np
import pytest

from bevplan import GridSpec, ObstacleMap, SensorModel, astar, reveal, simulate
from bevplan import kernels
from bevplan.errors import GridMismatchError, OutOfBoundsError, StartBlockedError
from bevplan.planner import OUTCOME_NO_PATH, OUTCOME_REACHED

from conftest import obstacle_from

SQRT2 = math.sqrt(2.0)


def dijkstra_cost(occ, start, goal):
    """Uniform-cost-search oracle over the same move rules, written
    independently of the library kernels."""
    height, width = occ.shape
    if occ[start]:
        return None
    dist = {start: 0.0}
    heap = [(0.0, start)]
    done = set()
    while heap:
        d, cell = heapq.heappop(heap)
        if cell in done:
            continue
        done.add(cell)
        if cell == goal:
            return d
        r, c = cell
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                nr, nc = r + dr, c + dc
                if not (0 <= nr < height and 0 <= nc < width):
                    continue
                if occ[nr, nc]:
                    continue
                if dr != 0 and dc != 0 and (occ[r, nc] or occ[nr, c]):
                    continue
                nd = d + (SQRT2 if dr != 0 and dc != 0 else 1.0)
                if nd < dist.get((nr, nc), math.inf):
                    dist[(nr, nc)] = nd
                    heapq.heappush(heap, (nd, (nr, nc)))
    return None


def path_is_valid(path, occ):
    for (r1, c1), (r2, c2) in zip(path.cells, path.cells[1:]):
        dr, dc = r2 - r1, c2 - c1
        if max(abs(dr), abs(dc)) != 1:
            return False
        if occ[r2, c2]:
            return False
        if dr != 0 and dc != 0 and (occ[r1, c2] or occ[r2, c1]):
            return False
    cost = sum(
        SQRT2 if (a[0] != b[0] and a[1] != b[1]) else 1.0
        for a, b in zip(path.cells, path.cells[1:])
    )
    return abs(cost - path.cost) < 1e-9


class TestAstar:
    def test_start_equals_goal(self):
        m = obstacle_from(np.zeros((3, 3), bool))
        p = astar(m, (1, 1), (1, 1))
        assert p.cells == ((1, 1),)
        assert p.cost == 0.0
        assert p.steps == 0

    def test_diagonal_corridor(self):
        m = obstacle_from(np.zeros((3, 3), bool))
        p = astar(m, (0, 0), (2, 2))
        assert p.steps == 2
        assert p.cost == pytest.approx(2 * SQRT2)

    def test_start_blocked(self):
        m = obstacle_from([[True, False], [False, False]])
        with pytest.raises(StartBlockedError):
            astar(m, (0, 0), (1, 1))

    def test_out_of_bounds(self):
        m = obstacle_from(np.zeros((2, 2), bool))
        with pytest.raises(OutOfBoundsError):
            astar(m, (0, 0), (5, 0))
        with pytest.raises(OutOfBoundsError):
            astar(m, (-1, 0), (1, 1))

    def test_unreachable_returns_none(self):
        occ = np.zeros((3, 3), bool)
        occ[:, 1] = True
        assert astar(obstacle_from(occ), (0, 0), (0, 2)) is None

    def test_no_corner_cutting(self):
        # the only geometric route is the diagonal, and it is forbidden
        occ = np.array([[False, True], [True, False]])
        assert astar(obstacle_from(occ), (0, 0), (1, 1)) is None

    def test_matches_dijkstra_oracle(self):
        rng = np.random.default_rng(97)
        checked = 0
        for _ in range(100):
            occ = rng.random((20, 20)) < 0.3
            free = np.argwhere(~occ)
            if len(free) < 2:
                continue
            s = tuple(free[rng.integers(len(free))])
            g = tuple(free[rng.integers(len(free))])
            expected = dijkstra_cost(occ, s, g)
            path = astar(obstacle_from(occ), s, g)
            if expected is None:
                assert path is None
            else:
                assert path is not None
                assert abs(path.cost - expected) < 1e-9
                assert path_is_valid(path, occ)
                assert path.cells[0] == s and path.cells[-1] == g
            checked += 1
        assert checked >= 95

    @pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba unavailable")
    def test_backends_bit_identical(self, monkeypatch):
        rng = np.random.default_rng(101)
        for _ in range(50):
            occ = (rng.random((15, 15)) < 0.3).astype(np.uint8)
            free = np.argwhere(occ == 0)
            s = free[rng.integers(len(free))]
            g = free[rng.integers(len(free))]
            monkeypatch.setattr(kernels, "USE_NUMBA", True)
            c1, p1 = kernels.astar_raw(occ, *s, *g)
            monkeypatch.setattr(kernels, "USE_NUMBA", False)
            c2, p2 = kernels.astar_raw(occ, *s, *g)
            assert c1 == c2
            assert np.array_equal(p1, p2)


class TestReveal:
    def test_full_reveal(self):
        rng = np.random.default_rng(7)
        gt = obstacle_from(rng.random((6, 6)) < 0.5)
        belief = obstacle_from(np.zeros((6, 6), bool))
        out = reveal(belief, gt, (3, 3), SensorModel(10))
        assert out == gt

    def test_radius_one_is_axial_neighborhood(self):
        gt = obstacle_from(np.ones((5, 5), bool))
        belief = obstacle_from(np.zeros((5, 5), bool))
        out = reveal(belief, gt, (2, 2), SensorModel(1))
        expected = np.zeros((5, 5), bool)
        for r, c in [(2, 2), (1, 2), (3, 2), (2, 1), (2, 3)]:
            expected[r, c] = True  # diagonals are at sqrt(2) > 1
        assert np.array_equal(out.occupied, expected)

    def test_matches_distance_oracle(self):
        rng = np.random.default_rng(19)
        for _ in range(20):
            gt_arr = rng.random((9, 9)) < 0.5
            belief_arr = rng.random((9, 9)) < 0.5
            pos = tuple(rng.integers(0, 9, 2))
            radius = float(rng.integers(1, 6))
            out = reveal(obstacle_from(belief_arr), obstacle_from(gt_arr), pos, SensorModel(radius))
            for r in range(9):
                for c in range(9):
                    if (r - pos[0]) ** 2 + (c - pos[1]) ** 2 <= radius**2:
                        assert out.occupied[r, c] == gt_arr[r, c]
                    else:
                        assert out.occupied[r, c] == belief_arr[r, c]

    def test_monotone_toward_gt(self):
        rng = np.random.default_rng(23)
        gt = obstacle_from(rng.random((8, 8)) < 0.4)
        belief = obstacle_from(np.zeros((8, 8), bool))
        sensed = set()
        sensor = SensorModel(2)
        for pos in [(0, 0), (3, 3), (6, 6), (3, 3)]:
            belief = reveal(belief, gt, pos, sensor)
            for r in range(8):
                for c in range(8):
                    if (r - pos[0]) ** 2 + (c - pos[1]) ** 2 <= 4:
                        sensed.add((r, c))
            for r, c in sensed:
                assert belief.occupied[r, c] == gt.occupied[r, c]

    def test_spec_mismatch(self):
        a = obstacle_from(np.zeros((3, 3), bool))
        b = ObstacleMap(GridSpec(4, 4, 1.0), np.zeros((4, 4), bool))
        with pytest.raises(GridMismatchError):
            reveal(a, b, (0, 0), SensorModel(1))


class TestSensorModel:
    def test_radius_validation(self):
        with pytest.raises(ValueError):
            SensorModel(0)

    def test_scaling_keeps_physical_range(self):
        assert SensorModel(30).scaled(4).radius == 8  # 7.5 rounds up
        assert SensorModel(30).scaled(1).radius == 30
        assert SensorModel(2).scaled(8).radius == 1  # floor at 1


class TestSimulate:
    def test_belief_equals_gt_no_replans(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            occ = rng.random((15, 15)) < 0.25
            free = np.argwhere(~occ)
            s = tuple(free[rng.integers(len(free))])
            g = tuple(free[rng.integers(len(free))])
            gt = obstacle_from(occ)
            optimal = astar(gt, s, g)
            result = simulate(gt, gt, s, g, SensorModel(3))
            if optimal is None:
                assert result.outcome == OUTCOME_NO_PATH
                assert result.replans == 0
            else:
                assert result.outcome == OUTCOME_REACHED
                assert result.replans == 0
                assert result.path_steps == optimal.steps

    def test_hidden_obstacle_detour_hand_traced(self):
        """5x9 empty belief, one ground-truth obstacle at (2,4), radius 1.

        The straight plan (2,0)->(2,8) is the unique optimum (cost 8); the
        obstacle is first sensed on arriving at (2,3), forcing exactly one
        replan; every optimal detour from there takes 6 more moves, so the
        executed path is 3 + 6 = 9 steps.
        """
        gt_arr = np.zeros((5, 9), bool)
        gt_arr[2, 4] = True
        gt = obstacle_from(gt_arr)
        belief = obstacle_from(np.zeros((5, 9), bool))
        result = simulate(belief, gt, (2, 0), (2, 8), SensorModel(1))
        assert result.outcome == OUTCOME_REACHED
        assert result.replans == 1
        assert result.path_steps == 9

    def test_sealed_goal_hand_traced(self):
        """3x9 map, ground truth walls the whole column 4; belief empty,
        radius 2, start (0,0), goal (0,8).

        Trace: reveal at (0,0) and after moves to (0,1) see nothing; at
        (0,2) the sensor reaches (0,4) -> replan #1; every optimal detour
        starts with the diagonal to (1,3); arriving there reveals (1,4) and
        (2,4), so the wall is fully known -> replan #2 finds no path.
        """
        gt_arr = np.zeros((3, 9), bool)
        gt_arr[:, 4] = True
        gt = obstacle_from(gt_arr)
        belief = obstacle_from(np.zeros((3, 9), bool))
        result = simulate(belief, gt, (0, 0), (0, 8), SensorModel(2))
        assert result.outcome == OUTCOME_NO_PATH
        assert result.replans == 2
        assert result.path_steps == 3
        assert result.executed.cells == ((0, 0), (0, 1), (0, 2), (1, 3))

    def test_start_blocked_in_gt(self):
        gt = obstacle_from([[True, False], [False, False]])
        belief = obstacle_from(np.zeros((2, 2), bool))
        with pytest.raises(StartBlockedError):
            simulate(belief, gt, (0, 0), (1, 1), SensorModel(1))

    def test_deterministic(self):
        rng = np.random.default_rng(37)
        gt_arr = rng.random((12, 12)) < 0.3
        gt_arr[0, 0] = False
        gt = obstacle_from(gt_arr)
        belief = obstacle_from(np.zeros((12, 12), bool))
        a = simulate(belief, gt, (0, 0), (11, 11), SensorModel(2))
        b = simulate(belief, gt, (0, 0), (11, 11), SensorModel(2))
        assert a.outcome == b.outcome
        assert a.executed.cells == b.executed.cells
        assert a.replans == b.replans

    def test_never_enters_gt_obstacle_and_bounded_below(self):
        rng = np.random.default_rng(41)
        checked = 0
        for _ in range(15):
            gt_arr = rng.random((14, 14)) < 0.3
            free = np.argwhere(~gt_arr)
            s = tuple(free[rng.integers(len(free))])
            g = tuple(free[rng.integers(len(free))])
            gt = obstacle_from(gt_arr)
            belief = obstacle_from(np.zeros((14, 14), bool))
            result = simulate(belief, gt, s, g, SensorModel(2))
            for cell in result.executed.cells:
                assert not gt_arr[cell]
            optimal = astar(gt, s, g)
            if result.outcome == OUTCOME_REACHED:
                assert optimal is not None
                assert result.path_steps >= optimal.steps
                assert result.executed.cells[-1] == g
                checked += 1
        assert checked >= 5
