"""Grid path planning: A* search and the online replanning simulator.

A* runs on 8-connected obstacle maps with unit axial and sqrt(2) diagonal
move costs, a euclidean distance heuristic, and no corner cutting (a
diagonal move needs both flanking cells free). Ties on f prefer larger g,
then the smaller row-major index, so searches are fully deterministic.

The simulator drives a robot with an omnidirectional limited-range sensor:
reveal ground truth around the current cell, replan when the remaining plan
crosses a believed obstacle, advance one cell, repeat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .bev import ObstacleMap
from .errors import GridMismatchError, OutOfBoundsError, StartBlockedError

Cell = tuple[int, int]

OUTCOME_REACHED = "reached"
OUTCOME_NO_PATH = "no_path_found"

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Path:
    cells: tuple[Cell, ...]
    cost: float

    @property
    def steps(self) -> int:
        return len(self.cells) - 1


@dataclass(frozen=True)
class SensorModel:
    """360-degree sensor revealing ground truth within a cell radius."""

    radius: float = 30.0

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError("sensor radius must be >= 1")

    def scaled(self, factor: int) -> "SensorModel":
        """Keep physical range constant across map downsampling."""
        return SensorModel(max(1, int(math.floor(self.radius / factor + 0.5))))


@dataclass(eq=False)
class TrialResult:
    outcome: str
    path_steps: int
    replans: int
    executed: Path
    belief_final: ObstacleMap


def _check_cell(obstacle_map: ObstacleMap, cell: Cell, what: str) -> None:
    r, c = cell
    height, width = obstacle_map.spec.shape
    if not (0 <= r < height and 0 <= c < width):
        raise OutOfBoundsError(f"{what} {cell} outside {height}x{width} map")


def astar(obstacle_map: ObstacleMap, start: Cell, goal: Cell) -> Optional[Path]:
    """Minimal-cost 8-connected path, or None when the goal is unreachable."""
    _check_cell(obstacle_map, start, "start")
    _check_cell(obstacle_map, goal, "goal")
    if obstacle_map.occupied[start]:
        raise StartBlockedError(f"start {start} is an obstacle")
    cost, path = kernels.astar_raw(
        obstacle_map.occupied, int(start[0]), int(start[1]), int(goal[0]), int(goal[1])
    )
    if cost < 0:
        return None
    return Path(tuple((int(r), int(c)) for r, c in path), float(cost))


def _reveal_into(belief: np.ndarray, gt: np.ndarray, pos: Cell, radius: float) -> None:
    # TODO: optional line-of-sight occlusion model (currently a full disk)
    height, width = gt.shape
    r, c = pos
    reach = int(math.floor(radius))
    r0, r1 = max(0, r - reach), min(height, r + reach + 1)
    c0, c1 = max(0, c - reach), min(width, c + reach + 1)
    rr = np.arange(r0, r1) - r
    cc = np.arange(c0, c1) - c
    disk = rr[:, None] ** 2 + cc[None, :] ** 2 <= radius * radius
    window = belief[r0:r1, c0:c1]
    window[disk] = gt[r0:r1, c0:c1][disk]


def reveal(belief: ObstacleMap, gt: ObstacleMap, pos: Cell, sensor: SensorModel) -> ObstacleMap:
    """Overwrite belief with ground truth for every cell whose center lies
    within the sensor radius of pos; other cells are untouched."""
    if belief.spec != gt.spec:
        raise GridMismatchError("belief and ground-truth geometries differ")
    _check_cell(belief, pos, "position")
    out = belief.occupied.copy()
    out.setflags(write=True)
    _reveal_into(out, gt.occupied, pos, sensor.radius)
    return ObstacleMap(belief.spec, out)


def _plan_invalid(belief: np.ndarray, plan: np.ndarray, plan_pos: int) -> bool:
    """True when a remaining planned move is illegal under the belief:
    a planned cell is now an obstacle, or a diagonal move's flanking cell
    is (executing it would cut a known corner)."""
    rows = plan[plan_pos:, 0]
    cols = plan[plan_pos:, 1]
    if belief[rows[1:], cols[1:]].any():
        return True
    dr = rows[1:] - rows[:-1]
    dc = cols[1:] - cols[:-1]
    diag = (dr != 0) & (dc != 0)
    if diag.any():
        if belief[rows[:-1][diag], cols[1:][diag]].any():
            return True
        if belief[rows[1:][diag], cols[:-1][diag]].any():
            return True
    return False


def simulate(
    initial_belief: ObstacleMap,
    gt: ObstacleMap,
    start: Cell,
    goal: Cell,
    sensor: SensorModel,
) -> TrialResult:
    """Online replanning trial.

    Loop: reveal at the current cell; replan with A* on the belief when
    there is no plan or a remaining planned move crosses a believed
    obstacle (each run after the first counts as a replan); stop with
    NO_PATH when A* fails; otherwise advance one cell. Reaching the goal
    ends the trial.
    """
    if initial_belief.spec != gt.spec:
        raise GridMismatchError("belief and ground-truth geometries differ")
    _check_cell(gt, start, "start")
    _check_cell(gt, goal, "goal")
    if gt.occupied[start]:
        raise StartBlockedError(f"start {start} is an obstacle in ground truth")

    belief = initial_belief.occupied.copy()
    belief.setflags(write=True)
    gt_occ = gt.occupied

    pos = (int(start[0]), int(start[1]))
    goal = (int(goal[0]), int(goal[1]))
    executed = [pos]
    cost = 0.0
    searches = 0
    plan: Optional[np.ndarray] = None
    plan_pos = 0  # index of pos within plan

    _reveal_into(belief, gt_occ, pos, sensor.radius)

    while pos != goal:
        if plan is None or _plan_invalid(belief, plan, plan_pos):
            searches += 1
            plan_cost, plan = kernels.astar_raw(belief, pos[0], pos[1], goal[0], goal[1])
            plan_pos = 0
            if plan_cost < 0:
                return TrialResult(
                    outcome=OUTCOME_NO_PATH,
                    path_steps=len(executed) - 1,
                    replans=searches - 1,
                    executed=Path(tuple(executed), cost),
                    belief_final=ObstacleMap(gt.spec, belief),
                )
        plan_pos += 1
        nxt = (int(plan[plan_pos, 0]), int(plan[plan_pos, 1]))
        cost += _SQRT2 if (nxt[0] != pos[0] and nxt[1] != pos[1]) else 1.0
        pos = nxt
        executed.append(pos)
        _reveal_into(belief, gt_occ, pos, sensor.radius)

    return TrialResult(
        outcome=OUTCOME_REACHED,
        path_steps=len(executed) - 1,
        replans=max(0, searches - 1),
        executed=Path(tuple(executed), cost),
        belief_final=ObstacleMap(gt.spec, belief),
    )
