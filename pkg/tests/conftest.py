import numpy as np
import pytest

from bevplan import GridSpec, ObstacleMap, SemanticGrid
from bevplan.bev import TO_INPAINT, UNOBSERVED
from bevplan.partition import ClassInfo, ClassPartition, ROLE_FREE, ROLE_IGNORE, ROLE_OBSTACLE

# small ids with gaps, on purpose
ROAD = 1
SIDEWALK = 2
BUILDING = 5
VEGETATION = 7
MOVING = 9


@pytest.fixture(scope="session")
def partition():
    return ClassPartition(
        [
            ClassInfo(ROAD, "road", (255, 0, 255), ROLE_FREE),
            ClassInfo(SIDEWALK, "sidewalk", (75, 0, 75), ROLE_FREE),
            ClassInfo(BUILDING, "building", (0, 200, 255), ROLE_OBSTACLE),
            ClassInfo(VEGETATION, "vegetation", (0, 175, 0), ROLE_OBSTACLE),
            ClassInfo(MOVING, "moving", (0, 0, 0), ROLE_IGNORE),
        ]
    )


def grid_from(array, cell_size=1.0, origin=(0.0, 0.0)) -> SemanticGrid:
    array = np.asarray(array, dtype=np.int32)
    spec = GridSpec(width=array.shape[1], height=array.shape[0], cell_size=cell_size, origin=origin)
    return SemanticGrid(spec, array)


def obstacle_from(array) -> ObstacleMap:
    array = np.asarray(array, dtype=bool)
    spec = GridSpec(width=array.shape[1], height=array.shape[0], cell_size=1.0)
    return ObstacleMap(spec, array)


def random_semantic_cells(rng, height, width, class_ids, p_unobserved=0.3, p_masked=0.2):
    """Random grid mixing classes, UNOBSERVED, and TO_INPAINT."""
    cells = rng.choice(np.asarray(class_ids, dtype=np.int32), size=(height, width))
    u = rng.random((height, width))
    cells[u < p_unobserved] = UNOBSERVED
    cells[(u >= p_unobserved) & (u < p_unobserved + p_masked)] = TO_INPAINT
    return cells


GAP_ROWS = range(18, 24)
GAP_COL = 30


def wall_gap_maps() -> tuple[ObstacleMap, ObstacleMap, ObstacleMap]:
    """60x60 scene: a vertical wall split by a bottom corridor; the input
    map misses a stretch of the wall (an occluded gap), the inpainted map
    equals ground truth."""
    spec = GridSpec(width=60, height=60, cell_size=1.0)
    gt = np.zeros((60, 60), dtype=bool)
    gt[0:48, GAP_COL] = True
    inp = gt.copy()
    for r in GAP_ROWS:
        inp[r, GAP_COL] = False
    return (
        ObstacleMap(spec, inp),
        ObstacleMap(spec, gt.copy()),
        ObstacleMap(spec, gt),
    )


def gap_cells() -> set[tuple[int, int]]:
    return {(r, GAP_COL) for r in GAP_ROWS}
