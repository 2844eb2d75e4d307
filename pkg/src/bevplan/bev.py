"""Bird's-eye-view grids: rasterization, hull masking, obstacle maps.

Cell states are stored as int32: class ids >= 0, ``UNOBSERVED`` (-1) for
cells no point landed in, ``TO_INPAINT`` (-2) for unobserved cells flagged
for inpainting. Grid values are immutable after construction; every
operation returns a new value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import ingest
from .errors import (
    BadFactorError,
    GridMismatchError,
    MalformedFileError,
    UnknownClassError,
)
from .partition import ClassPartition

UNOBSERVED = -1
TO_INPAINT = -2

_AXES = {"x": 0, "y": 1, "z": 2}


def _parse_axis(axis: str) -> tuple[int, float]:
    name = axis[1:] if axis.startswith(("+", "-")) else axis
    if name not in _AXES:
        raise ValueError(f"bad axis {axis!r}; use one of x, y, z with optional sign")
    return _AXES[name], -1.0 if axis.startswith("-") else 1.0


@dataclass(frozen=True)
class GridSpec:
    """Grid geometry: size in cells, meters per cell, world placement.

    ``origin`` is the world coordinate (along the row and column axes,
    sign applied) of the minimum corner of cell (0, 0). ``row_axis`` /
    ``col_axis`` map sensor-frame axes onto the raster; defaults put
    forward (+x) on rows and left (+y) on columns.
    """

    width: int
    height: int
    cell_size: float
    origin: tuple[float, float] = (0.0, 0.0)
    row_axis: str = "x"
    col_axis: str = "y"

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("grid dimensions must be positive")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        ra, _ = _parse_axis(self.row_axis)
        ca, _ = _parse_axis(self.col_axis)
        if ra == ca:
            raise ValueError("row and column axes must differ")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def cells_of_points(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Row/col index per point (may fall outside the grid)."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        ra, rs = _parse_axis(self.row_axis)
        ca, cs = _parse_axis(self.col_axis)
        rows = np.floor((rs * pts[:, ra] - self.origin[0]) / self.cell_size).astype(np.int64)
        cols = np.floor((cs * pts[:, ca] - self.origin[1]) / self.cell_size).astype(np.int64)
        return rows, cols

    def height_axis(self) -> int:
        """Index of the sensor-frame axis not mapped onto the raster."""
        ra, _ = _parse_axis(self.row_axis)
        ca, _ = _parse_axis(self.col_axis)
        return ({0, 1, 2} - {ra, ca}).pop()

    def scaled(self, factor: int) -> "GridSpec":
        return GridSpec(
            width=-(-self.width // factor),
            height=-(-self.height // factor),
            cell_size=self.cell_size * factor,
            origin=self.origin,
            row_axis=self.row_axis,
            col_axis=self.col_axis,
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "width": self.width,
                "height": self.height,
                "cell_size": self.cell_size,
                "origin": list(self.origin),
                "row_axis": self.row_axis,
                "col_axis": self.col_axis,
            }
        )

    @staticmethod
    def from_json(text: str) -> "GridSpec":
        try:
            d = json.loads(text)
            return GridSpec(
                width=int(d["width"]),
                height=int(d["height"]),
                cell_size=float(d["cell_size"]),
                origin=(float(d["origin"][0]), float(d["origin"][1])),
                row_axis=str(d.get("row_axis", "x")),
                col_axis=str(d.get("col_axis", "y")),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, IndexError) as exc:
            raise MalformedFileError(f"bad grid geometry record: {exc}") from exc


def default_grid_spec() -> GridSpec:
    """51.2 m x 51.2 m forward-facing footprint at 0.2 m/cell."""
    return GridSpec(width=256, height=256, cell_size=0.2, origin=(0.0, -25.6))


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(eq=False)
class SemanticGrid:
    spec: GridSpec
    cells: np.ndarray  # int32 (height, width)

    def __post_init__(self):
        cells = _frozen(self.cells, np.int32)
        if cells.shape != self.spec.shape:
            raise GridMismatchError(f"cells shape {cells.shape} != spec shape {self.spec.shape}")
        self.cells = cells

    def __eq__(self, other) -> bool:
        if not isinstance(other, SemanticGrid):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.cells, other.cells)


@dataclass(eq=False)
class InpaintMask:
    spec: GridSpec
    flags: np.ndarray  # bool (height, width), True = fill this cell

    def __post_init__(self):
        flags = _frozen(self.flags, bool)
        if flags.shape != self.spec.shape:
            raise GridMismatchError(f"flags shape {flags.shape} != spec shape {self.spec.shape}")
        self.flags = flags

    def __eq__(self, other) -> bool:
        if not isinstance(other, InpaintMask):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.flags, other.flags)


@dataclass(eq=False)
class ObstacleMap:
    spec: GridSpec
    occupied: np.ndarray  # bool (height, width), True = obstacle

    def __post_init__(self):
        occupied = _frozen(self.occupied, bool)
        if occupied.shape != self.spec.shape:
            raise GridMismatchError(
                f"occupied shape {occupied.shape} != spec shape {self.spec.shape}"
            )
        self.occupied = occupied

    def __eq__(self, other) -> bool:
        if not isinstance(other, ObstacleMap):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.occupied, other.occupied)


def rasterize_bev(
    cloud: ingest.LabeledCloud,
    spec: GridSpec,
    partition: ClassPartition,
    z_min: Optional[float] = None,
    z_max: Optional[float] = None,
) -> SemanticGrid:
    """Project points onto the ground plane and label cells.

    A cell takes the label of its highest point; height ties prefer
    obstacle classes, then the lowest class id. Points outside the grid
    (or the optional height window) are dropped; empty cells are
    UNOBSERVED. The cloud must already be stripped of ignored classes.
    """
    cells = np.full(spec.shape, UNOBSERVED, dtype=np.int32)
    if len(cloud) == 0:
        return SemanticGrid(spec, cells)

    known = np.array(sorted(partition.classes), dtype=np.uint16)
    bad = ~np.isin(cloud.labels, known)
    if bad.any():
        raise UnknownClassError(
            f"cloud contains class ids outside the partition: "
            f"{sorted(set(cloud.labels[bad].tolist()))[:8]} (strip ignored classes first)"
        )

    heights = cloud.points[:, spec.height_axis()].astype(np.float64)
    rows, cols = spec.cells_of_points(cloud.points)
    keep = (rows >= 0) & (rows < spec.height) & (cols >= 0) & (cols < spec.width)
    if z_min is not None:
        keep &= heights >= z_min
    if z_max is not None:
        keep &= heights <= z_max
    if not keep.any():
        return SemanticGrid(spec, cells)

    rows = rows[keep]
    cols = cols[keep]
    heights = heights[keep]
    labels = cloud.labels[keep].astype(np.int64)

    obstacle_ids = np.array(sorted(partition.obstacle_classes), dtype=np.int64)
    is_obs = np.isin(labels, obstacle_ids).astype(np.int8)
    flat = rows * spec.width + cols
    # ascending sort by (cell, height, obstacle-priority, -id); the last
    # entry of each cell group is the winner
    order = np.lexsort((-labels, is_obs, heights, flat))
    flat_sorted = flat[order]
    labels_sorted = labels[order]
    last = np.ones(flat_sorted.size, dtype=bool)
    last[:-1] = flat_sorted[1:] != flat_sorted[:-1]
    out = cells.copy()
    out.setflags(write=True)
    out.ravel()[flat_sorted[last]] = labels_sorted[last].astype(np.int32)
    return SemanticGrid(spec, out)


def _convex_hull(points: np.ndarray) -> Optional[np.ndarray]:
    """Monotone-chain hull in CCW order; None when degenerate (< 3
    non-collinear points). Integer coordinates, exact arithmetic."""
    pts = np.unique(np.asarray(points, dtype=np.int64), axis=0)
    if pts.shape[0] < 3:
        return None

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = np.array(lower[:-1] + upper[:-1], dtype=np.int64)
    if hull.shape[0] < 3:
        return None
    return hull


def _inside_hull(points: np.ndarray, hull: np.ndarray) -> np.ndarray:
    """True where a point lies inside or on the CCW hull (exact)."""
    px = points[:, 0]
    py = points[:, 1]
    inside = np.ones(points.shape[0], dtype=bool)
    for i in range(hull.shape[0]):
        ax, ay = hull[i]
        bx, by = hull[(i + 1) % hull.shape[0]]
        inside &= (bx - ax) * (py - ay) - (by - ay) * (px - ax) >= 0
    return inside


def _row_extremes(points: np.ndarray) -> np.ndarray:
    """Per-row min/max column points; dropping row-interior points never
    changes the hull (they lie on the segment between the two extremes)."""
    order = np.lexsort((points[:, 1], points[:, 0]))
    pts = points[order]
    first = np.ones(pts.shape[0], dtype=bool)
    first[1:] = pts[1:, 0] != pts[:-1, 0]
    last = np.ones(pts.shape[0], dtype=bool)
    last[:-1] = pts[1:, 0] != pts[:-1, 0]
    return pts[first | last]


def hull_mask(grid: SemanticGrid) -> InpaintMask:
    """Flag unobserved cells whose centers fall inside the convex hull of
    the observed cells. Degenerate hulls yield an empty mask."""
    flags = np.zeros(grid.spec.shape, dtype=bool)
    observed = np.argwhere(grid.cells >= 0)
    hull = _convex_hull(_row_extremes(observed)) if observed.shape[0] >= 3 else None
    if hull is None:
        return InpaintMask(grid.spec, flags)
    unknown = np.argwhere(grid.cells == UNOBSERVED)
    if unknown.shape[0]:
        inside = _inside_hull(unknown.astype(np.int64), hull)
        flags[unknown[inside, 0], unknown[inside, 1]] = True
    return InpaintMask(grid.spec, flags)


def apply_mask(grid: SemanticGrid, mask: InpaintMask) -> SemanticGrid:
    """Turn flagged unobserved cells into TO_INPAINT; labeled cells and
    unflagged cells are untouched."""
    if grid.spec != mask.spec:
        raise GridMismatchError("grid and mask geometries differ")
    cells = grid.cells.copy()
    cells.setflags(write=True)
    cells[mask.flags & (grid.cells == UNOBSERVED)] = TO_INPAINT
    return SemanticGrid(grid.spec, cells)


def build_training_pair(
    scan: ingest.LabeledCloud,
    gt_map: ingest.LabeledCloud,
    calib: ingest.CalibrationSet,
    spec: GridSpec,
    partition: ClassPartition,
    z_min: Optional[float] = None,
    z_max: Optional[float] = None,
) -> tuple[SemanticGrid, InpaintMask, SemanticGrid]:
    """One inpainting sample: masked scan raster, mask, ground-truth raster.

    Both clouds pass the same frustum filter, dynamic-class strip, and grid.
    """
    scan_grid = rasterize_bev(
        ingest.strip_dynamic(ingest.frustum_filter(scan, calib), partition),
        spec,
        partition,
        z_min,
        z_max,
    )
    target = rasterize_bev(
        ingest.strip_dynamic(ingest.frustum_filter(gt_map, calib), partition),
        spec,
        partition,
        z_min,
        z_max,
    )
    mask = hull_mask(scan_grid)
    return apply_mask(scan_grid, mask), mask, target


def to_obstacle_map(grid: SemanticGrid, partition: ClassPartition) -> ObstacleMap:
    """Obstacle classes become obstacles; free classes, unobserved, and
    to-inpaint cells are all free (the optimistic assumption)."""
    labeled = grid.cells[grid.cells >= 0]
    if labeled.size:
        known = np.array(sorted(partition.classes), dtype=np.int32)
        bad = np.setdiff1d(np.unique(labeled), known)
        if bad.size:
            raise UnknownClassError(f"grid contains unknown class ids {bad.tolist()[:8]}")
    obstacle_ids = np.array(sorted(partition.obstacle_classes), dtype=np.int32)
    occupied = np.isin(grid.cells, obstacle_ids)
    return ObstacleMap(grid.spec, occupied)


def downsample(obstacle_map: ObstacleMap, factor: int) -> ObstacleMap:
    """Block-majority downsampling; ties vote obstacle. Trailing partial
    blocks are voted over their actual cells."""
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise BadFactorError(f"factor must be a positive integer, got {factor!r}")
    if factor == 1:
        return ObstacleMap(obstacle_map.spec, obstacle_map.occupied)
    height, width = obstacle_map.spec.shape
    ri = np.arange(0, height, factor)
    ci = np.arange(0, width, factor)
    occ = obstacle_map.occupied.astype(np.int64)
    sums = np.add.reduceat(np.add.reduceat(occ, ri, axis=0), ci, axis=1)
    sizes = np.add.reduceat(np.add.reduceat(np.ones_like(occ), ri, axis=0), ci, axis=1)
    return ObstacleMap(obstacle_map.spec.scaled(int(factor)), sums * 2 >= sizes)
