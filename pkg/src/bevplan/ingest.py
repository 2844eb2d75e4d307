"""Point-cloud ingest: binary cloud/label files, calibration, camera frustum.

File layout follows the de-facto odometry-dataset conventions so public
sequences work unmodified:

* points: consecutive little-endian float32 quadruples (x, y, z, intensity);
  intensity is parsed and discarded
* labels: consecutive little-endian uint32; class id in the low 16 bits
  (upper 16 bits carry an instance id, discarded)
* calibration: plain text, ``KEY: v0 v1 ... v11`` rows; ``Tr`` is the 3x4
  lidar-to-rectified-camera transform, ``P2`` the 3x4 projection matrix

Projection maps a lidar-frame point into the image as P @ (Tr @ X) in
homogeneous coordinates; depth is the third homogeneous coordinate before
the perspective divide.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BehindCameraError,
    MalformedFileError,
    MismatchedCountsError,
)
from .partition import ClassPartition

_POINT_RECORD_BYTES = 16  # 4 float32
_LABEL_RECORD_BYTES = 4  # 1 uint32


@dataclass(eq=False)
class LabeledCloud:
    """Points (N, 3) float32 in the sensor frame with per-point class ids."""

    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float32).reshape(-1, 3)
        labels = np.array(self.labels, dtype=np.uint16).reshape(-1)
        if points.shape[0] != labels.shape[0]:
            raise MismatchedCountsError(
                f"{points.shape[0]} points vs {labels.shape[0]} labels"
            )
        if points.size and not np.isfinite(points).all():
            raise MalformedFileError("cloud contains non-finite coordinates")
        points.setflags(write=False)
        labels.setflags(write=False)
        self.points = points
        self.labels = labels

    def __len__(self) -> int:
        return self.points.shape[0]

    def take(self, mask: np.ndarray) -> "LabeledCloud":
        return LabeledCloud(self.points[mask], self.labels[mask])

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledCloud):
            return NotImplemented
        return np.array_equal(self.points, other.points) and np.array_equal(
            self.labels, other.labels
        )


@dataclass(eq=False)
class CalibrationSet:
    """Lidar-to-camera transform, projection matrix, and image bounds."""

    tr: np.ndarray  # 4x4 homogeneous, lidar -> rectified camera
    p: np.ndarray  # 3x4 projection, rectified camera -> image
    image_width: int
    image_height: int

    def __post_init__(self):
        tr = np.array(self.tr, dtype=np.float64)
        p = np.array(self.p, dtype=np.float64)
        if tr.shape != (4, 4):
            raise ValueError(f"tr must be 4x4, got {tr.shape}")
        if not np.array_equal(tr[3], [0.0, 0.0, 0.0, 1.0]):
            raise ValueError("tr bottom row must be (0, 0, 0, 1)")
        if p.shape != (3, 4):
            raise ValueError(f"p must be 3x4, got {p.shape}")
        if np.linalg.matrix_rank(p) != 3:
            raise ValueError("p must have full row rank")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be positive")
        tr.setflags(write=False)
        p.setflags(write=False)
        self.tr = tr
        self.p = p


@dataclass(frozen=True)
class ImagePoint:
    u: float
    v: float
    depth: float


def load_cloud(points_path: str | Path, labels_path: str | Path) -> LabeledCloud:
    points_path = Path(points_path)
    labels_path = Path(labels_path)
    psize = points_path.stat().st_size
    lsize = labels_path.stat().st_size
    if psize % _POINT_RECORD_BYTES != 0:
        raise MalformedFileError(
            f"{points_path}: size {psize} not a multiple of {_POINT_RECORD_BYTES}"
        )
    if lsize % _LABEL_RECORD_BYTES != 0:
        raise MalformedFileError(
            f"{labels_path}: size {lsize} not a multiple of {_LABEL_RECORD_BYTES}"
        )
    n_points = psize // _POINT_RECORD_BYTES
    n_labels = lsize // _LABEL_RECORD_BYTES
    if n_points != n_labels:
        raise MismatchedCountsError(
            f"{points_path} has {n_points} points but {labels_path} has {n_labels} labels"
        )
    raw = np.fromfile(points_path, dtype="<f4").reshape(-1, 4)
    labels = np.fromfile(labels_path, dtype="<u4") & 0xFFFF
    return LabeledCloud(raw[:, :3], labels.astype(np.uint16))


def save_cloud(cloud: LabeledCloud, points_path: str | Path, labels_path: str | Path) -> None:
    """Inverse of load_cloud; intensity and instance bits are written as zero."""
    raw = np.zeros((len(cloud), 4), dtype="<f4")
    raw[:, :3] = cloud.points
    raw.tofile(points_path)
    cloud.labels.astype("<u4").tofile(labels_path)


def load_calibration(
    path: str | Path,
    image_width: int,
    image_height: int,
    tr_key: str = "Tr",
    p_key: str = "P2",
) -> CalibrationSet:
    """Parse a key/value calibration text file (rows of 12 numbers)."""
    rows: dict[str, np.ndarray] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or ":" not in line:
            continue
        key, value = line.split(":", 1)
        try:
            rows[key.strip()] = np.array([float(x) for x in value.split()])
        except ValueError:
            continue
    for key in (tr_key, p_key):
        if key not in rows:
            raise MalformedFileError(f"{path}: missing '{key}:' row")
        if rows[key].size != 12:
            raise MalformedFileError(
                f"{path}: '{key}:' row has {rows[key].size} values, expected 12"
            )
    tr = np.vstack([rows[tr_key].reshape(3, 4), [0.0, 0.0, 0.0, 1.0]])
    p = rows[p_key].reshape(3, 4)
    try:
        return CalibrationSet(tr, p, image_width, image_height)
    except ValueError as exc:
        raise MalformedFileError(f"{path}: {exc}") from exc


def project_points(points: np.ndarray, calib: CalibrationSet):
    """Vectorized projection; returns (u, v, depth) arrays.

    u/v are NaN where depth <= 0 (no valid perspective divide).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    hom = np.hstack([pts, np.ones((pts.shape[0], 1))])
    cam = hom @ calib.tr.T
    img = cam @ calib.p.T
    depth = img[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(depth > 0, img[:, 0] / depth, np.nan)
        v = np.where(depth > 0, img[:, 1] / depth, np.nan)
    return u, v, depth


def project_point(point, calib: CalibrationSet) -> ImagePoint:
    u, v, depth = project_points(np.asarray(point, dtype=np.float64).reshape(1, 3), calib)
    if depth[0] <= 0:
        raise BehindCameraError(f"point {tuple(point)} has depth {depth[0]:.6g}")
    return ImagePoint(float(u[0]), float(v[0]), float(depth[0]))


def frustum_filter(cloud: LabeledCloud, calib: CalibrationSet) -> LabeledCloud:
    """Keep points that project inside the image with positive depth.

    Bounds are half-open (0 <= u < width, 0 <= v < height); output points
    stay in the sensor frame.
    """
    if len(cloud) == 0:
        return cloud
    u, v, depth = project_points(cloud.points, calib)
    keep = (
        (depth > 0)
        & (u >= 0.0)
        & (u < calib.image_width)
        & (v >= 0.0)
        & (v < calib.image_height)
    )
    return cloud.take(keep)


def strip_dynamic(cloud: LabeledCloud, partition: ClassPartition) -> LabeledCloud:
    """Drop points whose class is in the partition's ignore set."""
    if len(cloud) == 0 or not partition.dynamic_or_ignored:
        return cloud
    ignored = np.array(sorted(partition.dynamic_or_ignored), dtype=np.uint16)
    keep = ~np.isin(cloud.labels, ignored)
    return cloud.take(keep)
