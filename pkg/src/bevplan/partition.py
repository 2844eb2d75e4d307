"""Semantic class partition: obstacle / free / ignored classes plus palette.

The partition is config, not code: a JSON file with one entry per class
(id, name, rgb, role). ``role`` is one of ``obstacle``, ``free``, ``ignore``.
Ignored classes (dynamic objects, unlabeled points) are stripped before
rasterization and never rendered, so they need no distinct color.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import MalformedFileError, PaletteCollisionError

ROLE_OBSTACLE = "obstacle"
ROLE_FREE = "free"
ROLE_IGNORE = "ignore"
_ROLES = (ROLE_OBSTACLE, ROLE_FREE, ROLE_IGNORE)

# Reserved render colors: white marks cells to inpaint, grey marks
# unobserved cells. No class may use either.
TO_INPAINT_COLOR = (255, 255, 255)
UNOBSERVED_COLOR = (128, 128, 128)


@dataclass(frozen=True)
class ClassInfo:
    class_id: int
    name: str
    color: tuple[int, int, int]
    role: str


@dataclass
class ClassPartition:
    entries: list[ClassInfo]
    classes: frozenset[int] = field(init=False)
    obstacle_classes: frozenset[int] = field(init=False)
    free_classes: frozenset[int] = field(init=False)
    dynamic_or_ignored: frozenset[int] = field(init=False)

    def __post_init__(self):
        seen: dict[int, str] = {}
        for e in self.entries:
            if e.role not in _ROLES:
                raise MalformedFileError(f"class {e.class_id}: unknown role {e.role!r}")
            if e.class_id < 0 or e.class_id > 0xFFFF:
                raise MalformedFileError(f"class id {e.class_id} outside [0, 65535]")
            if e.class_id in seen:
                raise MalformedFileError(f"class id {e.class_id} defined twice")
            seen[e.class_id] = e.role
        self.obstacle_classes = frozenset(e.class_id for e in self.entries if e.role == ROLE_OBSTACLE)
        self.free_classes = frozenset(e.class_id for e in self.entries if e.role == ROLE_FREE)
        self.classes = self.obstacle_classes | self.free_classes
        self.dynamic_or_ignored = frozenset(e.class_id for e in self.entries if e.role == ROLE_IGNORE)

        colors: dict[tuple[int, int, int], int] = {}
        for e in self.entries:
            if e.role == ROLE_IGNORE:
                continue
            if any(v < 0 or v > 255 for v in e.color):
                raise MalformedFileError(f"class {e.class_id}: rgb out of range")
            if e.color in (TO_INPAINT_COLOR, UNOBSERVED_COLOR):
                raise PaletteCollisionError(
                    f"class {e.class_id} uses reserved color {e.color}"
                )
            if e.color in colors:
                raise PaletteCollisionError(
                    f"classes {colors[e.color]} and {e.class_id} share color {e.color}"
                )
            colors[e.color] = e.class_id

    @property
    def names(self) -> dict[int, str]:
        return {e.class_id: e.name for e in self.entries}

    @property
    def palette(self) -> dict[int, tuple[int, int, int]]:
        """Render color per non-ignored class id."""
        return {e.class_id: e.color for e in self.entries if e.role != ROLE_IGNORE}

    def is_obstacle(self, class_id: int) -> bool:
        return class_id in self.obstacle_classes

    def to_dict(self) -> dict:
        return {
            "classes": [
                {"id": e.class_id, "name": e.name, "rgb": list(e.color), "role": e.role}
                for e in self.entries
            ]
        }


def partition_from_dict(data: dict) -> ClassPartition:
    if not isinstance(data, dict) or "classes" not in data:
        raise MalformedFileError("partition config must be an object with a 'classes' list")
    entries = []
    for item in data["classes"]:
        try:
            rgb = item.get("rgb", [0, 0, 0])
            entries.append(
                ClassInfo(
                    class_id=int(item["id"]),
                    name=str(item["name"]),
                    color=(int(rgb[0]), int(rgb[1]), int(rgb[2])),
                    role=str(item["role"]),
                )
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise MalformedFileError(f"bad partition entry {item!r}: {exc}") from exc
    return ClassPartition(entries)


def load_partition(path: str | Path) -> ClassPartition:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedFileError(f"{path}: not valid JSON ({exc})") from exc
    return partition_from_dict(data)


def save_partition(partition: ClassPartition, path: str | Path) -> None:
    Path(path).write_text(json.dumps(partition.to_dict(), indent=2) + "\n")


def default_partition() -> ClassPartition:
    """Urban outdoor defaults using the de-facto odometry-dataset label ids.

    Ground-like classes are free space; structures, vegetation, and parked
    vehicles are obstacles; moving agents and unlabeled returns are ignored
    (a static world is assumed).
    """
    obstacle = [
        (10, "car", (245, 150, 100)),
        (11, "bicycle", (245, 230, 100)),
        (13, "bus", (250, 80, 100)),
        (15, "motorcycle", (150, 60, 30)),
        (18, "truck", (180, 30, 80)),
        (20, "other-vehicle", (255, 0, 0)),
        (50, "building", (0, 200, 255)),
        (51, "fence", (50, 120, 255)),
        (52, "other-structure", (0, 150, 255)),
        (70, "vegetation", (0, 175, 0)),
        (71, "trunk", (0, 60, 135)),
        (80, "pole", (150, 240, 255)),
        (81, "traffic-sign", (0, 0, 255)),
        (99, "other-object", (50, 255, 255)),
    ]
    free = [
        (40, "road", (255, 0, 255)),
        (44, "parking", (255, 150, 255)),
        (48, "sidewalk", (75, 0, 75)),
        (49, "other-ground", (175, 0, 75)),
        (60, "lane-marking", (170, 255, 150)),
        (72, "terrain", (80, 240, 150)),
    ]
    ignore = [
        (0, "unlabeled", (0, 0, 0)),
        (1, "outlier", (0, 0, 0)),
        (30, "person", (0, 0, 0)),
        (31, "bicyclist", (0, 0, 0)),
        (32, "motorcyclist", (0, 0, 0)),
        (252, "moving-car", (0, 0, 0)),
        (253, "moving-bicyclist", (0, 0, 0)),
        (254, "moving-person", (0, 0, 0)),
        (255, "moving-motorcyclist", (0, 0, 0)),
        (256, "moving-on-rails", (0, 0, 0)),
        (257, "moving-bus", (0, 0, 0)),
        (258, "moving-truck", (0, 0, 0)),
        (259, "moving-other-vehicle", (0, 0, 0)),
    ]
    entries = [ClassInfo(i, n, c, ROLE_OBSTACLE) for i, n, c in obstacle]
    entries += [ClassInfo(i, n, c, ROLE_FREE) for i, n, c in free]
    entries += [ClassInfo(i, n, c, ROLE_IGNORE) for i, n, c in ignore]
    return ClassPartition(entries)
