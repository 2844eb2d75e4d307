"""Scoring and the batch study harness.

mIoU scores inpainted grids against ground truth inside the inpaint mask.
run_study reproduces the planner evaluation protocol: draw seeded
(start, goal) pairs, run the replanning simulator on the input / inpainted /
ground-truth obstacle maps with identical draws, and aggregate mean (std)
per metric. Per-trial randomness derives from (seed, trial index), so
results are independent of worker scheduling.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from PIL import Image

from .bev import ObstacleMap, InpaintMask, SemanticGrid
from .errors import EmptyMaskError, GridMismatchError, NoFreeCellsError
from .partition import ClassPartition
from .planner import (
    OUTCOME_NO_PATH,
    OUTCOME_REACHED,
    Cell,
    SensorModel,
    TrialResult,
    simulate,
)

VARIANT_NAMES = ("input", "inpainted", "gt")

START_RANDOM = "random"
START_FIXED = "fixed_near_sensor"

_MAX_DRAWS = 10_000


@dataclass
class ConfusionCounts:
    """Per-class true/false positive and false negative cell counts,
    accumulated only inside the evaluation mask."""

    tp: dict[int, int]
    fp: dict[int, int]
    fn: dict[int, int]


def confusion_counts(
    pred: SemanticGrid,
    gt: SemanticGrid,
    mask: InpaintMask,
    partition: ClassPartition,
) -> ConfusionCounts:
    if not (pred.spec == gt.spec == mask.spec):
        raise GridMismatchError("pred, gt, and mask geometries differ")
    scored = mask.flags & (gt.cells >= 0)
    p = pred.cells[scored]
    g = gt.cells[scored]
    if p.size and (p < 0).any():
        raise ValueError("prediction is not fully labeled inside the mask")
    classes = sorted(partition.classes)
    tp = {c: int(((p == c) & (g == c)).sum()) for c in classes}
    fp = {c: int(((p == c) & (g != c)).sum()) for c in classes}
    fn = {c: int(((p != c) & (g == c)).sum()) for c in classes}
    return ConfusionCounts(tp, fp, fn)


def miou(
    pred: SemanticGrid,
    gt: SemanticGrid,
    mask: InpaintMask,
    partition: ClassPartition,
    mode: str = "present",
) -> tuple[float, dict[int, float]]:
    """Mean intersection-over-union over masked cells.

    ``mode="present"`` averages over classes appearing in pred or gt inside
    the mask; ``mode="all"`` divides by the full class count, counting
    absent classes as zero.
    """
    if mode not in ("present", "all"):
        raise ValueError(f"unknown miou mode {mode!r}")
    counts = confusion_counts(pred, gt, mask, partition)
    scored = int((mask.flags & (gt.cells >= 0)).sum())
    if scored == 0:
        raise EmptyMaskError("no labeled cells to score inside the mask")
    per_class: dict[int, float] = {}
    for c in sorted(partition.classes):
        union = counts.tp[c] + counts.fp[c] + counts.fn[c]
        if union > 0:
            per_class[c] = counts.tp[c] / union
        elif mode == "all":
            per_class[c] = 0.0
    denom = len(partition.classes) if mode == "all" else len(per_class)
    score = sum(per_class.values()) / denom
    return score, per_class


def class_histogram(grid: SemanticGrid, partition: ClassPartition) -> dict[int, int]:
    """Cell count per class id (labeled cells only; zero-count classes kept)."""
    labeled = grid.cells[grid.cells >= 0]
    values, counts = np.unique(labeled, return_counts=True)
    found = dict(zip(values.tolist(), counts.tolist()))
    return {c: found.get(c, 0) for c in sorted(partition.classes)}


@dataclass
class StudyConfig:
    input_map: ObstacleMap
    inpainted_map: ObstacleMap
    gt_map: ObstacleMap
    trials: int = 50
    seed: int = 0
    sensor: SensorModel = field(default_factory=SensorModel)
    start_mode: str = START_RANDOM
    start_cell: Optional[Cell] = None
    start_sigma: float = 5.0
    goal_mode: str = "random"

    def __post_init__(self):
        if not (self.input_map.spec == self.inpainted_map.spec == self.gt_map.spec):
            raise GridMismatchError("study maps must share one geometry")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.start_mode not in (START_RANDOM, START_FIXED):
            raise ValueError(f"unknown start mode {self.start_mode!r}")
        if self.start_mode == START_FIXED:
            if self.start_cell is None:
                raise ValueError("fixed_near_sensor start mode needs start_cell")
            if self.start_sigma <= 0:
                raise ValueError("start_sigma must be > 0")
        if self.goal_mode != "random":
            raise ValueError(f"unknown goal mode {self.goal_mode!r}")

    def variant_maps(self) -> dict[str, ObstacleMap]:
        return {
            "input": self.input_map,
            "inpainted": self.inpainted_map,
            "gt": self.gt_map,
        }


@dataclass
class TrialRecord:
    index: int
    start: Cell
    goal: Cell
    results: dict[str, TrialResult]
    observed_online: dict[str, list[Cell]]


@dataclass
class VariantStats:
    name: str
    reached: int
    no_path: int
    steps_mean: Optional[float]
    steps_std: Optional[float]
    replans_mean: Optional[float]
    replans_std: Optional[float]
    nopath_replans_mean: Optional[float]
    nopath_replans_std: Optional[float]


@dataclass
class StudyReport:
    trials: int
    seed: int
    sensor_radius: float
    stats: dict[str, VariantStats]
    records: list[TrialRecord]
    extra: dict = field(default_factory=dict)


def _draw_cell(rng: np.random.Generator, gt_occ: np.ndarray, config: StudyConfig, fixed: bool) -> Cell:
    height, width = gt_occ.shape
    for _ in range(_MAX_DRAWS):
        if fixed:
            raw = rng.normal(loc=config.start_cell, scale=config.start_sigma, size=2)
            r = int(np.floor(raw[0] + 0.5))
            c = int(np.floor(raw[1] + 0.5))
            if not (0 <= r < height and 0 <= c < width):
                continue
        else:
            r = int(rng.integers(0, height))
            c = int(rng.integers(0, width))
        if not gt_occ[r, c]:
            return (r, c)
    raise NoFreeCellsError(f"no free cell found after {_MAX_DRAWS} draws")


def _observed_online(initial: ObstacleMap, result: TrialResult) -> list[Cell]:
    new = result.belief_final.occupied & ~initial.occupied
    return [(int(r), int(c)) for r, c in np.argwhere(new)]


def _run_trial(config: StudyConfig, index: int) -> TrialRecord:
    rng = np.random.default_rng([config.seed, index])
    gt_occ = config.gt_map.occupied
    start = _draw_cell(rng, gt_occ, config, fixed=config.start_mode == START_FIXED)
    goal = _draw_cell(rng, gt_occ, config, fixed=False)
    results = {}
    observed = {}
    for name, initial in config.variant_maps().items():
        result = simulate(initial, config.gt_map, start, goal, config.sensor)
        results[name] = result
        observed[name] = _observed_online(initial, result)
    return TrialRecord(index, start, goal, results, observed)


def _variant_stats(name: str, results: list[TrialResult]) -> VariantStats:
    steps = [r.path_steps for r in results if r.outcome == OUTCOME_REACHED]
    replans = [r.replans for r in results if r.outcome == OUTCOME_REACHED]
    nopath = [r.replans for r in results if r.outcome == OUTCOME_NO_PATH]

    def mean_std(values):
        if not values:
            return None, None
        arr = np.asarray(values, dtype=np.float64)
        return float(arr.mean()), float(arr.std())  # population std

    steps_mean, steps_std = mean_std(steps)
    replans_mean, replans_std = mean_std(replans)
    nopath_mean, nopath_std = mean_std(nopath)
    return VariantStats(
        name=name,
        reached=len(steps),
        no_path=len(nopath),
        steps_mean=steps_mean,
        steps_std=steps_std,
        replans_mean=replans_mean,
        replans_std=replans_std,
        nopath_replans_mean=nopath_mean,
        nopath_replans_std=nopath_std,
    )


def run_study(config: StudyConfig, jobs: int = 1) -> StudyReport:
    """Run all trials and aggregate; reproducible from the seed and
    independent of ``jobs``."""
    if np.argwhere(~config.gt_map.occupied).shape[0] == 0:
        raise NoFreeCellsError("ground-truth map has no free cells")
    indices = range(config.trials)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(lambda i: _run_trial(config, i), indices))
    else:
        records = [_run_trial(config, i) for i in indices]

    stats = {
        name: _variant_stats(name, [rec.results[name] for rec in records])
        for name in VARIANT_NAMES
    }
    return StudyReport(
        trials=config.trials,
        seed=config.seed,
        sensor_radius=config.sensor.radius,
        stats=stats,
        records=records,
    )


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------


def _fmt(mean: Optional[float], std: Optional[float]) -> str:
    if mean is None:
        return "-"
    return f"{mean:.1f} ({std:.1f})"


def render_report_text(report: StudyReport) -> str:
    names = list(report.stats.keys())
    lines = [
        f"trials: {report.trials}  seed: {report.seed}  sensor-radius: {report.sensor_radius:g}",
        "",
    ]
    head = f"{'variant':<12}{'reached':>9}{'no-path':>9}"
    lines.append(head)
    for name in names:
        s = report.stats[name]
        lines.append(f"{name:<12}{s.reached:>9}{s.no_path:>9}")
    lines.append("")

    rows = [
        ("path steps", lambda s: _fmt(s.steps_mean, s.steps_std)),
        ("replans", lambda s: _fmt(s.replans_mean, s.replans_std)),
        ("replans (no path found)", lambda s: _fmt(s.nopath_replans_mean, s.nopath_replans_std)),
    ]
    width = 16
    header = f"{'metric':<26}" + "".join(f"| {n:<{width}}" for n in names)
    lines.append(header)
    for label, pick in rows:
        cells = "".join(f"| {pick(report.stats[n]):<{width}}" for n in names)
        lines.append(f"{label:<26}" + cells)
    return "\n".join(line.rstrip() for line in lines) + "\n"


def report_to_dict(report: StudyReport) -> dict:
    variants = {}
    for name, s in report.stats.items():
        variants[name] = {
            "reached": s.reached,
            "no_path": s.no_path,
            "path_steps": None
            if s.steps_mean is None
            else {"mean": s.steps_mean, "std": s.steps_std},
            "replans": None
            if s.replans_mean is None
            else {"mean": s.replans_mean, "std": s.replans_std},
            "replans_no_path": None
            if s.nopath_replans_mean is None
            else {"mean": s.nopath_replans_mean, "std": s.nopath_replans_std},
        }
    trials = []
    for rec in report.records:
        entry = {
            "trial": rec.index,
            "rng_seed": [report.seed, rec.index],
            "start": list(rec.start),
            "goal": list(rec.goal),
            "variants": {},
        }
        for name, result in rec.results.items():
            entry["variants"][name] = {
                "outcome": result.outcome,
                "path_steps": result.path_steps,
                "replans": result.replans,
                "executed": [list(c) for c in result.executed.cells],
                "observed_online": [list(c) for c in rec.observed_online[name]],
            }
        trials.append(entry)
    out = {
        "trials": report.trials,
        "seed": report.seed,
        "sensor_radius": report.sensor_radius,
        "variants": variants,
        "trial_ledger": trials,
    }
    out.update(report.extra)
    return out


def render_report(report: StudyReport, fmt: str = "text") -> str:
    if fmt == "text":
        return render_report_text(report)
    if fmt == "structured":
        return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


_FREE_COLOR = (255, 255, 255)
_OBSTACLE_COLOR = (0, 0, 0)
_OBSERVED_COLOR = (255, 0, 0)
_PATH_COLOR = (0, 0, 255)
_OVERLAP_COLOR = (0, 255, 0)


def render_trial_plot(
    initial_map: ObstacleMap,
    executed: list[Cell] | tuple[Cell, ...],
    observed_online: list[Cell],
) -> Image.Image:
    """Executed-path picture: obstacles black on white, online-discovered
    obstacles red, path blue, self-overlapping path cells green."""
    rgb = np.full((*initial_map.spec.shape, 3), 255, dtype=np.uint8)
    rgb[initial_map.occupied] = _OBSTACLE_COLOR
    for r, c in observed_online:
        rgb[r, c] = _OBSERVED_COLOR
    seen: set[Cell] = set()
    overlap: set[Cell] = set()
    for cell in executed:
        (overlap if cell in seen else seen).add(cell)
    for r, c in seen:
        rgb[r, c] = _PATH_COLOR
    for r, c in overlap:
        rgb[r, c] = _OVERLAP_COLOR
    return Image.fromarray(rgb, "RGB")
