"""Fill TO_INPAINT cells with class labels.

Built-in methods: nearest-class fill and iterative neighborhood-majority
fill. An external inpainter (e.g. a learned model) can be plugged in as a
subprocess taking ``<input.png> <mask.png> <output.png>``; its output is
validated and repaired against the known-cells-unchanged contract.
"""

from __future__ import annotations

import logging
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels, pngio
from .bev import TO_INPAINT, InpaintMask, SemanticGrid
from .errors import (
    ExternalInpaintError,
    IncompleteFillError,
    NoKnownCellsError,
    PipelineError,
)
from .partition import ClassPartition

log = logging.getLogger(__name__)

METHOD_NEAREST = "nearest"
METHOD_MAJORITY = "majority"
METHOD_EXTERNAL = "external"
_PLACEHOLDERS = ("{input}", "{mask}", "{output}")


@dataclass(frozen=True)
class InpainterChoice:
    method: str = METHOD_MAJORITY
    radius: int = 1
    max_iters: Optional[int] = None
    seed: int = 0
    command: Optional[str] = None

    def __post_init__(self):
        if self.method not in (METHOD_NEAREST, METHOD_MAJORITY, METHOD_EXTERNAL):
            raise ValueError(f"unknown inpaint method {self.method!r}")
        if self.radius < 1:
            raise ValueError("radius must be >= 1")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.method == METHOD_EXTERNAL:
            if not self.command:
                raise ValueError("external method needs a command template")
            missing = [p for p in _PLACEHOLDERS if p not in self.command]
            if missing:
                raise ValueError(f"command template missing placeholders {missing}")


def nearest_class_fill(grid: SemanticGrid) -> SemanticGrid:
    """Each masked cell takes the nearest labeled cell's class (euclidean
    cell distance, exact integer squares); ties pick the lowest class id."""
    masked_r, masked_c = np.nonzero(grid.cells == TO_INPAINT)
    if masked_r.size == 0:
        return SemanticGrid(grid.spec, grid.cells)
    known_r, known_c = np.nonzero(grid.cells >= 0)
    if known_r.size == 0:
        raise NoKnownCellsError("grid has no labeled cells to fill from")
    filled = kernels.nearest_fill_raw(
        known_r, known_c, grid.cells[known_r, known_c], masked_r, masked_c
    )
    cells = grid.cells.copy()
    cells.setflags(write=True)
    cells[masked_r, masked_c] = filled.astype(np.int32)
    return SemanticGrid(grid.spec, cells)


def iterative_majority_fill(
    grid: SemanticGrid,
    radius: int = 1,
    max_iters: Optional[int] = None,
    seed: int = 0,
) -> SemanticGrid:
    """Synchronous passes: each still-masked cell takes the majority class
    among labeled neighbors within ``radius``; count ties pick the lowest
    class id; cells with no labeled neighbor wait for a later pass.
    Survivors after ``max_iters`` (default width + height) fall back to
    nearest_class_fill. Deterministic; ``seed`` is accepted for interface
    parity with stochastic fills."""
    del seed
    if max_iters is None:
        max_iters = grid.spec.width + grid.spec.height
    cells, _, remaining = kernels.majority_fill_raw(grid.cells, float(radius), int(max_iters))
    out = SemanticGrid(grid.spec, cells.astype(np.int32))
    if remaining:
        out = nearest_class_fill(out)
    return out


def external_inpaint(
    grid: SemanticGrid,
    mask: InpaintMask,
    command: str,
    partition: ClassPartition,
    timeout: Optional[float] = None,
) -> tuple[SemanticGrid, int, int]:
    """Run an external inpainter and enforce its contract.

    Writes grid and mask PNGs to a fresh temp workspace, substitutes the
    paths into the command template, runs it, and reloads the output with
    off-palette pixels quantized to the nearest palette color. Known
    (non-masked) cells the tool repainted are restored to their originals.

    Returns (grid, drifted-known-cell count, quantized-pixel count).
    """
    with tempfile.TemporaryDirectory(prefix="bevplan-inpaint-") as workdir:
        in_path = str(Path(workdir) / "input.png")
        mask_path = str(Path(workdir) / "mask.png")
        out_path = str(Path(workdir) / "output.png")
        pngio.render_png(grid, in_path, partition)
        pngio.save_mask_png(mask, mask_path)
        argv = [
            tok.format(input=in_path, mask=mask_path, output=out_path)
            for tok in shlex.split(command)
        ]
        try:
            proc = subprocess.run(argv, capture_output=True, timeout=timeout)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise ExternalInpaintError(f"could not run {argv[0]!r}: {exc}") from exc
        if proc.returncode != 0:
            tail = proc.stderr.decode(errors="replace").strip().splitlines()[-1:] or [""]
            raise ExternalInpaintError(
                f"{argv[0]!r} exited with {proc.returncode}: {tail[0]}"
            )
        if not Path(out_path).exists():
            raise ExternalInpaintError(f"{argv[0]!r} produced no output file")
        try:
            result, quantized = pngio.load_png_quantized(out_path, partition, spec=grid.spec)
        except Exception as exc:
            raise ExternalInpaintError(f"invalid output image: {exc}") from exc

    known = grid.cells != TO_INPAINT
    drift = int((result.cells[known] != grid.cells[known]).sum())
    cells = result.cells.copy()
    cells.setflags(write=True)
    cells[known] = grid.cells[known]
    masked = grid.cells == TO_INPAINT
    unfilled = int((cells[masked] < 0).sum())
    if unfilled:
        raise IncompleteFillError(f"{unfilled} masked cells not filled with a class")
    if drift:
        log.warning("external inpainter repainted %d known cells; restored", drift)
    if quantized:
        log.warning("quantized %d off-palette pixels to the nearest palette color", quantized)
    return SemanticGrid(grid.spec, cells), drift, quantized


def inpaint(
    grid: SemanticGrid,
    choice: InpainterChoice,
    partition: Optional[ClassPartition] = None,
) -> SemanticGrid:
    """Fill every TO_INPAINT cell; all other cells pass through bitwise.

    Raises IncompleteFillError if a method leaves masked cells (internal
    bug or external-tool contract violation, never passed silently).
    """
    if choice.method == METHOD_NEAREST:
        out = nearest_class_fill(grid)
    elif choice.method == METHOD_MAJORITY:
        out = iterative_majority_fill(grid, choice.radius, choice.max_iters, choice.seed)
    else:
        if partition is None:
            raise ValueError("external inpainting needs a class partition for PNG i/o")
        mask = InpaintMask(grid.spec, grid.cells == TO_INPAINT)
        out, _, _ = external_inpaint(grid, mask, choice.command, partition)
    remaining = int((out.cells == TO_INPAINT).sum())
    if remaining:
        raise IncompleteFillError(f"{remaining} cells still marked for inpainting")
    known = grid.cells != TO_INPAINT
    if (out.cells[known] != grid.cells[known]).any():
        raise PipelineError("inpainting modified known cells")
    return out
