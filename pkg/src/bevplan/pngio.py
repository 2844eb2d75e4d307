"""PNG encode/decode for grids, masks, and obstacle maps.

Color conventions: class cells use the partition palette, TO_INPAINT cells
are pure white, UNOBSERVED cells a fixed grey. Mask PNGs are greyscale
(white = fill, black = known); obstacle maps are greyscale (black =
obstacle, white = free). Grid geometry rides along in a PNG text chunk so
render -> load is lossless; files from external tools (no chunk) need the
geometry passed in explicitly.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo

from .bev import TO_INPAINT, UNOBSERVED, GridSpec, InpaintMask, ObstacleMap, SemanticGrid
from .errors import GridMismatchError, UnknownColorError
from .partition import TO_INPAINT_COLOR, UNOBSERVED_COLOR, ClassPartition

_SPEC_KEY = "grid-geometry"


def _png_info(spec: GridSpec) -> PngInfo:
    info = PngInfo()
    info.add_text(_SPEC_KEY, spec.to_json())
    return info


def _resolve_spec(img: Image.Image, spec: Optional[GridSpec]) -> GridSpec:
    if spec is not None:
        if (img.height, img.width) != spec.shape:
            raise GridMismatchError(
                f"image is {img.height}x{img.width}, expected {spec.shape[0]}x{spec.shape[1]}"
            )
        return spec
    text = img.info.get(_SPEC_KEY)
    if text is not None:
        return GridSpec.from_json(text)
    return GridSpec(width=img.width, height=img.height, cell_size=1.0)


def _color_table(partition: ClassPartition) -> list[tuple[tuple[int, int, int], int]]:
    """(color, state) pairs, classes in ascending id order, then the
    reserved colors; the order fixes quantization tie-breaking."""
    table = [(color, cid) for cid, color in sorted(partition.palette.items())]
    table.append((TO_INPAINT_COLOR, TO_INPAINT))
    table.append((UNOBSERVED_COLOR, UNOBSERVED))
    return table


def render_png(grid: SemanticGrid, path: str | Path, partition: ClassPartition) -> None:
    rgb = np.zeros((*grid.spec.shape, 3), dtype=np.uint8)
    rgb[grid.cells == UNOBSERVED] = UNOBSERVED_COLOR
    rgb[grid.cells == TO_INPAINT] = TO_INPAINT_COLOR
    for cid, color in partition.palette.items():
        rgb[grid.cells == cid] = color
    Image.fromarray(rgb, "RGB").save(path, pnginfo=_png_info(grid.spec))


def _decode_states(
    rgb: np.ndarray, partition: ClassPartition, quantize: bool
) -> tuple[np.ndarray, int]:
    keys = (
        rgb[:, :, 0].astype(np.int64) * 65536
        + rgb[:, :, 1].astype(np.int64) * 256
        + rgb[:, :, 2].astype(np.int64)
    )
    table = _color_table(partition)
    by_key = {c[0] * 65536 + c[1] * 256 + c[2]: state for c, state in table}
    cells = np.full(keys.shape, TO_INPAINT, dtype=np.int32)
    quantized = 0
    for key in np.unique(keys):
        where = keys == key
        state = by_key.get(int(key))
        if state is None:
            if not quantize:
                r, g, b = key >> 16, (key >> 8) & 255, key & 255
                raise UnknownColorError(f"pixel color ({r}, {g}, {b}) not in the palette")
            r, g, b = key >> 16, (key >> 8) & 255, key & 255
            best = None
            best_d = None
            for color, st in table:
                d = (color[0] - r) ** 2 + (color[1] - g) ** 2 + (color[2] - b) ** 2
                if best_d is None or d < best_d:
                    best_d = d
                    best = st
            state = best
            quantized += int(where.sum())
        cells[where] = state
    return cells, quantized


def load_png(
    path: str | Path, partition: ClassPartition, spec: Optional[GridSpec] = None
) -> SemanticGrid:
    """Strict decode: any off-palette pixel raises UnknownColorError."""
    with Image.open(path) as img:
        resolved = _resolve_spec(img, spec)
        rgb = np.asarray(img.convert("RGB"))
    cells, _ = _decode_states(rgb, partition, quantize=False)
    return SemanticGrid(resolved, cells)


def load_png_quantized(
    path: str | Path, partition: ClassPartition, spec: Optional[GridSpec] = None
) -> tuple[SemanticGrid, int]:
    """Decode mapping off-palette pixels to the nearest palette color by
    squared RGB distance; returns the quantized-pixel count."""
    with Image.open(path) as img:
        resolved = _resolve_spec(img, spec)
        rgb = np.asarray(img.convert("RGB"))
    cells, quantized = _decode_states(rgb, partition, quantize=True)
    return SemanticGrid(resolved, cells), quantized


def save_mask_png(mask: InpaintMask, path: str | Path) -> None:
    grey = np.where(mask.flags, 255, 0).astype(np.uint8)
    Image.fromarray(grey, "L").save(path, pnginfo=_png_info(mask.spec))


def load_mask_png(path: str | Path, spec: Optional[GridSpec] = None) -> InpaintMask:
    with Image.open(path) as img:
        resolved = _resolve_spec(img, spec)
        grey = np.asarray(img.convert("L"))
    bad = np.unique(grey[(grey != 0) & (grey != 255)])
    if bad.size:
        raise UnknownColorError(f"mask contains non-binary values {bad.tolist()[:8]}")
    return InpaintMask(resolved, grey == 255)


def save_obstacle_png(obstacle_map: ObstacleMap, path: str | Path) -> None:
    grey = np.where(obstacle_map.occupied, 0, 255).astype(np.uint8)
    Image.fromarray(grey, "L").save(path, pnginfo=_png_info(obstacle_map.spec))


def load_obstacle_png(path: str | Path, spec: Optional[GridSpec] = None) -> ObstacleMap:
    with Image.open(path) as img:
        resolved = _resolve_spec(img, spec)
        grey = np.asarray(img.convert("L"))
    bad = np.unique(grey[(grey != 0) & (grey != 255)])
    if bad.size:
        raise UnknownColorError(f"obstacle map contains non-binary values {bad.tolist()[:8]}")
    return ObstacleMap(resolved, grey == 0)
