"""Built-in fills and the external inpainter subprocess contract."""

import sys

import numpy as np
import pytest

from bevplan import InpainterChoice, external_inpaint, inpaint, iterative_majority_fill, nearest_class_fill
from bevplan.bev import TO_INPAINT, UNOBSERVED, InpaintMask
from bevplan.errors import ExternalInpaintError, IncompleteFillError, NoKnownCellsError
from bevplan import kernels

from conftest import BUILDING, ROAD, SIDEWALK, VEGETATION, grid_from, random_semantic_cells

U, T = UNOBSERVED, TO_INPAINT


def nearest_oracle(cells):
    """Brute-force all-pairs nearest-known fill, exact integer distances."""
    out = cells.copy()
    known = [(r, c, int(cells[r, c])) for r, c in zip(*np.nonzero(cells >= 0))]
    for r, c in zip(*np.nonzero(cells == T)):
        best = None
        for kr, kc, cls in known:
            d = (kr - r) ** 2 + (kc - c) ** 2
            if best is None or d < best[0] or (d == best[0] and cls < best[1]):
                best = (d, cls)
        out[r, c] = best[1]
    return out


class TestNearestFill:
    def test_zero_masked_identity(self):
        grid = grid_from([[ROAD, U], [BUILDING, ROAD]])
        assert nearest_class_fill(grid) == grid

    def test_single_known_cell_fills_all(self):
        grid = grid_from([[ROAD, T], [T, T]])
        out = nearest_class_fill(grid)
        assert (out.cells == ROAD).all()

    def test_equidistant_tie_lowest_id(self):
        grid = grid_from([[BUILDING, T, ROAD]])
        assert nearest_class_fill(grid).cells[0, 1] == min(ROAD, BUILDING)

    def test_no_known_cells(self):
        with pytest.raises(NoKnownCellsError):
            nearest_class_fill(grid_from([[T, U], [U, T]]))

    def test_matches_all_pairs_oracle(self):
        rng = np.random.default_rng(13)
        for _ in range(30):
            cells = random_semantic_cells(
                rng, 10, 10, [ROAD, SIDEWALK, BUILDING, VEGETATION], 0.3, 0.4
            )
            if not (cells >= 0).any():
                continue
            out = nearest_class_fill(grid_from(cells))
            assert np.array_equal(out.cells, nearest_oracle(cells))


class TestMajorityFill:
    def test_strict_majority(self):
        grid = grid_from(
            [
                [ROAD, ROAD, ROAD],
                [U, T, BUILDING],
                [U, U, U],
            ]
        )
        out = iterative_majority_fill(grid)
        assert out.cells[1, 1] == ROAD  # 3 road vs 1 building

    def test_wall_gap_closes(self):
        """Straight building wall with a masked 3-cell gap in unobserved
        surroundings: ends fill first (one known neighbor each), the middle
        follows the next pass."""
        cells = np.full((7, 11), U, dtype=np.int32)
        cells[3, 2:9] = BUILDING
        cells[3, 4:7] = T
        out = iterative_majority_fill(grid_from(cells))
        assert (out.cells[3, 2:9] == BUILDING).all()
        untouched = out.cells.copy()
        untouched[3, 4:7] = T
        assert np.array_equal(np.where(untouched == T, cells[:, :], untouched), cells)

    def test_gap_fill_pass_cascade(self):
        cells = np.full((7, 11), U, dtype=np.int32)
        cells[3, 2:9] = BUILDING
        cells[3, 4:7] = T
        _, passes, remaining = kernels.majority_fill_raw(cells, 1.0, 100)
        assert remaining == 0
        assert passes == 2  # ends, then middle

    def test_concentric_ring_becomes_building(self):
        cells = np.full((9, 9), U, dtype=np.int32)
        cells[3:6, 3:6] = BUILDING
        ring = np.zeros((9, 9), bool)
        ring[2:7, 2:7] = True
        ring[3:6, 3:6] = False
        cells[ring] = T
        out = iterative_majority_fill(grid_from(cells))
        assert (out.cells[ring] == BUILDING).all()

    def test_fill_depth_matches_bfs_oracle(self):
        """Known border, fully masked interior: a cell fills on the pass
        equal to its 8-neighborhood BFS depth from the border."""
        size = 12
        cells = np.full((size, size), ROAD, dtype=np.int32)
        cells[1:-1, 1:-1] = T
        expected_depth = np.zeros((size, size), dtype=int)
        for r in range(1, size - 1):
            for c in range(1, size - 1):
                expected_depth[r, c] = min(r, c, size - 1 - r, size - 1 - c)  # chebyshev
        max_depth = expected_depth.max()
        work = cells.copy()
        for depth in range(1, max_depth + 1):
            work, passes, _ = kernels.majority_fill_raw(work, 1.0, 1)
            assert passes == 1
            filled_now = (work >= 0) & (cells == T)
            assert np.array_equal(filled_now, (expected_depth <= depth) & (expected_depth > 0))
        assert (work >= 0).all()
        assert max_depth <= size + size  # default budget is generous

    def test_survivors_fall_back_to_nearest(self):
        # max_iters=1 leaves the middle of the gap unfilled; the fallback
        # must still complete the grid
        cells = np.full((7, 11), U, dtype=np.int32)
        cells[3, 2:9] = BUILDING
        cells[3, 4:7] = T
        out = iterative_majority_fill(grid_from(cells), max_iters=1)
        assert not (out.cells == T).any()
        assert (out.cells[3, 4:7] == BUILDING).all()

    def test_no_known_cells_anywhere(self):
        with pytest.raises(NoKnownCellsError):
            iterative_majority_fill(grid_from([[T, T], [U, T]]))


METHODS = [
    InpainterChoice(method="nearest"),
    InpainterChoice(method="majority"),
]


class TestInpaintContracts:
    @pytest.mark.parametrize("choice", METHODS, ids=lambda c: c.method)
    def test_identity_when_nothing_masked(self, choice):
        grid = grid_from([[ROAD, U], [BUILDING, VEGETATION]])
        assert inpaint(grid, choice) == grid

    @pytest.mark.parametrize("choice", METHODS, ids=lambda c: c.method)
    def test_unanimous_neighborhood(self, choice):
        cells = np.full((3, 3), ROAD, dtype=np.int32)
        cells[1, 1] = T
        out = inpaint(grid_from(cells), choice)
        assert out.cells[1, 1] == ROAD

    @pytest.mark.parametrize("choice", METHODS, ids=lambda c: c.method)
    def test_random_grids_hold_all_contracts(self, choice, partition):
        rng = np.random.default_rng(29)
        for _ in range(25):
            cells = random_semantic_cells(
                rng, 9, 9, [ROAD, SIDEWALK, BUILDING, VEGETATION], 0.25, 0.35
            )
            if not (cells >= 0).any():
                continue
            grid = grid_from(cells)
            out = inpaint(grid, choice)
            again = inpaint(grid, choice)
            # no masked cells left, unobserved survive, known cells bitwise
            # unchanged, filled values are real classes, deterministic
            assert not (out.cells == T).any()
            assert np.array_equal(out.cells == U, cells == U)
            keep = cells != T
            assert np.array_equal(out.cells[keep], cells[keep])
            filled = out.cells[cells == T]
            assert np.isin(filled, sorted(partition.classes)).all()
            assert out == again


STUB_FILL_ROAD = """
import sys
import numpy as np
from PIL import Image
img = np.asarray(Image.open(sys.argv[1]).convert("RGB")).copy()
img[(img == 255).all(axis=2)] = (255, 0, 255)
Image.fromarray(img, "RGB").save(sys.argv[3])
"""

STUB_COPY = """
import shutil, sys
shutil.copy(sys.argv[1], sys.argv[3])
"""

STUB_DRIFT = """
import sys
import numpy as np
from PIL import Image
img = np.asarray(Image.open(sys.argv[1]).convert("RGB")).copy()
img[(img == 255).all(axis=2)] = (255, 0, 255)
img[0, 0] = (75, 0, 75)  # repaint a known building cell as sidewalk
Image.fromarray(img, "RGB").save(sys.argv[3])
"""

STUB_OFF_PALETTE = """
import sys
import numpy as np
from PIL import Image
img = np.asarray(Image.open(sys.argv[1]).convert("RGB")).copy()
img[(img == 255).all(axis=2)] = (250, 3, 250)  # nearly road
Image.fromarray(img, "RGB").save(sys.argv[3])
"""

STUB_WRONG_SIZE = """
import sys
import numpy as np
from PIL import Image
Image.fromarray(np.zeros((2, 2, 3), dtype=np.uint8), "RGB").save(sys.argv[3])
"""

STUB_FAIL = """
import sys
sys.exit(3)
"""

STUB_NO_OUTPUT = """
pass
"""


def stub_command(tmp_path, code, name):
    script = tmp_path / f"{name}.py"
    script.write_text(code)
    return f"{sys.executable} {script} {{input}} {{mask}} {{output}}"


@pytest.fixture
def masked_grid():
    cells = np.full((4, 4), ROAD, dtype=np.int32)
    cells[0, 0] = BUILDING
    cells[1, 1] = T
    cells[2, 2] = T
    cells[3, 0] = U
    return grid_from(cells)


def grid_mask(grid):
    return InpaintMask(grid.spec, grid.cells == T)


class TestExternalInpaint:
    def test_stub_fills_white_with_road(self, partition, tmp_path, masked_grid):
        cmd = stub_command(tmp_path, STUB_FILL_ROAD, "fill")
        out, drift, quantized = external_inpaint(
            masked_grid, grid_mask(masked_grid), cmd, partition
        )
        assert out.cells[1, 1] == ROAD and out.cells[2, 2] == ROAD
        assert drift == 0 and quantized == 0
        assert out.cells[3, 0] == U
        assert out.cells[0, 0] == BUILDING

    def test_copy_utility_incomplete_fill(self, partition, tmp_path, masked_grid):
        cmd = stub_command(tmp_path, STUB_COPY, "copy")
        with pytest.raises(IncompleteFillError):
            external_inpaint(masked_grid, grid_mask(masked_grid), cmd, partition)

    def test_drifted_known_cell_restored_and_counted(self, partition, tmp_path, masked_grid):
        cmd = stub_command(tmp_path, STUB_DRIFT, "drift")
        out, drift, _ = external_inpaint(masked_grid, grid_mask(masked_grid), cmd, partition)
        assert drift == 1
        assert out.cells[0, 0] == BUILDING  # original restored

    def test_off_palette_pixels_quantized(self, partition, tmp_path, masked_grid):
        cmd = stub_command(tmp_path, STUB_OFF_PALETTE, "quant")
        out, _, quantized = external_inpaint(masked_grid, grid_mask(masked_grid), cmd, partition)
        assert quantized == 2
        assert out.cells[1, 1] == ROAD

    def test_wrong_dimensions(self, partition, tmp_path, masked_grid):
        cmd = stub_command(tmp_path, STUB_WRONG_SIZE, "size")
        with pytest.raises(ExternalInpaintError):
            external_inpaint(masked_grid, grid_mask(masked_grid), cmd, partition)

    def test_nonzero_exit(self, partition, tmp_path, masked_grid):
        cmd = stub_command(tmp_path, STUB_FAIL, "fail")
        with pytest.raises(ExternalInpaintError):
            external_inpaint(masked_grid, grid_mask(masked_grid), cmd, partition)

    def test_missing_output(self, partition, tmp_path, masked_grid):
        cmd = stub_command(tmp_path, STUB_NO_OUTPUT, "silent")
        with pytest.raises(ExternalInpaintError):
            external_inpaint(masked_grid, grid_mask(masked_grid), cmd, partition)

    def test_dispatch_through_inpaint(self, partition, tmp_path, masked_grid):
        cmd = stub_command(tmp_path, STUB_FILL_ROAD, "fill")
        choice = InpainterChoice(method="external", command=cmd)
        out = inpaint(masked_grid, choice, partition)
        assert not (out.cells == T).any()

    def test_template_validation(self):
        with pytest.raises(ValueError):
            InpainterChoice(method="external", command="tool {input} {output}")
        with pytest.raises(ValueError):
            InpainterChoice(method="external")
        with pytest.raises(ValueError):
            InpainterChoice(method="sorcery")
