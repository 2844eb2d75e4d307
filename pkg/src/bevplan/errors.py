"""Exception hierarchy.

``InputError`` covers problems with user-supplied files/arguments (CLI exit
code 3), ``PipelineError`` covers failures while processing (exit code 4).
"""


class BevplanError(Exception):
    pass


class InputError(BevplanError):
    pass


class PipelineError(BevplanError):
    pass


class MalformedFileError(InputError):
    """File size, layout, or schema does not match the documented format."""


class MismatchedCountsError(InputError):
    """Point and label files disagree on record count."""


class BehindCameraError(PipelineError):
    """Projected point has depth <= 0 and cannot land in the image."""


class UnknownClassError(InputError):
    """A class id is not part of the active class partition."""


class PaletteCollisionError(InputError):
    """Two classes share a render color, or a class uses a reserved color."""


class UnknownColorError(InputError):
    """A pixel color has no mapping back to a cell state."""


class GridMismatchError(InputError):
    """Two grids that must share a geometry do not."""


class BadFactorError(InputError):
    """Downsampling factor must be a positive integer."""


class NoKnownCellsError(InputError):
    """Grid contains no labeled cells to propagate from."""


class ExternalInpaintError(PipelineError):
    """External inpainter failed (nonzero exit, missing or invalid output)."""


class IncompleteFillError(PipelineError):
    """An inpainting method left cells unfilled; never passed silently."""


class StartBlockedError(InputError):
    """Planning start cell is an obstacle."""


class OutOfBoundsError(InputError):
    """Cell index outside the map."""


class NoFreeCellsError(InputError):
    """Could not draw a free cell from the map."""


class EmptyMaskError(InputError):
    """No cells to score inside the evaluation mask."""
