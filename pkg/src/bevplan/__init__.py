"""bevplan: BEV semantic maps, inpainting, and occlusion-aware planning."""

from .bev import (
    TO_INPAINT,
    UNOBSERVED,
    GridSpec,
    InpaintMask,
    ObstacleMap,
    SemanticGrid,
    apply_mask,
    build_training_pair,
    default_grid_spec,
    downsample,
    hull_mask,
    rasterize_bev,
    to_obstacle_map,
)
from .evaluate import (
    ConfusionCounts,
    StudyConfig,
    StudyReport,
    class_histogram,
    confusion_counts,
    miou,
    render_report,
    run_study,
)
from .ingest import (
    CalibrationSet,
    ImagePoint,
    LabeledCloud,
    frustum_filter,
    load_calibration,
    load_cloud,
    project_point,
    project_points,
    save_cloud,
    strip_dynamic,
)
from .inpaint import InpainterChoice, external_inpaint, inpaint, iterative_majority_fill, nearest_class_fill
from .partition import ClassPartition, default_partition, load_partition, save_partition
from .planner import (
    OUTCOME_NO_PATH,
    OUTCOME_REACHED,
    Path,
    SensorModel,
    TrialResult,
    astar,
    reveal,
    simulate,
)
from .pngio import (
    load_mask_png,
    load_obstacle_png,
    load_png,
    load_png_quantized,
    render_png,
    save_mask_png,
    save_obstacle_png,
)

__version__ = "0.1.0"
