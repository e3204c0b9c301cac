"""Black-box adversarial patches for visible-infrared image pairs.

The package optimizes a circular patch (position and a small color cycle)
with differential evolution against a target model it can only query. The
same color cycle renders into both modalities through an affine grayscale
compression, so one genome perturbs visible and infrared inputs jointly.
Submodules: imagecore (image plumbing), patchcodec (genome rendering),
metrics (evaluation suite), deengine (the optimizer), targets (surrogate
and remote models), fitness (objective assembly), defenses, fixtures
(synthetic annotated pairs), attack (experiment orchestration), cli.
"""

from .attack import (
    ABLATIONS,
    SWEEP_PARAMETERS,
    AttackConfig,
    AttackResult,
    BatchResult,
    EvaluationContext,
    defense_csv,
    detector_csv,
    item_seed,
    load_batch_items,
    run_attack,
    run_batch,
    run_defend,
    run_sweep,
    save_attack_result,
    save_batch_result,
    sweep_csv,
    trajectory_csv,
)
from .deengine import DEConfig, Population, Trajectory, TrajectoryPoint, initialize, run, step
from .defenses import (
    DefenseConfig,
    apply_defense,
    attack_under_defense,
    detection_threshold,
    jpeg_compress,
    median_filter,
    mse_detect,
    quantization_table,
)
from .errors import (
    ConfigError,
    DimensionError,
    FeasibilityError,
    ImageFormatError,
    OracleError,
    ProtocolError,
    RemoteTimeoutError,
    VipatchError,
)
from .fitness import (
    FitnessConfig,
    FitnessReport,
    fitness_counting,
    fitness_fusion,
    fitness_segmentation,
    make_evaluator,
    make_fast_objective,
    stealth_score,
)
from .fixtures import (
    FixtureLayout,
    load_fixture_dir,
    load_points,
    make_fixture,
    render_point_density,
    write_fixture_dir,
)
from .imagecore import (
    ImagePair,
    byte_to_intensity,
    disk_mask,
    embed_patch,
    feasible_position_bounds,
    image_dims,
    intensity_to_byte,
    load_image,
    load_pair,
    save_image,
    to_grayscale,
    validate_image,
)
from .metrics import (
    METRIC_COLUMNS,
    MetricTable,
    cc,
    confusion_matrix,
    fusion_losses,
    game,
    metric_csv_header,
    metric_csv_row,
    miou,
    psnr,
    qabf,
    recall,
    rmse,
    sobel_magnitude,
    ssim,
    viff,
)
from .patchcodec import (
    CompressionParams,
    ParamVector,
    PatchGenome,
    apply,
    color_to_infrared,
    decode,
    encode,
    genome_from_record,
    genome_to_record,
    render_infrared,
    render_visible,
    vector_bounds,
)
from .targets import (
    RemoteEndpoint,
    RemoteModel,
    SurrogateCountingParams,
    TargetKind,
    make_model,
    remote_query,
    surrogate_count,
    surrogate_fuse,
    surrogate_segment,
)

__version__ = "0.1.0"

__all__ = [
    "ABLATIONS",
    "METRIC_COLUMNS",
    "SWEEP_PARAMETERS",
    "AttackConfig",
    "AttackResult",
    "BatchResult",
    "CompressionParams",
    "ConfigError",
    "DEConfig",
    "DefenseConfig",
    "DimensionError",
    "EvaluationContext",
    "FeasibilityError",
    "FitnessConfig",
    "FitnessReport",
    "FixtureLayout",
    "ImageFormatError",
    "ImagePair",
    "MetricTable",
    "OracleError",
    "ParamVector",
    "PatchGenome",
    "Population",
    "ProtocolError",
    "RemoteEndpoint",
    "RemoteModel",
    "RemoteTimeoutError",
    "SurrogateCountingParams",
    "TargetKind",
    "Trajectory",
    "TrajectoryPoint",
    "VipatchError",
    "apply",
    "apply_defense",
    "attack_under_defense",
    "byte_to_intensity",
    "cc",
    "color_to_infrared",
    "confusion_matrix",
    "decode",
    "defense_csv",
    "detection_threshold",
    "detector_csv",
    "disk_mask",
    "embed_patch",
    "encode",
    "feasible_position_bounds",
    "fitness_counting",
    "fitness_fusion",
    "fitness_segmentation",
    "fusion_losses",
    "game",
    "genome_from_record",
    "genome_to_record",
    "image_dims",
    "initialize",
    "intensity_to_byte",
    "item_seed",
    "jpeg_compress",
    "load_batch_items",
    "load_fixture_dir",
    "load_image",
    "load_pair",
    "load_points",
    "make_evaluator",
    "make_fast_objective",
    "make_fixture",
    "make_model",
    "median_filter",
    "metric_csv_header",
    "metric_csv_row",
    "miou",
    "mse_detect",
    "psnr",
    "qabf",
    "quantization_table",
    "recall",
    "remote_query",
    "render_infrared",
    "render_point_density",
    "render_visible",
    "rmse",
    "run",
    "run_attack",
    "run_batch",
    "run_defend",
    "run_sweep",
    "save_attack_result",
    "save_batch_result",
    "save_image",
    "ssim",
    "sobel_magnitude",
    "stealth_score",
    "step",
    "surrogate_count",
    "surrogate_fuse",
    "surrogate_segment",
    "sweep_csv",
    "to_grayscale",
    "trajectory_csv",
    "validate_image",
    "vector_bounds",
    "viff",
    "write_fixture_dir",
]
