"""Pose synthesis and counterfactually reweighted 2D-to-3D lifting."""

from .camera import CameraIntrinsics, make_pairs, project
from .config import PipelineConfig, apply_seed, config_from_dict, load_config
from .crm import CrmConfig, cips_weight, cips_weights, counterfactual_loss, pose_loss, total_loss
from .errors import (
    ConfigError,
    DataError,
    NumericalError,
    PosekitError,
    TrainingDivergedError,
)
from .estimator import (
    EstimatorModel,
    TrainConfig,
    TrainResult,
    init_model,
    normalization_scale,
    normalize_input,
    predict_batch,
    train,
)
from .kinematics import (
    bone_rotation,
    chain_transform,
    forward_kinematics,
    forward_kinematics_batch,
    inverse_kinematics_batch,
    rotation_x,
    rotation_y,
    rotation_z,
)
from .metrics import EvalReport, auc, evaluate, mpjpe, p_mpjpe, pck, similarity_align
from .posegen import (
    AngleRangeProfile,
    BoneLengthTemplates,
    GeneratorConfig,
    extract_ranges,
    extract_templates,
    generate_dataset,
    generate_sequence,
    interpolate,
    sample_keyframes,
    sequence_angles,
    subsample_seeds,
)
from .propensity import (
    HistogramMap,
    build_gt_histogram,
    build_histogram,
    propensity,
    propensity_batch,
)
from .skeleton import SkeletonTopology, default_topology

__version__ = "0.1.0"

__all__ = [
    "AngleRangeProfile",
    "BoneLengthTemplates",
    "CameraIntrinsics",
    "ConfigError",
    "CrmConfig",
    "DataError",
    "EstimatorModel",
    "EvalReport",
    "GeneratorConfig",
    "HistogramMap",
    "NumericalError",
    "PipelineConfig",
    "PosekitError",
    "SkeletonTopology",
    "TrainConfig",
    "TrainResult",
    "TrainingDivergedError",
    "apply_seed",
    "auc",
    "bone_rotation",
    "build_gt_histogram",
    "build_histogram",
    "chain_transform",
    "cips_weight",
    "cips_weights",
    "config_from_dict",
    "counterfactual_loss",
    "default_topology",
    "evaluate",
    "extract_ranges",
    "extract_templates",
    "forward_kinematics",
    "forward_kinematics_batch",
    "generate_dataset",
    "generate_sequence",
    "init_model",
    "interpolate",
    "inverse_kinematics_batch",
    "load_config",
    "make_pairs",
    "mpjpe",
    "normalization_scale",
    "normalize_input",
    "p_mpjpe",
    "pck",
    "pose_loss",
    "predict_batch",
    "project",
    "propensity",
    "propensity_batch",
    "rotation_x",
    "rotation_y",
    "rotation_z",
    "sample_keyframes",
    "sequence_angles",
    "similarity_align",
    "subsample_seeds",
    "total_loss",
    "train",
]
