"""Clipped inverse-propensity weighting and the composed training loss.

The counterfactual term reweights per-sample losses on ground-truth
pairs by a clipped ratio of propensities under the generated and
ground-truth histograms, min(ratio, c). The total training objective is
the plain pose loss on a generated batch plus lambda_co times the
counterfactual term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .propensity import HistogramMap, propensity_batch

RATIO_DIRECTIONS = ("generated_over_gt", "gt_over_generated")
WEIGHT_SOURCES = ("gt_batch", "generated_batch")


@dataclass(frozen=True)
class CrmConfig:
    """Counterfactual risk minimization knobs.

    clip : the cIPS ceiling c
    ratio_direction : which propensity sits in the numerator;
        "generated_over_gt" is the printed form
    weight_source : whose 2D poses the weights are evaluated at;
        "gt_batch" evaluates each ground-truth sample's own pose,
        "generated_batch" pairs weights from a generated batch by index
    force_unit_weight : replace every weight with 1 (ablation control)
    """

    clip: float = 10.0
    ratio_direction: str = "generated_over_gt"
    weight_source: str = "gt_batch"
    force_unit_weight: bool = False

    def __post_init__(self):
        if self.clip <= 0:
            raise ConfigError(f"clip must be positive, got {self.clip}")
        if self.ratio_direction not in RATIO_DIRECTIONS:
            raise ConfigError(
                f"ratio_direction {self.ratio_direction!r} not in {RATIO_DIRECTIONS}"
            )
        if self.weight_source not in WEIGHT_SOURCES:
            raise ConfigError(
                f"weight_source {self.weight_source!r} not in {WEIGHT_SOURCES}"
            )


def cips_weight(
    pose2d: np.ndarray,
    hist_gt: HistogramMap,
    hist_gen: HistogramMap,
    cfg: CrmConfig,
) -> float:
    """Clipped propensity ratio for a single 2D pose."""
    return float(
        cips_weights(np.asarray(pose2d, dtype=np.float64)[None], hist_gt, hist_gen, cfg)[0]
    )


def cips_weights(
    poses2d: np.ndarray,
    hist_gt: HistogramMap,
    hist_gen: HistogramMap,
    cfg: CrmConfig,
) -> np.ndarray:
    """Clipped propensity ratios for (K, J, 2) poses; returns (K,)."""
    if cfg.force_unit_weight:
        return np.ones(np.asarray(poses2d).shape[0], dtype=np.float64)
    rho_gt = propensity_batch(poses2d, hist_gt)
    rho_gen = propensity_batch(poses2d, hist_gen)
    if cfg.ratio_direction == "generated_over_gt":
        ratio = rho_gen / rho_gt
    else:
        ratio = rho_gt / rho_gen
    return np.minimum(ratio, cfg.clip)


def pose_loss(predicted: np.ndarray, target: np.ndarray) -> float:
    """Mean squared coordinate error in mm^2 over all 3J coordinates."""
    predicted = np.asarray(predicted, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if predicted.shape != target.shape:
        raise DataError(
            f"shape mismatch: predicted {predicted.shape} vs target {target.shape}"
        )
    diff = predicted - target
    return float(np.mean(diff * diff))


def counterfactual_loss(
    batch2d: np.ndarray,
    predictions: np.ndarray,
    targets: np.ndarray,
    hist_gt: HistogramMap,
    hist_gen: HistogramMap,
    cfg: CrmConfig,
    weight_poses2d: np.ndarray | None = None,
) -> float:
    """Batch mean of weight_i * pose_loss_i over ground-truth samples.

    batch2d holds the 2D poses of the ground-truth batch. When
    cfg.weight_source is "generated_batch", weight_poses2d supplies the
    generated batch's 2D poses (same length) at which the weights are
    evaluated instead.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape[0] == 0:
        raise DataError("counterfactual loss over an empty batch")
    weights = resolve_weights(batch2d, hist_gt, hist_gen, cfg, weight_poses2d)
    per_sample = np.mean(
        (predictions - targets) ** 2, axis=tuple(range(1, predictions.ndim))
    )
    return float(np.mean(weights * per_sample))


def resolve_weights(
    batch2d: np.ndarray,
    hist_gt: HistogramMap,
    hist_gen: HistogramMap,
    cfg: CrmConfig,
    weight_poses2d: np.ndarray | None = None,
) -> np.ndarray:
    """Weights for a ground-truth batch under cfg, one per sample."""
    batch2d = np.asarray(batch2d, dtype=np.float64)
    if cfg.weight_source == "generated_batch" and not cfg.force_unit_weight:
        if weight_poses2d is None:
            raise DataError(
                "weight_source='generated_batch' needs weight_poses2d"
            )
        weight_poses2d = np.asarray(weight_poses2d, dtype=np.float64)
        if weight_poses2d.shape[0] != batch2d.shape[0]:
            raise DataError(
                f"weight pose count {weight_poses2d.shape[0]} does not match "
                f"batch size {batch2d.shape[0]}"
            )
        return cips_weights(weight_poses2d, hist_gt, hist_gen, cfg)
    return cips_weights(batch2d, hist_gt, hist_gen, cfg)


def total_loss(gen_batch_loss: float, co_loss: float, lambda_co: float = 1.0) -> float:
    """L = L_P + lambda_co * L_co."""
    return float(gen_batch_loss) + float(lambda_co) * float(co_loss)
