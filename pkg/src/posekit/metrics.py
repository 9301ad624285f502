"""Evaluation metrics for root-relative 3D poses.

All distances are millimetres. MPJPE averages per-joint Euclidean
errors; P-MPJPE first aligns the prediction to the target with the
closed-form similarity transform (rotation + translation + uniform
scale, reflections excluded); PCK counts joints within a threshold and
AUC averages PCK over a 0..150 mm grid in 5 mm steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError

PCK_THRESHOLD_MM = 150.0
AUC_THRESHOLDS_MM = np.arange(0.0, 150.0 + 2.5, 5.0)  # 0, 5, ..., 150


def mpjpe(predicted: np.ndarray, target: np.ndarray) -> float:
    """Mean per-joint position error of one pose pair, in mm."""
    predicted = np.asarray(predicted, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if predicted.shape != target.shape:
        raise ValueError(
            f"shape mismatch: {predicted.shape} vs {target.shape}"
        )
    return float(np.mean(np.linalg.norm(predicted - target, axis=-1)))


def similarity_align(predicted: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Best-fit similarity transform of predicted onto target.

    Solves min over (s, R, t) of sum |s R p_i + t - g_i|^2 with R a
    proper rotation, via SVD of the cross-covariance with the usual
    sign correction on the smallest singular direction.
    """
    p = np.asarray(predicted, dtype=np.float64)
    g = np.asarray(target, dtype=np.float64)
    if p.shape != g.shape or p.ndim != 2 or p.shape[1] != 3:
        raise ValueError(f"expected matching (J, 3) arrays, got {p.shape} and {g.shape}")
    n = p.shape[0]
    mu_p = p.mean(axis=0)
    mu_g = g.mean(axis=0)
    pc = p - mu_p
    gc = g - mu_g
    var_p = np.einsum("ij,ij->", pc, pc) / n
    if var_p < 1e-18:
        raise AlignmentError("prediction has zero spread; scale is undefined")
    cov = gc.T @ pc / n
    u, d, vt = np.linalg.svd(cov)
    if np.sum(d > d[0] * 1e-12) < 2:
        raise AlignmentError(
            "joint configuration is rank-deficient; rotation is undefined"
        )
    s = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s[2, 2] = -1.0
    rot = u @ s @ vt
    scale = np.trace(np.diag(d) @ s) / var_p
    t = mu_g - scale * rot @ mu_p
    return scale * p @ rot.T + t


def p_mpjpe(predicted: np.ndarray, target: np.ndarray) -> float:
    """MPJPE after similarity alignment of the prediction."""
    return mpjpe(similarity_align(predicted, target), target)


def _joint_errors(predicted: np.ndarray, target: np.ndarray) -> np.ndarray:
    predicted = np.asarray(predicted, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if predicted.shape != target.shape:
        raise ValueError(
            f"shape mismatch: {predicted.shape} vs {target.shape}"
        )
    return np.linalg.norm(predicted - target, axis=-1).reshape(-1)


def pck(
    predicted: np.ndarray, target: np.ndarray, threshold: float = PCK_THRESHOLD_MM
) -> float:
    """Percentage of joints with error <= threshold, over all poses."""
    errors = _joint_errors(predicted, target)
    return float(100.0 * np.mean(errors <= threshold))


def auc(predicted: np.ndarray, target: np.ndarray) -> float:
    """Mean PCK over thresholds 0..150 mm in 5 mm steps."""
    errors = _joint_errors(predicted, target)
    return float(
        np.mean([100.0 * np.mean(errors <= t) for t in AUC_THRESHOLDS_MM])
    )


@dataclass
class EvalReport:
    mpjpe: float
    p_mpjpe: float
    pck: float
    auc: float
    sample_count: int
    per_action: dict[str, dict] = field(default_factory=dict)

    def __post_init__(self):
        if self.p_mpjpe > self.mpjpe + 1e-9:
            raise AlignmentError(
                f"aligned error {self.p_mpjpe:.6f} exceeds unaligned "
                f"{self.mpjpe:.6f}; alignment is broken"
            )

    def to_json_dict(self) -> dict:
        return {
            "mpjpe_mm": self.mpjpe,
            "p_mpjpe_mm": self.p_mpjpe,
            "pck_percent": self.pck,
            "auc_percent": self.auc,
            "sample_count": self.sample_count,
            "per_action": self.per_action,
        }

    def table(self) -> str:
        rows = [("all", self.mpjpe, self.p_mpjpe, self.pck, self.auc, self.sample_count)]
        for action in sorted(self.per_action):
            entry = self.per_action[action]
            rows.append(
                (
                    action,
                    entry["mpjpe_mm"],
                    entry["p_mpjpe_mm"],
                    entry["pck_percent"],
                    entry["auc_percent"],
                    entry["sample_count"],
                )
            )
        width = max(len(r[0]) for r in rows)
        lines = [
            f"{'subset':<{width}}  {'mpjpe':>9}  {'p-mpjpe':>9}  {'pck':>7}  {'auc':>7}  {'n':>7}"
        ]
        for name, e1, e2, p, a, n in rows:
            lines.append(
                f"{name:<{width}}  {e1:9.2f}  {e2:9.2f}  {p:7.2f}  {a:7.2f}  {n:7d}"
            )
        return "\n".join(lines)


def evaluate(
    predicted: np.ndarray,
    target: np.ndarray,
    actions: list[str] | None = None,
    root_index: int = 0,
) -> EvalReport:
    """Aggregate metrics over (K, J, 3) batches.

    Both inputs are root-centered here before any metric is computed;
    MPJPE is translation-sensitive, so nothing downstream sees absolute
    coordinates.
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if predicted.shape != target.shape or predicted.ndim != 3:
        raise ValueError(
            f"expected matching (K, J, 3) batches, got {predicted.shape} and {target.shape}"
        )
    predicted = predicted - predicted[:, root_index : root_index + 1, :]
    target = target - target[:, root_index : root_index + 1, :]
    assert np.all(predicted[:, root_index] == 0.0)
    assert np.all(target[:, root_index] == 0.0)

    def metrics_of(pred, tgt):
        per_pose_mpjpe = np.mean(np.linalg.norm(pred - tgt, axis=-1), axis=-1)
        aligned = np.stack(
            [similarity_align(p, t) for p, t in zip(pred, tgt)]
        )
        per_pose_pa = np.mean(np.linalg.norm(aligned - tgt, axis=-1), axis=-1)
        return {
            "mpjpe_mm": float(per_pose_mpjpe.mean()),
            "p_mpjpe_mm": float(per_pose_pa.mean()),
            "pck_percent": pck(pred, tgt),
            "auc_percent": auc(pred, tgt),
            "sample_count": pred.shape[0],
        }

    overall = metrics_of(predicted, target)
    per_action: dict[str, dict] = {}
    if actions is not None:
        if len(actions) != predicted.shape[0]:
            raise ValueError(
                f"{len(actions)} action labels for {predicted.shape[0]} poses"
            )
        labels = np.asarray(actions)
        for action in sorted(set(actions)):
            mask = labels == action
            per_action[action] = metrics_of(predicted[mask], target[mask])
    return EvalReport(
        mpjpe=overall["mpjpe_mm"],
        p_mpjpe=overall["p_mpjpe_mm"],
        pck=overall["pck_percent"],
        auc=overall["auc_percent"],
        sample_count=overall["sample_count"],
        per_action=per_action,
    )
