"""
STGFormer Pose Lifter - Evaluation Metrics
P1 (MPJPE after root alignment), P2 (PA-MPJPE after per-frame Procrustes
alignment), PCK at 150mm and AUC over the 0..150mm grid, with a per-action
report. All inputs are numpy arrays in millimeters.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

import constants as C
from algorithms import procrustes_align as _procrustes
from errors import InvalidInputError, ShapeError

logger = logging.getLogger(__name__)


def _as_poses(pose, name: str) -> np.ndarray:
    pose = np.asarray(pose, dtype=np.float64)
    if pose.ndim < 2 or pose.shape[-1] != 3:
        raise ShapeError(f"{name}: expected [..., N, 3], got {pose.shape}")
    if not np.isfinite(pose).all():
        raise InvalidInputError(f"{name}: non-finite coordinates")
    return pose


def _check_pair(pred, gt, name: str) -> Tuple[np.ndarray, np.ndarray]:
    pred, gt = _as_poses(pred, name), _as_poses(gt, name)
    if pred.shape != gt.shape:
        raise ShapeError(f"{name}: prediction {pred.shape} != ground truth {gt.shape}")
    return pred, gt


def joint_errors(pred, gt) -> np.ndarray:
    """Euclidean distance per (t, n)."""
    pred, gt = _check_pair(pred, gt, "joint_errors")
    return np.linalg.norm(pred - gt, axis=-1)


def root_align(pose, root_index: int = C.ROOT_JOINT) -> np.ndarray:
    """Subtract the root joint from every joint, per frame."""
    pose = _as_poses(pose, "root_align")
    if not 0 <= root_index < pose.shape[-2]:
        raise ShapeError(f"root_align: root {root_index} outside [0, {pose.shape[-2]})")
    return pose - pose[..., root_index:root_index + 1, :]


def mpjpe(pred, gt) -> float:
    """Mean per-joint position error; inputs are expected to be root-aligned."""
    return float(np.mean(joint_errors(pred, gt)))


def procrustes_align(pred, gt) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-frame similarity alignment of ``pred`` onto ``gt``.

    Returns:
        (aligned, degenerate_mask); degenerate frames got translation only
    """
    pred, gt = _check_pair(pred, gt, "procrustes_align")
    return _procrustes(pred, gt)


def pa_mpjpe(pred, gt) -> float:
    aligned, _ = procrustes_align(pred, gt)
    return mpjpe(aligned, gt)


def pck(pred, gt, threshold_mm: float = C.PCK_THRESHOLD_MM) -> float:
    """Percentage of joints with error strictly below ``threshold_mm``."""
    return float(100.0 * np.mean(joint_errors(pred, gt) < threshold_mm))


def pck_curve(pred, gt, thresholds: Sequence[float] = C.AUC_THRESHOLDS_MM) -> List[float]:
    """PCK at each threshold; errors are computed once."""
    errors = joint_errors(pred, gt)
    return [float(100.0 * np.mean(errors < t)) for t in thresholds]


def auc(pred, gt, thresholds: Sequence[float] = C.AUC_THRESHOLDS_MM) -> float:
    """Mean of PCK/100 over the threshold grid."""
    return float(np.mean(pck_curve(pred, gt, thresholds)) / 100.0)


@dataclass
class EvalReport:
    """
    Evaluation summary in millimeters.

    Attributes:
        mpjpe_mm, pa_mpjpe_mm, pck_percent, auc: Overall metrics
        frames: Frames evaluated
        procrustes_fallbacks: Frames aligned by translation only
        per_action: label → {metric name → value}
    """
    mpjpe_mm: float
    pa_mpjpe_mm: float
    pck_percent: float
    auc: float
    frames: int = 0
    procrustes_fallbacks: int = 0
    per_action: Dict[str, Dict[str, float]] = field(default_factory=dict)

    def to_text(self) -> str:
        """key: value lines, then a per-action table sorted by label."""
        lines = [
            f"frames: {self.frames}",
            f"mpjpe_mm: {self.mpjpe_mm:.4f}",
            f"pa_mpjpe_mm: {self.pa_mpjpe_mm:.4f}",
            f"pck_percent: {self.pck_percent:.4f}",
            f"auc: {self.auc:.6f}",
            f"procrustes_fallbacks: {self.procrustes_fallbacks}",
        ]
        if self.per_action:
            lines.append("")
            lines.append(f"{'action':<16}{'mpjpe_mm':>12}{'pa_mpjpe_mm':>14}{'pck_percent':>14}{'auc':>10}")
            for label in sorted(self.per_action):
                row = self.per_action[label]
                lines.append(
                    f"{label:<16}{row['mpjpe_mm']:>12.4f}{row['pa_mpjpe_mm']:>14.4f}"
                    f"{row['pck_percent']:>14.4f}{row['auc']:>10.6f}"
                )
        return "\n".join(lines) + "\n"


def _summary(pred: np.ndarray, gt: np.ndarray, root_index: int) -> Tuple[Dict[str, float], int]:
    pred_r, gt_r = root_align(pred, root_index), root_align(gt, root_index)
    aligned, degenerate = procrustes_align(pred, gt)
    return {
        "mpjpe_mm": mpjpe(pred_r, gt_r),
        "pa_mpjpe_mm": mpjpe(aligned, gt),
        "pck_percent": pck(pred_r, gt_r),
        "auc": auc(pred_r, gt_r),
    }, int(np.sum(degenerate))


def evaluate_poses(
    pred,
    gt,
    labels: Optional[Sequence[str]] = None,
    root_index: int = C.ROOT_JOINT,
) -> EvalReport:
    """
    Full P1/P2/PCK/AUC report over a [T×N×3] sequence.

    PCK and AUC are computed on root-aligned poses like MPJPE.

    Args:
        pred: Predicted joints in mm
        gt: Ground-truth joints in mm
        labels: Optional action label per frame for the breakdown
        root_index: Root joint for P1 alignment

    Returns:
        EvalReport
    """
    pred, gt = _check_pair(pred, gt, "evaluate_poses")
    if pred.ndim == 2:
        pred, gt = pred[None], gt[None]
    if pred.shape[0] == 0:
        raise InvalidInputError("evaluate_poses: no frames")

    overall, fallbacks = _summary(pred, gt, root_index)
    per_action = {}
    if labels is not None:
        labels = np.asarray(list(labels))
        if labels.shape[0] != pred.shape[0]:
            raise ShapeError(f"evaluate_poses: {labels.shape[0]} labels for {pred.shape[0]} frames")
        for label in sorted(set(labels.tolist())):
            mask = labels == label
            per_action[label], _ = _summary(pred[mask], gt[mask], root_index)

    if fallbacks:
        logger.warning("%d frames fell back to translation-only alignment", fallbacks)
    return EvalReport(frames=pred.shape[0], procrustes_fallbacks=fallbacks, per_action=per_action, **overall)
