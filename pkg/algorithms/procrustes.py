"""
Orthogonal Procrustes alignment with uniform scale

Time Complexity: O(T · N) for the covariances plus T SVDs of 3×3 matrices
Space Complexity: O(T · N)

Finds, per frame, the similarity transform s·R·x + t (rotation, uniform scale,
translation) that brings a predicted point set closest to a ground-truth set
in the least-squares sense. The rotation comes from the SVD of the cross-
covariance with a determinant correction, so reflections are never returned.
"""

from typing import Tuple

import numpy as np

# Relative singular-value threshold below which a frame counts as rank deficient
RANK_TOL = 1e-9


def procrustes_align(pred: np.ndarray, gt: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Align every frame of ``pred`` onto ``gt`` by a similarity transform.

    Args:
        pred: Predicted joints [T×N×3] (or a single frame [N×3])
        gt: Ground-truth joints, same shape

    Returns:
        (aligned, degenerate) where ``aligned`` has the shape of ``pred`` and
        ``degenerate`` is a boolean [T] mask of frames that fell back to
        translation-only alignment (fewer than 3 joints, a collapsed
        prediction, or a rank-deficient cross-covariance)
    """
    single = pred.ndim == 2
    if single:
        pred, gt = pred[None], gt[None]
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)

    mu_pred = pred.mean(axis=1, keepdims=True)
    mu_gt = gt.mean(axis=1, keepdims=True)
    x_pred = pred - mu_pred
    x_gt = gt - mu_gt

    # Cross-covariance per frame [T×3×3]; maximize trace(R K)
    k = np.einsum('tni,tnj->tij', x_pred, x_gt)
    u, s, vt = np.linalg.svd(k)
    v = np.swapaxes(vt, 1, 2)

    # Flip the weakest direction when U·Vᵀ would be a reflection
    sign = np.sign(np.linalg.det(np.einsum('tij,tkj->tik', v, u)))
    sign[sign == 0] = 1.0
    z = np.tile(np.eye(3), (pred.shape[0], 1, 1))
    z[:, 2, 2] = sign
    rot = np.einsum('tij,tjk,tlk->til', v, z, u)

    var_pred = np.sum(x_pred ** 2, axis=(1, 2))
    trace = np.einsum('tij,tji->t', rot, k)

    degenerate = (
        (pred.shape[1] < 3)
        | (var_pred <= RANK_TOL * np.maximum(np.sum(x_gt ** 2, axis=(1, 2)), 1.0))
        | (s[:, 1] <= RANK_TOL * np.maximum(s[:, 0], 1e-300))
    )
    scale = np.where(degenerate, 1.0, trace / np.where(var_pred > 0, var_pred, 1.0))
    rot[degenerate] = np.eye(3)

    aligned = scale[:, None, None] * np.einsum('tij,tnj->tni', rot, x_pred) + mu_gt
    if single:
        return aligned[0], degenerate
    return aligned, degenerate
