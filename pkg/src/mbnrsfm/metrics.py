"""Evaluation metrics: 3D reconstruction error, segmentation error,
reprojection error.

The 3D error resolves the orthographic depth ambiguity with one global
z-sign flip for the whole run (never per frame); the segmentation error
takes the best bijection between estimated and ground-truth cluster ids.
"""

from __future__ import annotations

from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .scene import CameraMotion, project, validate_labels, validate_shapes

# Exhaustive assignment is cheap up to this many clusters; beyond it the
# Hungarian algorithm takes over.
_EXHAUSTIVE_CLUSTER_LIMIT = 8


def reconstruction_error(s_est, s_gt) -> float:
    """Mean per-frame relative Frobenius error, best global z-flip.

    Every ground-truth frame must have a positive norm.
    """
    est = validate_shapes(s_est, "estimated shapes")
    gt = validate_shapes(s_gt, "ground-truth shapes")
    if est.shape != gt.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {gt.shape}")
    frames = est.shape[0] // 3
    gt_frames = gt.reshape(frames, 3, -1)
    gt_norms = np.linalg.norm(gt_frames, axis=(1, 2))
    if np.any(gt_norms == 0):
        raise ValueError("ground truth has a zero-norm frame")
    best = np.inf
    for flip in (1.0, -1.0):
        flipped = est.copy()
        flipped[2::3] *= flip
        diff = (flipped - gt).reshape(frames, 3, -1)
        per_frame = np.linalg.norm(diff, axis=(1, 2)) / gt_norms
        best = min(best, float(per_frame.mean()))
    return best


def reconstruction_error_whole(s_est, s_gt) -> float:
    """Stacked-matrix relative error, best global z-flip (cross-check value)."""
    est = validate_shapes(s_est, "estimated shapes")
    gt = validate_shapes(s_gt, "ground-truth shapes")
    if est.shape != gt.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {gt.shape}")
    denom = np.linalg.norm(gt)
    if denom == 0:
        raise ValueError("ground truth is all zero")
    best = np.inf
    for flip in (1.0, -1.0):
        flipped = est.copy()
        flipped[2::3] *= flip
        best = min(best, float(np.linalg.norm(flipped - gt) / denom))
    return best


def segmentation_error(labels_est, labels_gt) -> float:
    """Fraction of misassigned points under the best id bijection."""
    est = validate_labels(labels_est)
    gt = validate_labels(labels_gt)
    if est.size != gt.size:
        raise ValueError(f"label count mismatch: {est.size} vs {gt.size}")
    _, est_c = np.unique(est, return_inverse=True)
    _, gt_c = np.unique(gt, return_inverse=True)
    k = int(max(est_c.max(), gt_c.max())) + 1
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (est_c, gt_c), 1)
    if k <= _EXHAUSTIVE_CLUSTER_LIMIT:
        best = max(
            confusion[list(perm), range(k)].sum()
            for perm in permutations(range(k))
        )
    else:
        rows, cols = linear_sum_assignment(-confusion)
        best = confusion[rows, cols].sum()
    return float(est.size - best) / est.size


def reprojection_error(w, camera: CameraMotion, shapes) -> float:
    """Relative orthographic reprojection residual ||W - R S||_F / ||W||_F."""
    w = np.asarray(w, dtype=float)
    denom = np.linalg.norm(w)
    if denom == 0:
        raise ValueError("measurement matrix is all zero")
    return float(np.linalg.norm(w - project(camera, shapes)) / denom)
