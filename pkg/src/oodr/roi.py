"""Drivable-area region of interest from road predictions."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import InputError


def road_mask_from_scores(q: np.ndarray, road_class_index: int) -> np.ndarray:
    """Pixels whose argmax class equals the road class.

    Ties resolve toward the lowest class index (np.argmax convention).
    """
    q = np.asarray(q)
    if q.ndim != 3:
        raise InputError(f"expected (H, W, K) score tensor, got shape {q.shape}")
    if not 0 <= road_class_index < q.shape[2]:
        raise InputError(f"road class index {road_class_index} out of range for K={q.shape[2]}")
    return q.argmax(axis=2) == road_class_index


def morphological_close(mask: np.ndarray, radius: int) -> np.ndarray:
    """Dilate then erode with a square structuring element of side 2*radius+1.

    Computed on the radius-padded plane (input is 0 out of bounds) so the
    erosion sees the true dilated halo; the result never extends beyond the
    frame, and closing stays extensive, increasing and idempotent.
    """
    mask = np.asarray(mask, dtype=bool)
    if radius < 0:
        raise InputError("radius must be >= 0")
    if radius == 0 or not mask.any():
        return mask.copy()
    se = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    padded = np.pad(mask, radius)
    dilated = ndimage.binary_dilation(padded, structure=se)
    eroded = ndimage.binary_erosion(dilated, structure=se, border_value=0)
    return eroded[radius:-radius, radius:-radius]


def apply_roi(ood: np.ndarray, roi: np.ndarray) -> np.ndarray:
    """Pixelwise AND of the OoD prediction with the region of interest."""
    ood = np.asarray(ood, dtype=bool)
    roi = np.asarray(roi, dtype=bool)
    if ood.shape != roi.shape:
        raise InputError(f"shape mismatch: ood {ood.shape} vs roi {roi.shape}")
    return ood & roi


def scaled_radius(width: int, base_radius: int = 15, base_width: int = 1024) -> int:
    """Default closing radius scaled proportionally with frame width."""
    return max(1, round(base_radius * width / base_width))
