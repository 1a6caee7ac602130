"""Per-frame anomaly scoring.

Fuses mask-level predictions into pixel-wise class scores, scores each pixel
by how strongly every known class rejects it, and extracts candidate
out-of-distribution segments as connected components.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InputError

PROB_TOL = 1e-5


@dataclass
class MaskPredictionSet:
    """N soft masks with their class-probability vectors.

    masks: (N, H, W) float array, entries in [0, 1].
    class_probs: (N, K+1) float array; each row sums to 1 (last entry is the
    void class and is dropped at fusion time).
    """

    masks: np.ndarray
    class_probs: np.ndarray

    @property
    def num_pairs(self) -> int:
        return self.masks.shape[0]

    @property
    def num_known_classes(self) -> int:
        return self.class_probs.shape[1] - 1

    @classmethod
    def load(cls, masks_path, probs_path) -> "MaskPredictionSet":
        """Read the (N, H, W) masks and (N, K+1) probability tensors from
        corpus tensor files."""
        from .tensorfile import read_tensor

        return cls(read_tensor(masks_path), read_tensor(probs_path))

    def validate(self) -> None:
        if self.masks.ndim != 3:
            raise InputError(f"masks must be (N, H, W), got shape {self.masks.shape}")
        if self.class_probs.ndim != 2:
            raise InputError(f"class_probs must be (N, K+1), got shape {self.class_probs.shape}")
        if self.masks.shape[0] != self.class_probs.shape[0]:
            raise InputError(
                f"{self.masks.shape[0]} masks but {self.class_probs.shape[0]} probability vectors"
            )
        if self.class_probs.shape[1] < 2:
            raise InputError("class_probs needs at least one known class plus void")
        if not np.all(np.isfinite(self.masks)):
            raise InputError("masks contain non-finite values")
        if self.masks.size and (self.masks.min() < 0.0 or self.masks.max() > 1.0):
            raise InputError("mask entries must lie in [0, 1]")
        if not np.all(np.isfinite(self.class_probs)):
            raise InputError("class probabilities contain non-finite values")
        if self.class_probs.size and self.class_probs.min() < 0.0:
            raise InputError("class probabilities must be nonnegative")
        sums = self.class_probs.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > PROB_TOL)[0]
        if bad.size:
            raise InputError(
                f"probability vector {bad[0]} sums to {sums[bad[0]]:.7f}, not 1 within {PROB_TOL}"
            )


def fuse_masks(preds: MaskPredictionSet) -> np.ndarray:
    """Pixel-wise class scores q[h,w,k] = sum_i p_i(k) * m_i[h,w].

    Only the K known classes appear in the output; the void column is
    dropped. Accumulation is float64, storage float32.
    """
    preds.validate()
    known = preds.class_probs[:, :-1].astype(np.float64)
    q = np.einsum("nhw,nk->hwk", preds.masks.astype(np.float64), known)
    return q.astype(np.float32)


def rba_score(q: np.ndarray) -> np.ndarray:
    """Anomaly map: -sum_k tanh(q[h,w,k]). Values in [-K, 0]; closer to 0 is
    more anomalous (the pixel is rejected by every known class)."""
    q = np.asarray(q)
    if q.ndim != 3:
        raise InputError(f"expected (H, W, K) score tensor, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise InputError("score tensor contains non-finite values")
    if q.size and q.min() < 0:
        raise InputError("score tensor entries must be nonnegative")
    return (-np.tanh(q.astype(np.float64)).sum(axis=2)).astype(np.float32)


def threshold_anomaly(anomaly: np.ndarray, t: float) -> np.ndarray:
    """Binary mask of pixels whose anomaly value is >= t (inclusive)."""
    return np.asarray(anomaly) >= t


@dataclass
class SegmentInstance:
    """One 8-connected anomalous component in a single frame.

    bbox is the tight (top, left, bottom, right) box with inclusive
    coordinates; centroid is the mean of the pixel coordinates; the score
    statistics are over the component's anomaly values.
    """

    frame_index: int
    pixels: np.ndarray  # (n, 2) int32 (row, col), row-major sorted
    bbox: tuple[int, int, int, int]
    centroid: tuple[float, float]
    area: int
    mean_score: float
    max_score: float
    min_score: float
    std_score: float

    def local_mask(self) -> np.ndarray:
        """Boolean mask of the component inside its own bbox."""
        top, left, bottom, right = self.bbox
        m = np.zeros((bottom - top + 1, right - left + 1), dtype=bool)
        m[self.pixels[:, 0] - top, self.pixels[:, 1] - left] = True
        return m


_EIGHT = np.ones((3, 3), dtype=int)
_FOUR = ndimage.generate_binary_structure(2, 1)


def extract_components(
    mask: np.ndarray,
    scores: np.ndarray,
    frame_index: int = 0,
    connectivity: int = 8,
) -> list[SegmentInstance]:
    """Maximal connected components of `mask` with geometry and anomaly
    statistics from `scores`.

    Ordered by (top, left) of the bbox, ties broken by larger area.
    """
    mask = np.asarray(mask, dtype=bool)
    scores = np.asarray(scores)
    if mask.shape != scores.shape:
        raise InputError(f"mask shape {mask.shape} != score map shape {scores.shape}")
    if connectivity not in (4, 8):
        raise InputError("connectivity must be 4 or 8")
    labels, count = ndimage.label(mask, structure=_EIGHT if connectivity == 8 else _FOUR)
    segments = []
    for obj_slice, label in zip(ndimage.find_objects(labels), range(1, count + 1)):
        region = labels[obj_slice] == label
        rows, cols = np.nonzero(region)
        top = obj_slice[0].start
        left = obj_slice[1].start
        pixels = np.column_stack((rows + top, cols + left)).astype(np.int32)
        vals = scores[pixels[:, 0], pixels[:, 1]].astype(np.float64)
        segments.append(
            SegmentInstance(
                frame_index=frame_index,
                pixels=pixels,
                bbox=(top, left, int(pixels[:, 0].max()), int(pixels[:, 1].max())),
                centroid=(float(pixels[:, 0].mean()), float(pixels[:, 1].mean())),
                area=int(pixels.shape[0]),
                mean_score=float(vals.mean()),
                max_score=float(vals.max()),
                min_score=float(vals.min()),
                std_score=float(vals.std()),
            )
        )
    segments.sort(key=lambda s: (s.bbox[0], s.bbox[1], -s.area, s.bbox[2], s.bbox[3]))
    return segments
