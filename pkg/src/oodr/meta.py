"""Segment-level false-positive removal.

A logistic regression over hand-crafted per-segment features predicts
whether a detected segment is a true obstacle; segments below the cutoff
are dropped, no ground truth needed at run time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .scoring import SegmentInstance

FEATURE_NAMES = (
    "area",
    "mean_score",
    "std_score",
    "min_score",
    "max_score",
    "centroid_x_norm",
    "centroid_y_norm",
    "bbox_aspect",
    "boundary_interior_ratio",
    "fill_ratio",
)


def compute_features(seg: SegmentInstance, anomaly: np.ndarray) -> np.ndarray:
    """10-feature vector for one segment (see FEATURE_NAMES).

    Normalized centroids use the pixel-center convention ((coord + 0.5) / dim).
    Interior pixels are those whose full 8-neighborhood lies inside the
    segment; the boundary/interior ratio is 1.0 when there is no interior
    (or the interior mean is exactly zero).
    """
    anomaly = np.asarray(anomaly)
    h, w = anomaly.shape
    px = seg.pixels
    if px[:, 0].min() < 0 or px[:, 1].min() < 0 or px[:, 0].max() >= h or px[:, 1].max() >= w:
        raise InputError("segment pixels fall outside the anomaly map")
    top, left, bottom, right = seg.bbox
    box_h = bottom - top + 1
    box_w = right - left + 1

    local = seg.local_mask()
    # interior = erosion of the local mask by the full 8-neighborhood
    padded = np.pad(local, 1)
    interior = np.ones_like(local)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            interior &= padded[1 + dr : 1 + dr + box_h, 1 + dc : 1 + dc + box_w]
    boundary = local & ~interior

    vals = np.zeros((box_h, box_w), dtype=np.float64)
    vals[px[:, 0] - top, px[:, 1] - left] = anomaly[px[:, 0], px[:, 1]]
    if interior.any():
        interior_mean = vals[interior].mean()
        ratio = 1.0 if interior_mean == 0.0 else vals[boundary].mean() / interior_mean
    else:
        ratio = 1.0

    return np.array(
        [
            float(seg.area),
            seg.mean_score,
            seg.std_score,
            seg.min_score,
            seg.max_score,
            (seg.centroid[1] + 0.5) / w,
            (seg.centroid[0] + 0.5) / h,
            box_w / box_h,
            ratio,
            seg.area / (box_h * box_w),
        ],
        dtype=np.float64,
    )


@dataclass
class MetaModel:
    weights: np.ndarray
    bias: float
    feature_means: np.ndarray
    feature_stds: np.ndarray
    cutoff: float = 0.5
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        """P(true positive) for feature rows."""
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if features.shape[1] != self.weights.shape[0]:
            raise InputError(
                f"model expects {self.weights.shape[0]} features, got {features.shape[1]}"
            )
        z = (features - self.feature_means) / self.feature_stds @ self.weights + self.bias
        return _sigmoid(z)

    def save(self, path: str | Path) -> None:
        doc = {
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "feature_means": self.feature_means.tolist(),
            "feature_stds": self.feature_stds.tolist(),
            "cutoff": self.cutoff,
            "feature_names": list(self.feature_names),
        }
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "MetaModel":
        doc = json.loads(Path(path).read_text())
        names = tuple(doc["feature_names"])
        model = cls(
            weights=np.asarray(doc["weights"], dtype=np.float64),
            bias=float(doc["bias"]),
            feature_means=np.asarray(doc["feature_means"], dtype=np.float64),
            feature_stds=np.asarray(doc["feature_stds"], dtype=np.float64),
            cutoff=float(doc["cutoff"]),
            feature_names=names,
        )
        if not (len(names) == model.weights.shape[0] == model.feature_means.shape[0]):
            raise InputError("meta model dimensions disagree with its feature-name list")
        return model


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def train_meta(
    features: np.ndarray,
    labels: np.ndarray,
    l2: float = 1e-3,
    learning_rate: float = 0.1,
    max_iter: int = 2000,
    grad_tol: float = 1e-6,
    cutoff: float = 0.5,
) -> MetaModel:
    """Fit the logistic regression by full-batch gradient descent.

    Features are standardized first (zero-variance columns get std 1, so
    their weights stay at 0). Loss = mean cross-entropy + l2/2 * |w|^2;
    stops after max_iter steps or when the gradient norm drops below
    grad_tol. Labels: 1 = true positive (keep), 0 = false positive.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise InputError(f"feature matrix {X.shape} does not match {y.shape[0]} labels")
    if not np.any(y == 1):
        raise InputError("training set contains no TP (label 1) examples")
    if not np.any(y == 0):
        raise InputError("training set contains no FP (label 0) examples")

    means = X.mean(axis=0)
    stds = X.std(axis=0)
    # constant columns: std 1, weight pinned to 0 by zeroing the column
    constant = stds <= 1e-9 * np.maximum(1.0, np.abs(means))
    stds[constant] = 1.0
    Xs = (X - means) / stds
    Xs[:, constant] = 0.0

    n, d = Xs.shape
    w = np.zeros(d)
    b = 0.0
    for _ in range(max_iter):
        p = _sigmoid(Xs @ w + b)
        resid = p - y
        grad_w = Xs.T @ resid / n + l2 * w
        grad_b = resid.mean()
        if np.sqrt(grad_w @ grad_w + grad_b * grad_b) < grad_tol:
            break
        w -= learning_rate * grad_w
        b -= learning_rate * grad_b

    return MetaModel(weights=w, bias=b, feature_means=means, feature_stds=stds, cutoff=cutoff)


def meta_loss_and_grad(
    w: np.ndarray, b: float, Xs: np.ndarray, y: np.ndarray, l2: float = 1e-3
) -> tuple[float, np.ndarray, float]:
    """Training objective and its gradient on already-standardized features.

    Exposed so the gradient can be checked against finite differences.
    """
    n = Xs.shape[0]
    z = Xs @ w + b
    # log(1 + e^z) - y z, computed stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))
    p = _sigmoid(z)
    grad_w = Xs.T @ (p - y) / n + l2 * w
    grad_b = float((p - y).mean())
    return loss, grad_w, grad_b


def filter_segments(
    segments: list[SegmentInstance],
    anomaly: np.ndarray,
    model: MetaModel,
) -> list[SegmentInstance]:
    """Segments whose predicted TP probability is >= the model cutoff,
    in input order."""
    if not segments:
        return []
    feats = np.stack([compute_features(s, anomaly) for s in segments])
    keep = model.predict_proba(feats) >= model.cutoff
    return [s for s, k in zip(segments, keep) if k]
