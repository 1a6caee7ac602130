"""Deterministic stand-in for the external image/text encoders.

Real deployments compute crop embeddings with a vision-language model and
query embeddings with its text tower; both are ingested data here. For
synthetic corpora this encoder maps an image region to the area-weighted
mixture of per-class centroid vectors (plus a background centroid and
bounded, reproducibly seeded noise), which preserves the geometry the
retrieval stage relies on: obstacle-dominated crops land near their class
centroid, full frames land near the background centroid.
"""

from __future__ import annotations

import zlib

import numpy as np


def orthonormal_centroids(count: int, dimension: int, seed: int) -> np.ndarray:
    """(count, dimension) exactly orthonormal rows from a seeded QR."""
    if count > dimension:
        raise ValueError(f"cannot fit {count} orthonormal vectors in dimension {dimension}")
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((dimension, count)))
    # fix signs so the result is unique for a given seed
    q = q * np.sign(np.diag(r))
    return q.T.copy()


def _key_int(video_id: str) -> int:
    return zlib.crc32(video_id.encode("utf-8"))


class ContentEncoder:
    """Embeds a box of a content map; content value 0 is background, value
    i+1 is obstacle class i."""

    def __init__(
        self,
        class_vectors: np.ndarray,  # (C, d) unit rows, ordered like the class list
        background_vector: np.ndarray,
        noise_scale: float = 0.0,
        seed: int = 0,
    ):
        self.class_vectors = np.asarray(class_vectors, dtype=np.float64)
        self.background_vector = np.asarray(background_vector, dtype=np.float64)
        if not 0.0 <= noise_scale < 1.0:
            raise ValueError("noise_scale must lie in [0, 1)")
        self.noise_scale = noise_scale
        self.seed = seed

    @property
    def dimension(self) -> int:
        return self.class_vectors.shape[1]

    def embed_box(
        self,
        content: np.ndarray,
        box: tuple[int, int, int, int],
        video_id: str,
        frame_index: int,
    ) -> np.ndarray:
        """Unit embedding of the (inclusive) box; deterministic in all
        arguments."""
        top, left, bottom, right = box
        patch = content[top : bottom + 1, left : right + 1]
        area = patch.size
        counts = np.bincount(patch.reshape(-1), minlength=self.class_vectors.shape[0] + 1)
        weights = counts / area
        mixture = weights[0] * self.background_vector
        for ci in range(self.class_vectors.shape[0]):
            if counts[ci + 1]:
                mixture = mixture + weights[ci + 1] * self.class_vectors[ci]
        v = mixture / np.linalg.norm(mixture)
        if self.noise_scale > 0.0:
            ss = np.random.SeedSequence(
                [self.seed, _key_int(video_id), frame_index, top, left, bottom, right]
            )
            rng = np.random.default_rng(ss)
            direction = rng.standard_normal(self.dimension)
            direction /= np.linalg.norm(direction)
            v = v + self.noise_scale * rng.random() * direction
            v = v / np.linalg.norm(v)
        return v.astype(np.float32)

    def noise_deviation_bound(self) -> float:
        """Worst-case cosine shift induced by the bounded noise."""
        s = self.noise_scale
        return 2.0 * s / (1.0 - s) if s > 0 else 0.0
