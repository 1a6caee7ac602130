"""Exact-scan embedding index over obstacle sequences.

Stores every crop vector of every ingested sequence with cached norms; a
query scores each sequence by the maximum per-crop cosine similarity and
returns everything at or above the threshold. The scan is exact by design
(the threshold semantics are part of the retrieval contract), not an
approximation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError
from .tracker import SequenceRecord

SNAPSHOT_FORMAT = "oodr-index"
SNAPSHOT_VERSION = 1


def cosine_similarity(g: np.ndarray, f: np.ndarray) -> float:
    """g.f / (|g||f|), clamped to [-1, 1] against rounding."""
    g = np.asarray(g, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if g.shape != f.shape or g.ndim != 1:
        raise InputError(f"dimension mismatch: {g.shape} vs {f.shape}")
    ng = float(np.linalg.norm(g))
    nf = float(np.linalg.norm(f))
    if ng == 0.0 or nf == 0.0:
        raise InputError("cosine similarity is undefined for zero vectors")
    return float(np.clip(float(g @ f) / (ng * nf), -1.0, 1.0))


@dataclass
class QueryResult:
    sequence_id: str
    score: float
    best_crop: int  # crop position within the sequence
    rank: int

    def to_json(self) -> dict:
        return {
            "sequence_id": self.sequence_id,
            "score": self.score,
            "best_crop": self.best_crop,
            "rank": self.rank,
        }


class _Entry:
    __slots__ = ("record", "vectors", "norms")

    def __init__(self, record: SequenceRecord):
        if record.embeddings is None:
            raise InputError(f"sequence {record.sequence_id} has no embeddings")
        vectors = np.asarray(record.embeddings, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(record.crops):
            raise InputError(
                f"sequence {record.sequence_id}: {vectors.shape} embeddings for "
                f"{len(record.crops)} crops"
            )
        if not np.all(np.isfinite(vectors)):
            raise InputError(f"sequence {record.sequence_id} has non-finite embeddings")
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(norms == 0.0):
            raise InputError(f"sequence {record.sequence_id} contains a zero embedding")
        self.record = record
        self.vectors = vectors
        self.norms = norms


class EmbeddingIndex:
    """In-memory sequence index; one writer, any number of readers."""

    def __init__(self, config: dict | None = None):
        self._entries: dict[str, _Entry] = {}
        self._dimension: int | None = None
        self.config = config or {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, sequence_id: str) -> bool:
        return sequence_id in self._entries

    @property
    def dimension(self) -> int | None:
        return self._dimension

    @property
    def num_vectors(self) -> int:
        return sum(e.vectors.shape[0] for e in self._entries.values())

    def sequence_ids(self) -> list[str]:
        return sorted(self._entries)

    def sequence(self, sequence_id: str) -> SequenceRecord:
        if sequence_id not in self._entries:
            raise KeyError(sequence_id)
        return self._entries[sequence_id].record

    def ingest(self, record: SequenceRecord) -> None:
        """Add (or replace) one sequence; atomic, so readers never see a
        partial sequence."""
        entry = _Entry(record)
        d = entry.vectors.shape[1]
        if self._dimension is None:
            self._dimension = d
        elif d != self._dimension:
            raise InputError(
                f"sequence {record.sequence_id} has dimension {d}, index is {self._dimension}"
            )
        self._entries[record.sequence_id] = entry

    def _check_query(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=np.float64).reshape(-1)
        if self._dimension is not None and f.shape[0] != self._dimension:
            raise InputError(f"query has dimension {f.shape[0]}, index is {self._dimension}")
        if float(np.linalg.norm(f)) == 0.0:
            raise InputError("query embedding is a zero vector")
        return f

    def crop_similarities(self, sequence_id: str, f: np.ndarray) -> np.ndarray:
        """Per-crop cosine similarities of one sequence against f."""
        f = self._check_query(f)
        entry = self._entries[sequence_id]
        nf = float(np.linalg.norm(f))
        sims = entry.vectors @ f / (entry.norms * nf)
        return np.clip(sims, -1.0, 1.0)

    def sequence_score(self, sequence_id: str, f: np.ndarray) -> tuple[float, int]:
        """Best per-crop similarity and the earliest crop attaining it."""
        if sequence_id not in self._entries:
            raise KeyError(sequence_id)
        sims = self.crop_similarities(sequence_id, f)
        best = int(np.argmax(sims))  # argmax returns the first maximum
        return float(sims[best]), best

    def query(
        self, f: np.ndarray, tau: float, top_k: int | None = None
    ) -> list[QueryResult]:
        """All sequences whose score is >= tau, best first; ties break by
        sequence id."""
        if not -1.0 <= tau <= 1.0:
            raise InputError(f"tau must lie in [-1, 1], got {tau}")
        f = self._check_query(f)
        scored = []
        for sid in sorted(self._entries):
            score, best = self.sequence_score(sid, f)
            if score >= tau:
                scored.append((-score, sid, best))
        scored.sort()
        if top_k is not None:
            scored = scored[:top_k]
        return [
            QueryResult(sequence_id=sid, score=-negscore, best_crop=best, rank=i + 1)
            for i, (negscore, sid, best) in enumerate(scored)
        ]

    def save(self, path: str | Path) -> None:
        doc = {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "dimension": self._dimension,
            "config": self.config,
            "sequences": [self._entries[sid].record.to_json() for sid in sorted(self._entries)],
        }
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingIndex":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON: {exc}") from exc
        if doc.get("format") != SNAPSHOT_FORMAT:
            raise FormatError(f"{path}: not an index snapshot")
        if doc.get("version") != SNAPSHOT_VERSION:
            raise FormatError(f"{path}: unsupported snapshot version {doc.get('version')}")
        index = cls(config=doc.get("config") or {})
        for seq_doc in doc["sequences"]:
            index.ingest(SequenceRecord.from_json(seq_doc))
        return index
