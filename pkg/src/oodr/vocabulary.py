"""Precomputed text-query embeddings, standing in for the external text
encoder."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import FormatError, OodrError


class UnknownTermError(OodrError):
    code = "unknown_term"

    def __init__(self, term: str, suggestions: list[str]):
        self.term = term
        self.suggestions = suggestions
        hint = f"; nearest known terms: {', '.join(suggestions)}" if suggestions else ""
        super().__init__(f"unknown vocabulary term {term!r}{hint}")

    def payload(self) -> dict:
        doc = super().payload()
        doc["suggestions"] = self.suggestions
        return doc


def levenshtein(a: str, b: str) -> int:
    """Plain edit distance (insert/delete/substitute, unit costs)."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


class Vocabulary:
    """Case-folded term -> embedding table loaded from JSON."""

    def __init__(self, terms: dict[str, np.ndarray]):
        self._display: dict[str, str] = {}
        self._vectors: dict[str, np.ndarray] = {}
        for term, vec in terms.items():
            vec = np.asarray(vec, dtype=np.float64)
            if vec.ndim != 1 or float(np.linalg.norm(vec)) == 0.0:
                raise FormatError(f"vocabulary term {term!r} has an invalid embedding")
            key = term.casefold()
            self._display[key] = term
            self._vectors[key] = vec

    def __len__(self) -> int:
        return len(self._vectors)

    def terms(self) -> list[str]:
        return sorted(self._display.values())

    def resolve(self, term: str) -> np.ndarray:
        """Exact case-folded lookup; unknown terms raise with the 5 nearest
        known terms by edit distance."""
        key = term.casefold()
        if key in self._vectors:
            return self._vectors[key]
        ranked = sorted(self._display, key=lambda t: (levenshtein(key, t), t))
        raise UnknownTermError(term, [self._display[t] for t in ranked[:5]])

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON: {exc}") from exc
        if "terms" not in doc:
            raise FormatError(f"{path}: missing 'terms' table")
        return cls({entry["term"]: entry["vector"] for entry in doc["terms"]})

    @staticmethod
    def save_terms(terms: dict[str, np.ndarray], path: str | Path, dimension: int) -> None:
        doc = {
            "dimension": dimension,
            "terms": [
                {"term": t, "vector": [float(x) for x in v]} for t, v in sorted(terms.items())
            ],
        }
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
