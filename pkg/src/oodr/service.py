"""HTTP query service over one immutable index snapshot.

Queries are read-only; the only mutation is an atomic snapshot swap (a
single reference assignment), so concurrent readers always see one
consistent snapshot — old or new, never a mix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import __version__
from .errors import InputError, OodrError
from .index import EmbeddingIndex
from .vocabulary import UnknownTermError, Vocabulary


def query_results_payload(
    index: EmbeddingIndex, f: np.ndarray, tau: float, top_k: int | None
) -> dict:
    """The one query serializer both the CLI and the service use, so their
    outputs agree byte for byte."""
    results = []
    for res in index.query(f, tau, top_k):
        rec = index.sequence(res.sequence_id)
        sims = index.crop_similarities(res.sequence_id, f)
        best = rec.crops[res.best_crop]
        results.append(
            {
                "sequence_id": res.sequence_id,
                "score": res.score,
                "rank": res.rank,
                "length": rec.length,
                "source_video": rec.source_video,
                "best_crop": {"index": res.best_crop, **best.to_json()},
                "crop_similarities": [float(s) for s in sims],
            }
        )
    return {"tau": tau, "count": len(results), "results": results}


def render_payload(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


@dataclass
class _Snapshot:
    index: EmbeddingIndex
    vocabulary: Vocabulary | None
    base_dir: Path
    path: Path


class ServiceState:
    def __init__(self, eval_report: str | Path | None = None):
        self._snapshot: _Snapshot | None = None
        self.eval_report = Path(eval_report) if eval_report else None

    def load_snapshot(
        self, snapshot_path: str | Path, vocabulary_path: str | Path | None = None
    ) -> None:
        """Build the new snapshot completely, then swap it in atomically."""
        path = Path(snapshot_path)
        index = EmbeddingIndex.load(path)
        vocab = Vocabulary.load(vocabulary_path) if vocabulary_path else None
        self._snapshot = _Snapshot(index, vocab, path.parent, path)

    @property
    def snapshot(self) -> _Snapshot | None:
        return self._snapshot


def _error(status: int, code: str, message: str, **extra) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": {"type": code, "message": message, **extra}}
    )


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="oodr query service", version=__version__)
    # the query console is served as static files from another origin
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    def need_snapshot():
        snap = state.snapshot
        if snap is None:
            return None, _error(409, "index_not_loaded", "no index snapshot is loaded")
        return snap, None

    @app.get("/health")
    def health():
        snap = state.snapshot
        stats = None
        if snap is not None:
            stats = {
                "sequences": len(snap.index),
                "vectors": snap.index.num_vectors,
                "dimension": snap.index.dimension,
                "snapshot": str(snap.path),
            }
        return {"version": __version__, "index": stats}

    @app.get("/vocabulary")
    def vocabulary():
        snap, err = need_snapshot()
        if err:
            return err
        if snap.vocabulary is None:
            return {"terms": []}
        return {"terms": snap.vocabulary.terms()}

    @app.post("/query")
    async def query(request: Request):
        snap, err = need_snapshot()
        if err:
            return err
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _error(400, "bad_request", "request body must be JSON")
        if not isinstance(body, dict):
            return _error(400, "bad_request", "request body must be a JSON object")

        term = body.get("term")
        embedding = body.get("embedding")
        if (term is None) == (embedding is None):
            return _error(
                400, "bad_request", "provide exactly one of 'term' or 'embedding'",
                field="term|embedding",
            )
        tau = body.get("tau", snap.index.config.get("retrieval_tau", 0.25))
        if not isinstance(tau, (int, float)) or isinstance(tau, bool) or not -1.0 <= tau <= 1.0:
            return _error(400, "bad_request", "tau must be a number in [-1, 1]", field="tau")
        top_k = body.get("top_k")
        if top_k is not None and (not isinstance(top_k, int) or isinstance(top_k, bool) or top_k < 1):
            return _error(400, "bad_request", "top_k must be a positive integer", field="top_k")

        if term is not None:
            if not isinstance(term, str):
                return _error(400, "bad_request", "term must be a string", field="term")
            if snap.vocabulary is None:
                return _error(409, "no_vocabulary", "service has no vocabulary loaded")
            try:
                f = snap.vocabulary.resolve(term)
            except UnknownTermError as exc:
                return _error(404, exc.code, str(exc), suggestions=exc.suggestions)
        else:
            if (
                not isinstance(embedding, list)
                or not embedding
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in embedding)
            ):
                return _error(400, "bad_request", "embedding must be a list of numbers",
                              field="embedding")
            f = np.asarray(embedding, dtype=np.float64)
        try:
            payload = query_results_payload(snap.index, f, float(tau), top_k)
        except InputError as exc:
            return _error(400, exc.code, str(exc))
        return Response(content=render_payload(payload), media_type="application/json")

    @app.get("/sequences/{sequence_id}")
    def get_sequence(sequence_id: str):
        snap, err = need_snapshot()
        if err:
            return err
        try:
            rec = snap.index.sequence(sequence_id)
        except KeyError:
            return _error(404, "unknown_sequence", f"no sequence {sequence_id!r} in the index")
        return Response(content=render_payload(rec.to_json()), media_type="application/json")

    @app.get("/sequences/{sequence_id}/crops/{position}")
    def get_crop(sequence_id: str, position: int):
        snap, err = need_snapshot()
        if err:
            return err
        try:
            rec = snap.index.sequence(sequence_id)
        except KeyError:
            return _error(404, "unknown_sequence", f"no sequence {sequence_id!r} in the index")
        if not 0 <= position < len(rec.crops):
            return _error(404, "unknown_crop",
                          f"sequence {sequence_id!r} has {len(rec.crops)} crops")
        crop = rec.crops[position]
        if not crop.image:
            return _error(404, "no_crop_image", "this sequence has no stored crop images")
        path = snap.base_dir / crop.image
        if not path.is_file():
            return _error(404, "no_crop_image", f"crop image missing on disk: {path}")
        return Response(content=path.read_bytes(), media_type="image/png")

    @app.get("/eval")
    def get_eval():
        if state.eval_report is None or not state.eval_report.is_file():
            return _error(404, "no_eval_report", "no evaluation report available")
        return Response(content=state.eval_report.read_text(), media_type="application/json")

    @app.exception_handler(OodrError)
    async def oodr_error_handler(_request, exc: OodrError):
        return _error(400, exc.code, str(exc))

    return app
