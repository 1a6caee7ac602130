"""Command-line pipeline driver: synth | segment | train-meta | track |
ingest | query | eval | serve.

Every failure exits nonzero with one machine-readable JSON error object on
stderr."""

from __future__ import annotations

import functools
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import evalrun, pipeline, report as report_mod
from .config import PipelineConfig
from .errors import InputError, OodrError
from .index import EmbeddingIndex
from .manifest import load_manifest
from .service import ServiceState, create_app, query_results_payload, render_payload
from .synth import SyntheticSpec, generate_synthetic, validate_corpus
from .vocabulary import Vocabulary


def _fail(exc: Exception) -> None:
    if isinstance(exc, OodrError):
        payload = exc.payload()
    else:
        payload = {"type": exc.__class__.__name__, "message": str(exc)}
    click.echo(json.dumps({"error": payload}, sort_keys=True), err=True)
    sys.exit(1)


def cli_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (OodrError, OSError, KeyError, ValueError) as exc:
            _fail(exc)

    return wrapper


def _load(manifest_path, config_path):
    manifest = load_manifest(manifest_path)
    config = pipeline.resolve_config(manifest, config_path)
    config.validate()
    return manifest, config


manifest_opt = click.option("--manifest", "manifest_path", required=True,
                            type=click.Path(exists=True), help="corpus manifest JSON")
config_opt = click.option("--config", "config_path", type=click.Path(exists=True),
                          default=None, help="pipeline config JSON (default: the "
                          "manifest's recommended config)")
videos_opt = click.option("--videos", default=None,
                          help="comma-separated video ids (default: all / split default)")


def _video_list(videos):
    return [v.strip() for v in videos.split(",") if v.strip()] if videos else None


@click.group()
def main():
    """Out-of-distribution road obstacle database engine."""


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(), help="corpus directory")
@click.option("--spec", "spec_path", type=click.Path(exists=True), default=None,
              help="SyntheticSpec JSON (fields override the defaults)")
@click.option("--seed", type=int, default=None, help="override the spec seed")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="embed this pipeline config instead of the derived one")
@cli_errors
def synth(out_dir, spec_path, seed, config_path):
    """Generate a deterministic synthetic corpus."""
    doc = json.loads(Path(spec_path).read_text()) if spec_path else {}
    if seed is not None:
        doc["seed"] = seed
    known = {f.name for f in SyntheticSpec.__dataclass_fields__.values()}
    unknown = set(doc) - known
    if unknown:
        raise InputError(f"unknown synthetic spec fields: {sorted(unknown)}")
    for key in ("known_classes", "obstacle_classes"):
        if key in doc:
            doc[key] = tuple(doc[key])
    spec = SyntheticSpec(**doc)
    manifest = generate_synthetic(spec, out_dir)
    if config_path is not None:
        forced = PipelineConfig.load(config_path)
        manifest_doc = json.loads((Path(out_dir) / "manifest.json").read_text())
        manifest_doc["pipeline_config"] = forced.to_json()
        from .manifest import save_manifest_doc

        save_manifest_doc(manifest_doc, Path(out_dir) / "manifest.json")
        manifest = load_manifest(Path(out_dir) / "manifest.json")
    problems = validate_corpus(manifest)
    if problems:
        raise InputError("generated corpus failed self-validation: " + "; ".join(problems))
    click.echo(json.dumps({
        "corpus": str(Path(out_dir) / "manifest.json"),
        "videos": len(manifest.videos),
        "clean_tau": manifest.synthetic["clean_tau"],
    }, sort_keys=True))


@main.command()
@manifest_opt
@config_opt
@videos_opt
@click.option("--out", "out_dir", required=True, type=click.Path(), help="segments directory")
@click.option("--no-meta", is_flag=True, help="skip meta classification (raw predictions)")
@click.option("--roi-mode", type=click.Choice(["predicted", "gt"]), default="predicted")
@cli_errors
def segment(manifest_path, config_path, videos, out_dir, no_meta, roi_mode):
    """Score frames, extract OoD segments, restrict to the ROI, filter."""
    manifest, config = _load(manifest_path, config_path)
    stats = pipeline.run_segment(manifest, config, out_dir, _video_list(videos),
                                 use_meta=not no_meta, roi_mode=roi_mode)
    click.echo(json.dumps(stats, sort_keys=True))


@main.command("train-meta")
@manifest_opt
@config_opt
@videos_opt
@click.option("--segments", "segments_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path(), help="model JSON path")
@cli_errors
def train_meta_cmd(manifest_path, config_path, videos, segments_dir, out_path):
    """Fit the meta classifier on train-split segment artifacts."""
    manifest, config = _load(manifest_path, config_path)
    stats = pipeline.run_train_meta(manifest, config, segments_dir, out_path,
                                    _video_list(videos))
    click.echo(json.dumps(stats, sort_keys=True))


@main.command()
@manifest_opt
@config_opt
@videos_opt
@click.option("--segments", "segments_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path(), help="tracks directory")
@click.option("--no-crops", is_flag=True, help="skip writing crop images")
@cli_errors
def track(manifest_path, config_path, videos, segments_dir, out_dir, no_crops):
    """Link segments into identity-stable sequences."""
    manifest, config = _load(manifest_path, config_path)
    stats = pipeline.run_track(manifest, config, segments_dir, out_dir,
                               _video_list(videos), write_crops=not no_crops)
    click.echo(json.dumps(stats, sort_keys=True))


@main.command()
@manifest_opt
@config_opt
@videos_opt
@click.option("--tracks", "tracks_dir", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", required=True, type=click.Path(), help="snapshot path")
@click.option("--source", type=click.Choice(["pipeline", "gt"]), default="pipeline",
              help="'gt' ingests the corpus's ground-truth sequences instead")
@cli_errors
def ingest(manifest_path, config_path, videos, tracks_dir, out_path, source):
    """Embed sequence crops and persist the index snapshot."""
    manifest, config = _load(manifest_path, config_path)
    stats = pipeline.run_ingest(manifest, config, out_path, tracks_dir, source,
                                _video_list(videos))
    click.echo(json.dumps(stats, sort_keys=True))


@main.command()
@click.option("--snapshot", "snapshot_path", required=True, type=click.Path(exists=True))
@click.option("--term", default=None, help="vocabulary term to query")
@click.option("--vector", "vector_json", default=None,
              help="raw query embedding as a JSON list")
@click.option("--vector-file", type=click.Path(exists=True), default=None,
              help="file with a JSON list embedding")
@click.option("--vocabulary", "vocab_path", type=click.Path(exists=True), default=None,
              help="vocabulary JSON (needed for --term)")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="pipeline config (supplies the default tau)")
@click.option("--tau", type=float, default=None, help="similarity threshold in [-1, 1]")
@click.option("--top-k", type=int, default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="json")
@cli_errors
def query(snapshot_path, term, vector_json, vector_file, vocab_path, config_path, tau,
          top_k, fmt):
    """Query the snapshot by term or raw embedding."""
    given = [x for x in (term, vector_json, vector_file) if x is not None]
    if len(given) != 1:
        raise InputError("provide exactly one of --term, --vector, --vector-file")
    index = EmbeddingIndex.load(snapshot_path)
    if tau is None and config_path is not None:
        tau = PipelineConfig.load(config_path).retrieval_tau
    if tau is None:
        tau = float(index.config.get("retrieval_tau", 0.25))
    if not -1.0 <= tau <= 1.0:
        raise InputError(f"tau must lie in [-1, 1], got {tau}")
    if term is not None:
        if vocab_path is None:
            raise InputError("--term needs --vocabulary")
        f = Vocabulary.load(vocab_path).resolve(term)
    else:
        raw = vector_json if vector_json is not None else Path(vector_file).read_text()
        f = np.asarray(json.loads(raw), dtype=np.float64)
    payload = query_results_payload(index, f, tau, top_k)
    if fmt == "json":
        click.echo(render_payload(payload), nl=False)
    else:
        click.echo(f"{'rank':>4}  {'score':>8}  {'len':>4}  sequence")
        for row in payload["results"]:
            click.echo(f"{row['rank']:>4}  {row['score']:>8.4f}  {row['length']:>4}  "
                       f"{row['sequence_id']}")


@main.command("eval")
@manifest_opt
@config_opt
@videos_opt
@click.option("--segments", "segments_dir", type=click.Path(exists=True), default=None)
@click.option("--tracks", "tracks_dir", type=click.Path(exists=True), default=None)
@click.option("--snapshot", "snapshot_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path(), help="report directory")
@click.option("--force", is_flag=True, help="allow artifacts from differing configs")
@click.option("--retrieval-modes", default="tracked",
              help="comma list from tracked,untracked,fullframe")
@cli_errors
def eval_cmd(manifest_path, config_path, videos, segments_dir, tracks_dir, snapshot_path,
             out_dir, force, retrieval_modes):
    """Compute the EvalReport (JSON + CSV curves + figures)."""
    manifest, config = _load(manifest_path, config_path)
    modes = tuple(m.strip() for m in retrieval_modes.split(",") if m.strip())
    rep = evalrun.run_eval(manifest, config, snapshot_path, segments_dir, tracks_dir,
                           _video_list(videos), force=force, retrieval_modes=modes)
    cleaned = report_mod.write_report(rep, out_dir)
    summary = {"report": str(Path(out_dir) / "report.json")}
    if "segmentation" in cleaned:
        seg = cleaned["segmentation"]
        summary["segmentation"] = {k: seg[k] for k in ("auprc", "fpr95", "f1_bar")}
    if "tracking" in cleaned:
        summary["tracking"] = {k: cleaned["tracking"][k] for k in ("mota", "motp")}
    summary["retrieval"] = {
        mode: cleaned["retrieval"][mode]["mean_auprc"] for mode in cleaned["retrieval"]
    }
    click.echo(json.dumps(summary, sort_keys=True))


@main.command()
@click.option("--snapshot", "snapshot_path", required=True, type=click.Path(exists=True))
@click.option("--vocabulary", "vocab_path", type=click.Path(exists=True), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="pipeline config overriding the snapshot's default tau")
@click.option("--eval-report", type=click.Path(), default=None,
              help="report.json to serve at /eval")
@click.option("--host", default=None, help="bind address (or env OODR_HOST)")
@click.option("--port", type=int, default=None, help="port (or env OODR_PORT)")
@cli_errors
def serve(snapshot_path, vocab_path, config_path, eval_report, host, port):
    """Start the HTTP query service on one snapshot."""
    import uvicorn

    state = ServiceState(eval_report=eval_report)
    state.load_snapshot(snapshot_path, vocab_path)
    if config_path is not None:
        state.snapshot.index.config["retrieval_tau"] = PipelineConfig.load(
            config_path
        ).retrieval_tau
    app = create_app(state)
    host = host or os.environ.get("OODR_HOST", "127.0.0.1")
    port = port if port is not None else int(os.environ.get("OODR_PORT", "8787"))
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
