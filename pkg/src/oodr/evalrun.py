"""The eval stage: every metric of the harness over one corpus run."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import evaluation, scoring
from .config import PipelineConfig, check_same_config
from .errors import InputError
from .evaluation import IGNORE, RetrievedInstance
from .index import EmbeddingIndex
from .manifest import CorpusManifest, VideoEntry
from .pipeline import load_segments_video, load_track_video, segments_for_frame
from .tensorfile import read_tensor
from .vocabulary import Vocabulary


def _gt_segments(gt: np.ndarray, anomaly: np.ndarray, frame_index: int):
    """One SegmentInstance per GT instance id (ids are components by
    construction)."""
    out = []
    for inst_id in sorted(int(i) for i in np.unique(gt) if i != 0):
        rows, cols = np.nonzero(gt == inst_id)
        px = np.column_stack((rows, cols)).astype(np.int32)
        vals = anomaly[rows, cols].astype(np.float64)
        out.append(
            scoring.SegmentInstance(
                frame_index=frame_index,
                pixels=px,
                bbox=(int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max())),
                centroid=(float(rows.mean()), float(cols.mean())),
                area=int(px.shape[0]),
                mean_score=float(vals.mean()),
                max_score=float(vals.max()),
                min_score=float(vals.min()),
                std_score=float(vals.std()),
            )
        )
    return out


class _GtCache:
    """Lazy per-(video, frame) ground-truth instance masks."""

    def __init__(self, manifest: CorpusManifest):
        self.manifest = manifest
        self._masks: dict[tuple[str, int], np.ndarray] = {}

    def mask(self, video: VideoEntry, frame_index: int) -> np.ndarray:
        key = (video.video_id, frame_index)
        if key not in self._masks:
            frame = video.frames[frame_index - video.frames[0].index]
            assert frame.index == frame_index
            self._masks[key] = read_tensor(self.manifest.resolve(frame.gt_instances))
        return self._masks[key]


def majority_instance(gt: np.ndarray, bbox) -> int | None:
    """GT instance owning more than half of the (inclusive) bbox, if any."""
    top, left, bottom, right = bbox
    patch = gt[top : bottom + 1, left : right + 1]
    counts = np.bincount(patch.reshape(-1))
    if counts.size <= 1:
        return None
    inst = int(np.argmax(counts[1:])) + 1
    return inst if counts[inst] * 2 > patch.size else None


def _retrieval_instances(
    index: EmbeddingIndex,
    vocab: Vocabulary,
    manifest: CorpusManifest,
    videos: list[VideoEntry],
    gt_cache: _GtCache,
    mode: str = "tracked",
    frame_embeddings: dict[str, np.ndarray] | None = None,
) -> dict[str, list[RetrievedInstance]]:
    """Per-query retrievable instances. mode picks the ranking score:
    'tracked' = the sequence's best-crop score, 'untracked' = each crop's
    own score, 'fullframe' = the crop's frame embedding score."""
    by_video = {v.video_id: v for v in videos}
    per_query: dict[str, list[RetrievedInstance]] = {}
    for term in vocab.terms():
        f = vocab.resolve(term)
        records = []
        for sid in index.sequence_ids():
            rec = index.sequence(sid)
            video = by_video.get(rec.source_video)
            if video is None:
                continue
            sims = index.crop_similarities(sid, f)
            seq_score = float(np.max(sims))
            for ci, crop in enumerate(rec.crops):
                gt = gt_cache.mask(video, crop.frame_index)
                inst = majority_instance(gt, crop.bbox)
                inst_class = (
                    video.instance_classes.get(str(inst)) if inst is not None else None
                )
                key = (
                    (rec.source_video, crop.frame_index, inst) if inst is not None else None
                )
                if mode == "tracked":
                    score = seq_score
                elif mode == "untracked":
                    score = float(sims[ci])
                elif mode == "fullframe":
                    score = float(
                        np.clip(
                            frame_embeddings[rec.source_video][crop.frame_index]
                            @ (f / np.linalg.norm(f)),
                            -1.0,
                            1.0,
                        )
                    )
                else:
                    raise InputError(f"unknown retrieval mode {mode!r}")
                records.append(RetrievedInstance(score, key, inst_class))
        per_query[term] = records
    return per_query


def gt_instance_totals(
    manifest: CorpusManifest, videos: list[VideoEntry]
) -> dict[str, int]:
    totals: dict[str, int] = {}
    for video in videos:
        tracks = json.loads(manifest.resolve(video.gt_tracks).read_text())["tracks"]
        for t in tracks:
            totals[t["class"]] = totals.get(t["class"], 0) + len(t["observations"])
    return totals


def run_eval(
    manifest: CorpusManifest,
    config: PipelineConfig,
    snapshot_path: str | Path,
    segments_dir: str | Path | None = None,
    tracks_dir: str | Path | None = None,
    videos: list[str] | None = None,
    force: bool = False,
    retrieval_modes: tuple[str, ...] = ("tracked",),
) -> dict:
    """Compute the EvalReport for the selected (default: eval-split)
    videos. Pixel metrics use the ground-truth region of interest (other
    pixels are ignore-labeled); component F1-bar uses the ROI the segment
    stage stored."""
    selected = manifest.select_videos(videos, split=None if videos else "eval")
    if not selected:
        raise InputError("no videos selected for evaluation")
    index = EmbeddingIndex.load(snapshot_path)
    configs = {"eval": config.to_json(), "snapshot": index.config}

    gt_cache = _GtCache(manifest)
    report: dict = {"config": config.to_json(), "videos": [v.video_id for v in selected]}

    # --- segmentation metrics ------------------------------------------
    if segments_dir is not None:
        score_chunks = []
        label_chunks = []
        stats = evaluation.ComponentStats()
        for video in selected:
            vdoc = load_segments_video(segments_dir, video.video_id)
            configs[f"segments/{video.video_id}"] = vdoc["config"]
            vdir = Path(segments_dir) / video.video_id
            for frame_doc, frame in zip(vdoc["frames"], video.frames):
                q = manifest.load_scores(video, frame)
                anomaly = scoring.rba_score(q)
                gt = gt_cache.mask(video, frame.index)
                road = read_tensor(manifest.resolve(frame.gt_road)).astype(bool)
                labels = np.where(gt > 0, 1, 0).astype(np.int8)
                labels[~(road | (gt > 0))] = IGNORE
                score_chunks.append(anomaly.reshape(-1))
                label_chunks.append(labels.reshape(-1))

                pred_segs = segments_for_frame(segments_dir, vdoc, frame_doc)
                gt_segs = _gt_segments(gt, anomaly, frame.index)
                roi_mask = read_tensor(vdir / frame_doc["roi"]).astype(bool)
                stats.extend(evaluation.component_stats(pred_segs, gt_segs, roi_mask))
        scores = np.concatenate(score_chunks)
        labels = np.concatenate(label_chunks)
        comp = evaluation.f1_bar(stats, tuple(config.f1_thresholds))
        thresholds, precision, recall = evaluation.pixel_pr_curve(scores, labels)
        report["segmentation"] = {
            "auprc": evaluation.pixel_auprc(scores, labels),
            "fpr95": evaluation.fpr_at_95_tpr(scores, labels),
            "f1_bar": comp.value,
            "f1_bar_vacuous": comp.vacuous,
            "f1_bar_per_threshold": comp.per_threshold,
        }
        report["_pixel_curve"] = {
            "threshold": thresholds.tolist(),
            "precision": precision.tolist(),
            "recall": recall.tolist(),
        }

    # --- tracking metrics ----------------------------------------------
    if tracks_dir is not None:
        fn = fp = idsw = gt_total = matches = 0
        dist_total = 0.0
        radius = config.match_radius_px(manifest.frame_shape())
        for video in selected:
            vdoc = load_track_video(tracks_dir, video.video_id)
            configs[f"tracks/{video.video_id}"] = vdoc["config"]
            pred: dict[int, dict[object, tuple[float, float]]] = {}
            for seq in vdoc["sequences"]:
                for crop in seq["crops"]:
                    pred.setdefault(crop["frame_index"], {})[seq["sequence_id"]] = tuple(
                        crop["centroid"]
                    )
            gt_tracks = json.loads(manifest.resolve(video.gt_tracks).read_text())["tracks"]
            gt: dict[int, dict[object, tuple[float, float]]] = {}
            for t in gt_tracks:
                for obs in t["observations"]:
                    gt.setdefault(obs["frame"], {})[t["track_id"]] = tuple(obs["centroid"])
            mot = evaluation.clear_mot(pred, gt, radius)
            fn += mot.fn
            fp += mot.fp
            idsw += mot.id_switches
            gt_total += mot.gt_count
            matches += mot.matches
            dist_total += mot.motp * mot.matches
        report["tracking"] = {
            "mota": 1.0 - (fn + fp + idsw) / gt_total,
            "motp": dist_total / matches if matches else 0.0,
            "gt": gt_total,
            "fn": fn,
            "fp": fp,
            "id_switches": idsw,
        }

    # --- retrieval metrics ----------------------------------------------
    vocab = Vocabulary.load(manifest.resolve(manifest.vocabulary))
    totals = gt_instance_totals(manifest, selected)
    frame_embeddings = None
    if "fullframe" in retrieval_modes:
        frame_embeddings = {
            v.video_id: read_tensor(manifest.resolve(v.gt_frame_embeddings)).astype(np.float64)
            for v in selected
            if v.gt_frame_embeddings
        }
    retrieval_report: dict = {}
    curves_out = {}
    for mode in retrieval_modes:
        per_query = _retrieval_instances(
            index, vocab, manifest, selected, gt_cache, mode, frame_embeddings
        )
        result = evaluation.retrieval_pr(per_query, totals)
        retrieval_report[mode] = {
            "mean_auprc": result.mean_auprc,
            "pooled_auprc": result.pooled_auprc,
            "per_query": {
                q: {"auprc": c.auprc, "undefined_recall": c.undefined_recall}
                for q, c in result.curves.items()
            },
        }
        if mode == "tracked":
            curves_out = result.curves
    report["retrieval"] = retrieval_report
    report["_retrieval_curves"] = {
        q: {"threshold": c.thresholds, "precision": c.precision, "recall": c.recall}
        for q, c in curves_out.items()
    }

    check_same_config(configs, force=force)
    return report
