"""Stage drivers: segment -> track -> ingest -> eval, all file-to-file.

Each stage reads a corpus manifest plus the previous stage's artifacts and
writes its own, embedding the pipeline configuration for provenance. Given
identical inputs every stage is deterministic and idempotent.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import evaluation, meta, roi, scoring
from .config import PipelineConfig, check_same_config
from .errors import InputError
from .index import EmbeddingIndex
from .manifest import CorpusManifest, VideoEntry
from .tensorfile import read_tensor, write_tensor
from .tracker import (
    CropRef,
    SequenceRecord,
    Tracker,
    TrackerParams,
    finalize_tracks,
)
from .vocabulary import Vocabulary

# fixed palette for rendered crops: background, then one color per class id
_PALETTE = [
    (40, 40, 40),
    (230, 90, 80),
    (90, 170, 240),
    (240, 200, 90),
    (150, 220, 120),
    (200, 120, 220),
    (240, 150, 60),
    (120, 210, 200),
]


def resolve_config(manifest: CorpusManifest, config_path: str | Path | None) -> PipelineConfig:
    """--config flag wins, then the manifest's recommended config, then
    built-in defaults."""
    if config_path is not None:
        return PipelineConfig.load(config_path)
    if manifest.pipeline_config:
        return PipelineConfig.from_json(manifest.pipeline_config)
    return PipelineConfig()


def tracker_params(config: PipelineConfig, frame_shape: tuple[int, int]) -> TrackerParams:
    return TrackerParams(
        iou_min=config.iou_min,
        center_max=config.center_max_px(frame_shape),
        max_gap=config.max_gap,
        min_track_length=config.min_track_length,
        regression_window=config.regression_window,
        crop_pad_frac=config.crop_pad_frac,
        crop_min_size=config.crop_min_size,
        length_counting=config.track_length_counting,
    )


def _segments_from_mask(mask, anomaly, frame_index):
    return scoring.extract_components(mask, anomaly, frame_index=frame_index)


def gt_roi_mask(manifest: CorpusManifest, video: VideoEntry, frame) -> np.ndarray:
    road = read_tensor(manifest.resolve(frame.gt_road)).astype(bool)
    inst = read_tensor(manifest.resolve(frame.gt_instances))
    return road | (inst > 0)


def run_segment(
    manifest: CorpusManifest,
    config: PipelineConfig,
    out_dir: str | Path,
    videos: list[str] | None = None,
    use_meta: bool = True,
    roi_mode: str = "predicted",
) -> dict:
    """Per-frame scoring, thresholding, ROI restriction and meta filtering.

    Writes, per video, a labels tensor and the ROI per frame plus a JSON
    with segment geometry/statistics. ROI is applied before the meta
    filter so the meta model always sees the segments it was trained on.
    """
    if roi_mode not in ("predicted", "gt"):
        raise InputError("roi_mode must be 'predicted' or 'gt'")
    config.validate()
    out = Path(out_dir)
    model = None
    if use_meta and config.meta_model:
        model = meta.MetaModel.load(config.meta_model)
        if config.meta_cutoff is not None:
            model.cutoff = config.meta_cutoff
    threshold = config.resolve_threshold(manifest.num_known_classes)

    stats = {"videos": 0, "frames": 0, "segments": 0}
    for video in manifest.select_videos(videos):
        vdir = out / video.video_id
        vdir.mkdir(parents=True, exist_ok=True)
        frames_doc = []
        for frame in video.frames:
            q = manifest.load_scores(video, frame)
            anomaly = scoring.rba_score(q)
            mask = scoring.threshold_anomaly(anomaly, threshold)
            if roi_mode == "gt":
                roi_mask = gt_roi_mask(manifest, video, frame)
            else:
                radius = config.resolve_roi_radius(q.shape[1])
                road = roi.road_mask_from_scores(q, manifest.road_index)
                roi_mask = roi.morphological_close(road, radius)
            mask = roi.apply_roi(mask, roi_mask)
            segments = _segments_from_mask(mask, anomaly, frame.index)
            if model is not None:
                segments = meta.filter_segments(segments, anomaly, model)

            labels = np.zeros(mask.shape, dtype=np.uint8)
            seg_docs = []
            for i, seg in enumerate(segments, start=1):
                if i > 255:
                    raise InputError("more than 255 segments in one frame")
                labels[seg.pixels[:, 0], seg.pixels[:, 1]] = i
                seg_docs.append(
                    {
                        "label": i,
                        "bbox": list(seg.bbox),
                        "centroid": list(seg.centroid),
                        "area": seg.area,
                        "mean_score": seg.mean_score,
                        "max_score": seg.max_score,
                        "min_score": seg.min_score,
                        "std_score": seg.std_score,
                    }
                )
            write_tensor(labels, vdir / f"labels_{frame.index:04d}.oodt")
            write_tensor(roi_mask.astype(np.uint8), vdir / f"roi_{frame.index:04d}.oodt")
            frames_doc.append(
                {
                    "index": frame.index,
                    "labels": f"labels_{frame.index:04d}.oodt",
                    "roi": f"roi_{frame.index:04d}.oodt",
                    "segments": seg_docs,
                }
            )
            stats["frames"] += 1
            stats["segments"] += len(seg_docs)
        doc = {
            "video_id": video.video_id,
            "config": config.to_json(),
            "frame_shape": list(manifest.frame_shape()),
            "use_meta": model is not None,
            "roi_mode": roi_mode,
            "anomaly_threshold": threshold,
            "frames": frames_doc,
        }
        (vdir / "video.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        stats["videos"] += 1
    return stats


def calibrate_threshold(
    manifest: CorpusManifest,
    config: PipelineConfig,
    candidates: list[float] | None = None,
    videos: list[str] | None = None,
) -> float:
    """Pick the anomaly threshold maximizing component F1-bar on a
    validation split (default: the train split; default candidates sweep
    (-K, 0)). The raw segmentation path is used: no meta model, predicted
    ROI."""
    from . import evaluation

    selected = manifest.select_videos(videos, split=None if videos else "train")
    if not selected:
        selected = manifest.videos
    k = manifest.num_known_classes
    if candidates is None:
        candidates = [-k * x / 12 for x in range(1, 12)]
    radius = config.resolve_roi_radius(manifest.frame_shape()[1])

    best = (None, -1.0)
    frames = []
    for video in selected:
        for frame in video.frames:
            q = manifest.load_scores(video, frame)
            anomaly = scoring.rba_score(q)
            roi_mask = roi.morphological_close(
                roi.road_mask_from_scores(q, manifest.road_index), radius
            )
            gt = read_tensor(manifest.resolve(frame.gt_instances))
            frames.append((anomaly, roi_mask, gt, frame.index))
    for t in candidates:
        stats = evaluation.ComponentStats()
        for anomaly, roi_mask, gt, frame_index in frames:
            mask = roi.apply_roi(scoring.threshold_anomaly(anomaly, t), roi_mask)
            preds = _segments_from_mask(mask, anomaly, frame_index)
            gt_segs = []
            for inst_id in sorted(int(i) for i in np.unique(gt) if i != 0):
                rows, cols = np.nonzero(gt == inst_id)
                px = np.column_stack((rows, cols)).astype(np.int32)
                gt_segs.append(
                    scoring.SegmentInstance(
                        frame_index, px,
                        (int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max())),
                        (float(rows.mean()), float(cols.mean())), int(px.shape[0]),
                        0.0, 0.0, 0.0, 0.0,
                    )
                )
            stats.extend(evaluation.component_stats(preds, gt_segs, roi_mask))
        score = evaluation.f1_bar(stats, tuple(config.f1_thresholds))
        if not score.vacuous and score.value > best[1]:
            best = (t, score.value)
    return best[0] if best[0] is not None else -0.5 * k


def load_segments_video(segments_dir: str | Path, video_id: str) -> dict:
    path = Path(segments_dir) / video_id / "video.json"
    return json.loads(path.read_text())


def segments_for_frame(
    segments_dir: str | Path, video_doc: dict, frame_doc: dict
) -> list[scoring.SegmentInstance]:
    """Rebuild SegmentInstance objects from a stored labels tensor plus the
    sidecar statistics."""
    vdir = Path(segments_dir) / video_doc["video_id"]
    labels = read_tensor(vdir / frame_doc["labels"])
    out = []
    for seg_doc in frame_doc["segments"]:
        rows, cols = np.nonzero(labels == seg_doc["label"])
        out.append(
            scoring.SegmentInstance(
                frame_index=frame_doc["index"],
                pixels=np.column_stack((rows, cols)).astype(np.int32),
                bbox=tuple(seg_doc["bbox"]),
                centroid=tuple(seg_doc["centroid"]),
                area=seg_doc["area"],
                mean_score=seg_doc["mean_score"],
                max_score=seg_doc["max_score"],
                min_score=seg_doc["min_score"],
                std_score=seg_doc["std_score"],
            )
        )
    return out


def run_train_meta(
    manifest: CorpusManifest,
    config: PipelineConfig,
    segments_dir: str | Path,
    out_path: str | Path,
    videos: list[str] | None = None,
) -> dict:
    """Fit the meta classifier on segment artifacts labeled against GT:
    a segment is a true positive iff more than half of its pixels lie on
    ground-truth OoD instances."""
    selected = manifest.select_videos(videos, split=None if videos else "train")
    if not selected:
        raise InputError("no training videos selected")
    features = []
    labels = []
    for video in selected:
        vdoc = load_segments_video(segments_dir, video.video_id)
        for frame_doc, frame in zip(vdoc["frames"], video.frames):
            if not frame_doc["segments"]:
                continue
            q = manifest.load_scores(video, frame)
            anomaly = scoring.rba_score(q)
            gt = read_tensor(manifest.resolve(frame.gt_instances))
            for seg in segments_for_frame(segments_dir, vdoc, frame_doc):
                inside = int((gt[seg.pixels[:, 0], seg.pixels[:, 1]] > 0).sum())
                features.append(meta.compute_features(seg, anomaly))
                labels.append(1 if inside * 2 > seg.area else 0)
    model = meta.train_meta(
        np.stack(features), np.asarray(labels), cutoff=config.meta_cutoff
    )
    model.save(out_path)
    return {
        "examples": len(labels),
        "positives": int(sum(labels)),
        "negatives": int(len(labels) - sum(labels)),
        "model": str(out_path),
    }


def _render_crop_png(content: np.ndarray, box, path: Path) -> None:
    from PIL import Image

    top, left, bottom, right = box
    patch = content[top : bottom + 1, left : right + 1]
    img = Image.fromarray(patch, mode="P")
    palette = []
    for i in range(256):
        palette.extend(_PALETTE[i % len(_PALETTE)] if i < len(_PALETTE) else (0, 0, 0))
    img.putpalette(palette)
    img.save(path, format="PNG")


def run_track(
    manifest: CorpusManifest,
    config: PipelineConfig,
    segments_dir: str | Path,
    out_dir: str | Path,
    videos: list[str] | None = None,
    write_crops: bool = True,
) -> dict:
    """Associate per-frame segments into tracks and persist the surviving
    sequences (JSON sidecar + crop images when the corpus has frames)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frame_shape = manifest.frame_shape()
    params = tracker_params(config, frame_shape)
    stats = {"videos": 0, "sequences": 0, "crops": 0}
    for video in manifest.select_videos(videos):
        vdoc = load_segments_video(segments_dir, video.video_id)
        check_same_config(
            {"segment": vdoc["config"], "track": config.to_json()}
        )
        tracker = Tracker(params)
        for frame_doc in vdoc["frames"]:
            tracker.step(
                frame_doc["index"], segments_for_frame(segments_dir, vdoc, frame_doc)
            )
        records = finalize_tracks(tracker.finish(), frame_shape, video.video_id, params)

        if write_crops and any(f.image for f in video.frames):
            contents = {
                f.index: read_tensor(manifest.resolve(f.image))
                for f in video.frames
                if f.image
            }
            for rec in records:
                seq_dir = out / video.video_id / rec.sequence_id.replace(":", "_")
                seq_dir.mkdir(parents=True, exist_ok=True)
                for i, crop in enumerate(rec.crops):
                    if crop.frame_index not in contents:
                        continue
                    png = seq_dir / f"crop_{i:04d}.png"
                    _render_crop_png(contents[crop.frame_index], crop.crop_box, png)
                    crop.image = str(png.relative_to(out))
                    stats["crops"] += 1

        doc = {
            "video_id": video.video_id,
            "config": config.to_json(),
            "frame_shape": list(frame_shape),
            "sequences": [rec.to_json() for rec in records],
        }
        (out / f"{video.video_id}.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n"
        )
        stats["videos"] += 1
        stats["sequences"] += len(records)
    return stats


def load_track_video(tracks_dir: str | Path, video_id: str) -> dict:
    return json.loads((Path(tracks_dir) / f"{video_id}.json").read_text())


def run_ingest(
    manifest: CorpusManifest,
    config: PipelineConfig,
    out_path: str | Path,
    tracks_dir: str | Path | None = None,
    source: str = "pipeline",
    videos: list[str] | None = None,
) -> dict:
    """Attach embeddings to sequences and persist one index snapshot.

    source 'pipeline' embeds the tracker's crops with the corpus encoder;
    source 'gt' ingests the corpus's ground-truth sequences and their
    precomputed embeddings (the perfect-detection route).
    """
    out_path = Path(out_path)
    index = EmbeddingIndex(config=config.to_json())
    selected = manifest.select_videos(videos)
    if source == "pipeline":
        if tracks_dir is None:
            raise InputError("pipeline ingest needs the track artifacts directory")
        encoder = manifest.encoder()
        for video in selected:
            vdoc = load_track_video(tracks_dir, video.video_id)
            check_same_config({"track": vdoc["config"], "ingest": config.to_json()})
            contents = {
                f.index: read_tensor(manifest.resolve(f.image))
                for f in video.frames
                if f.image
            }
            for seq_doc in vdoc["sequences"]:
                rec = SequenceRecord.from_json(seq_doc)
                vectors = [
                    encoder.embed_box(
                        contents[c.frame_index], c.crop_box, video.video_id, c.frame_index
                    )
                    for c in rec.crops
                ]
                rec.embeddings = np.stack(vectors)
                if rec.crops and tracks_dir is not None:
                    base = out_path.parent
                    for crop in rec.crops:
                        if crop.image:
                            crop.image = os.path.relpath(Path(tracks_dir) / crop.image, base)
                index.ingest(rec)
    elif source == "gt":
        for video in selected:
            crops_doc = json.loads(manifest.resolve(video.gt_crops).read_text())
            embeddings = read_tensor(manifest.resolve(video.gt_embeddings))
            for seq in crops_doc["sequences"]:
                crops = [
                    CropRef(
                        frame_index=c["frame_index"],
                        bbox=tuple(c["bbox"]),
                        crop_box=tuple(c["crop_box"]),
                        centroid=tuple(c["centroid"]),
                    )
                    for c in seq["crops"]
                ]
                rows = [c["row"] for c in seq["crops"]]
                index.ingest(
                    SequenceRecord(
                        sequence_id=seq["sequence_id"],
                        source_video=video.video_id,
                        crops=crops,
                        embeddings=embeddings[rows],
                    )
                )
    else:
        raise InputError("source must be 'pipeline' or 'gt'")
    index.save(out_path)
    return {"sequences": len(index), "vectors": index.num_vectors, "snapshot": str(out_path)}
