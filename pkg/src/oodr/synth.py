"""Deterministic synthetic corpora for end-to-end testing.

Builds desk-scale driving videos: a road band with moving obstacle
squares, a sidewalk strip the (deliberately imperfect) road segmentation
spills into, and optional static off-road "decoy" blobs that act as
injected false positives. Class-score tensors are constructed through the
mask-fusion path, so obstacle pixels genuinely score low on every known
class rather than being painted anomalous directly.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .encoder import ContentEncoder, orthonormal_centroids
from .errors import InputError
from .manifest import MANIFEST_FORMAT, MANIFEST_VERSION, CorpusManifest, load_manifest
from .scoring import MaskPredictionSet, fuse_masks
from .tensorfile import read_tensor, write_tensor
from .tracker import expand_bbox
from .vocabulary import Vocabulary

# known-class score construction: each region is backed by four identical
# mask pairs so the true class accumulates 4 * 0.6 = 2.4 while the others
# get 4 * (0.3 / (K-1)); anomalous squares are backed by two pairs whose
# probability mass sits on the void class.
REGION_PAIRS = 4
REGION_OWN_PROB = 0.6
REGION_OTHER_MASS = 0.3
REGION_VOID_PROB = 0.1


@dataclass
class SyntheticSpec:
    seed: int = 0
    width: int = 128
    height: int = 96
    num_videos: int = 4
    num_train_videos: int = 1
    frames_per_video: int = 40
    frame_rate: float = 10.0
    known_classes: tuple[str, ...] = ("road", "terrain", "sky")
    road_index: int = 0
    obstacle_classes: tuple[str, ...] = ("dog", "ball", "box")
    obstacles_per_video: int = 3
    half_size_min: int = 4
    half_size_max: int = 5
    size_ramp: bool = False  # halves interpolate start -> end over the video
    speed_min: float = 0.2
    speed_max: float = 0.8
    anomaly_contrast: float = 1.0
    # tiny full-length static tracks; they embed weakly and are the
    # material for far-away / low-score retrieval behavior
    faint_per_class: int = 0
    faint_half: int = 1
    # decoys: static off-road anomalies inside the predicted-road spill
    false_positive_rate: float = 0.0  # decoys per video
    fp_hard_fraction: float = 0.0
    fp_content_fraction: float = 0.45
    fp_half: int = 4
    fp_contrast: float = 0.25
    fp_hard_contrast: float = 0.9
    embedding_dim: int = 16
    min_centroid_separation: float = 0.5  # required min (1 - |cos|) between centroids
    embedding_noise: float = 0.0
    score_noise: float = 0.0
    enforce_margin: bool = True

    def validate(self) -> None:
        if self.width < 64 or self.height < 48:
            raise InputError("frame size too small; need at least 64x48")
        if self.num_videos < 1 or self.frames_per_video < 1:
            raise InputError("need at least one video and one frame")
        if not 0 <= self.num_train_videos <= self.num_videos:
            raise InputError("num_train_videos out of range")
        if len(self.known_classes) < 2:
            raise InputError("need at least two known classes")
        if not 0 <= self.road_index < len(self.known_classes):
            raise InputError("road_index outside known classes")
        if not self.obstacle_classes:
            raise InputError("need at least one obstacle class")
        for half in (self.half_size_min, self.half_size_max, self.faint_half, self.fp_half):
            if half < 1:
                raise InputError("obstacle radius below 1 px")
        if self.half_size_min > self.half_size_max:
            raise InputError("half_size_min > half_size_max")
        if not 0.0 <= self.fp_content_fraction < 0.5:
            raise InputError("fp_content_fraction must stay below 0.5 (decoys must not "
                             "majority-match any query)")
        if not 0.0 < self.anomaly_contrast <= 1.0:
            raise InputError("anomaly_contrast must lie in (0, 1]")
        if self.embedding_dim < len(self.obstacle_classes) + 1:
            raise InputError("embedding_dim must exceed the number of obstacle classes")
        if not 0.0 <= self.embedding_noise < 0.3:
            raise InputError("embedding_noise must lie in [0, 0.3)")
        if not 0.0 <= self.score_noise <= 0.08:
            raise InputError("score_noise must lie in [0, 0.08] to keep the anomaly "
                             "threshold margins valid")
        if not 0.0 <= self.min_centroid_separation <= 1.0:
            raise InputError("min_centroid_separation must lie in [0, 1]")


@dataclass
class _Layout:
    sky_end: int
    spill_top: int
    road_top: int
    road_bottom: int  # exclusive

    @classmethod
    def for_spec(cls, spec: SyntheticSpec) -> "_Layout":
        h = spec.height
        road_top = int(0.45 * h)
        layout = cls(
            sky_end=int(0.25 * h),
            spill_top=road_top - (2 * spec.fp_half + 3),
            road_top=road_top,
            road_bottom=int(0.95 * h),
        )
        if layout.spill_top <= layout.sky_end:
            raise InputError("frame too short for the sidewalk spill strip")
        return layout


@dataclass
class _TrackPlan:
    track_id: int  # GT instance id, 1-based
    class_index: int
    halves: list[int]  # per frame
    rows: list[int]  # center row per frame
    cols: list[int]  # center col per frame
    faint: bool = False


@dataclass
class _DecoyPlan:
    class_index: int
    half: int
    row: int
    col: int
    contrast: float
    content_fraction: float


def _anomaly_q_target(spec: SyntheticSpec, contrast: float) -> np.ndarray:
    k = len(spec.known_classes)
    base = 0.05 + (1.0 - contrast) * 0.45
    q = np.full(k, base)
    q[(spec.road_index + 1) % k] = base + 0.02  # argmax away from road
    return q


def _square_mask(h: int, w: int, row: int, col: int, half: int) -> np.ndarray:
    m = np.zeros((h, w), dtype=np.float32)
    m[row - half : row + half + 1, col - half : col + half + 1] = 1.0
    return m


def _square_bbox(row: int, col: int, half: int) -> tuple[int, int, int, int]:
    return (row - half, col - half, row + half, col + half)


def _plan_video(
    spec: SyntheticSpec, layout: _Layout, rng: np.random.Generator, video_index: int
) -> tuple[list[_TrackPlan], list[_DecoyPlan]]:
    t_frames = spec.frames_per_video
    c = len(spec.obstacle_classes)
    w = spec.width
    # obstacles and decoys act in the left column zone; faint tracks get
    # their own zone on the right so no crop box ever sees foreign content
    faint_zone = 2 * spec.faint_half + 1 + 18
    action_hi = w - faint_zone - 14

    tracks: list[_TrackPlan] = []
    next_id = 1

    # ramped tracks always reach a strong size: the far end of a trajectory
    # may be tiny, but every obstacle comes near the camera at some point
    lo_half = (
        max(spec.half_size_min, spec.half_size_max - 1)
        if spec.size_ramp
        else spec.half_size_min
    )
    halves = [int(rng.integers(lo_half, spec.half_size_max + 1))
              for _ in range(spec.obstacles_per_video)]
    budget = (layout.road_bottom - 2) - (layout.road_top + 4)
    while sum(2 * h + 1 + 4 for h in halves) > budget:
        i = halves.index(max(halves))
        if halves[i] <= spec.half_size_min:
            raise InputError("road band too short for the requested obstacle count/sizes")
        halves[i] -= 1

    cursor = layout.road_top + 4
    for i, half_max in enumerate(halves):
        center_row = cursor + half_max
        cursor += 2 * half_max + 1 + 4
        if spec.size_ramp and half_max > spec.half_size_min:
            start, end = spec.half_size_min, half_max
            if rng.random() < 0.5:
                start, end = end, start
            per_frame = [
                int(round(start + (end - start) * t / max(1, t_frames - 1)))
                for t in range(t_frames)
            ]
        else:
            per_frame = [half_max] * t_frames
        lo = half_max + 4
        hi = action_hi - half_max
        speed = float(rng.uniform(spec.speed_min, spec.speed_max))
        if speed * (t_frames - 1) > hi - lo:
            speed = (hi - lo) / (t_frames - 1)
        if rng.random() < 0.5:
            speed = -speed
        start_lo = lo if speed >= 0 else lo - speed * (t_frames - 1)
        start_hi = hi - speed * (t_frames - 1) if speed >= 0 else hi
        col0 = float(rng.uniform(start_lo, start_hi))
        cols = [int(round(col0 + speed * t)) for t in range(t_frames)]
        tracks.append(
            _TrackPlan(
                track_id=next_id,
                class_index=(video_index * spec.obstacles_per_video + i) % c,
                halves=per_frame,
                rows=[center_row] * t_frames,
                cols=cols,
            )
        )
        next_id += 1

    faint_col = w - faint_zone // 2 - 7
    faint_row = layout.road_top + spec.faint_half + 5
    for ci in range(c):
        for _ in range(spec.faint_per_class):
            if faint_row + spec.faint_half >= layout.road_bottom - 1:
                raise InputError("road band too short for the requested faint tracks")
            tracks.append(
                _TrackPlan(
                    track_id=next_id,
                    class_index=ci,
                    halves=[spec.faint_half] * t_frames,
                    rows=[faint_row] * t_frames,
                    cols=[faint_col] * t_frames,
                    faint=True,
                )
            )
            next_id += 1
            faint_row += 2 * spec.faint_half + 1 + 10

    decoys: list[_DecoyPlan] = []
    n_decoys = int(round(spec.false_positive_rate))
    if n_decoys:
        n_hard = int(round(n_decoys * spec.fp_hard_fraction))
        pitch = 2 * spec.fp_half + 1 + 4
        slots = list(range(spec.fp_half + 4, action_hi - spec.fp_half, pitch))
        if n_decoys > len(slots):
            raise InputError(f"no room for {n_decoys} decoys per video")
        chosen = sorted(rng.choice(len(slots), size=n_decoys, replace=False).tolist())
        row = layout.road_top - spec.fp_half - 2
        for j, slot in enumerate(chosen):
            hard = j < n_hard
            decoys.append(
                _DecoyPlan(
                    class_index=(video_index + j) % c,
                    half=spec.fp_half,
                    row=row,
                    col=slots[slot],
                    contrast=spec.fp_hard_contrast if hard else spec.fp_contrast,
                    content_fraction=spec.fp_content_fraction,
                )
            )
    return tracks, decoys


def _render_frame(
    spec: SyntheticSpec,
    layout: _Layout,
    tracks: list[_TrackPlan],
    decoys: list[_DecoyPlan],
    frame: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Returns (score tensor q, gt instance mask, gt road mask, content map)."""
    h, w = spec.height, spec.width
    k = len(spec.known_classes)

    anomaly_masks = []
    anomaly_targets = []
    gt_instances = np.zeros((h, w), dtype=np.uint8)
    content = np.zeros((h, w), dtype=np.uint8)
    for t in tracks:
        half = t.halves[frame]
        m = _square_mask(h, w, t.rows[frame], t.cols[frame], half)
        anomaly_masks.append(m)
        anomaly_targets.append(_anomaly_q_target(spec, spec.anomaly_contrast))
        sq = m > 0
        gt_instances[sq] = t.track_id
        content[sq] = t.class_index + 1
    for d in decoys:
        m = _square_mask(h, w, d.row, d.col, d.half)
        anomaly_masks.append(m)
        anomaly_targets.append(_anomaly_q_target(spec, d.contrast))
        rows, cols = np.nonzero(m)
        n_paint = int(d.content_fraction * rows.size)
        content[rows[:n_paint], cols[:n_paint]] = d.class_index + 1

    occupied = np.zeros((h, w), dtype=bool)
    for m in anomaly_masks:
        occupied |= m > 0

    region_masks = np.zeros((3, h, w), dtype=np.float32)
    region_masks[0, : layout.sky_end, :] = 1.0  # sky
    region_masks[1, layout.sky_end : layout.spill_top, :] = 1.0  # terrain
    region_masks[1, layout.road_bottom :, :] = 1.0
    region_masks[2, layout.spill_top : layout.road_bottom, :] = 1.0  # road + spill
    region_masks[:, occupied] = 0.0
    region_class = {0: (spec.road_index + 2) % k if k > 2 else (spec.road_index + 1) % k,
                    1: (spec.road_index + 1) % k,
                    2: spec.road_index}

    masks = []
    probs = []
    other = REGION_OTHER_MASS / (k - 1)
    for ri in range(3):
        p = np.full(k + 1, other)
        p[region_class[ri]] = REGION_OWN_PROB
        p[k] = REGION_VOID_PROB
        for _ in range(REGION_PAIRS):
            masks.append(region_masks[ri])
            probs.append(p)
    for m, q_target in zip(anomaly_masks, anomaly_targets):
        p = np.zeros(k + 1)
        p[:k] = q_target / 2.0
        p[k] = 1.0 - p[:k].sum()
        masks.append(m)
        masks.append(m)
        probs.append(p)
        probs.append(p)

    mask_arr = np.stack(masks)
    if spec.score_noise > 0.0:
        mask_arr = np.clip(
            mask_arr + rng.uniform(-spec.score_noise, spec.score_noise, mask_arr.shape),
            0.0,
            1.0,
        ).astype(np.float32)
    q = fuse_masks(MaskPredictionSet(mask_arr, np.stack(probs).astype(np.float32)))

    gt_road = np.zeros((h, w), dtype=np.uint8)
    gt_road[layout.road_top : layout.road_bottom, :] = 1
    return q, gt_instances, gt_road, content


def _recommended_config(spec: SyntheticSpec, clean_tau: float) -> PipelineConfig:
    k = len(spec.known_classes)
    in_dist_rba = -(math.tanh(REGION_PAIRS * REGION_OWN_PROB)
                    + (k - 1) * math.tanh(REGION_PAIRS * REGION_OTHER_MASS / (k - 1)))
    contrasts = [spec.anomaly_contrast]
    if round(spec.false_positive_rate):
        contrasts.append(spec.fp_contrast)
        if round(spec.false_positive_rate * spec.fp_hard_fraction):
            contrasts.append(spec.fp_hard_contrast)
    weakest = min(contrasts)
    q_weak = _anomaly_q_target(spec, weakest)
    weakest_rba = -float(np.sum(np.tanh(q_weak)))
    threshold = 0.5 * (in_dist_rba + weakest_rba)
    max_side = 2 * max(spec.half_size_max, spec.fp_half if round(spec.false_positive_rate) else 1) + 1
    return PipelineConfig(
        anomaly_threshold=round(threshold, 6),
        roi_radius=math.ceil(max_side / 2) + 1,
        retrieval_tau=round(clean_tau, 6),
    )


def generate_synthetic(spec: SyntheticSpec, out_dir: str | Path) -> CorpusManifest:
    """Write a complete corpus under out_dir and return its loaded
    manifest. Two runs with the same spec produce byte-identical trees."""
    spec.validate()
    layout = _Layout.for_spec(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    c = len(spec.obstacle_classes)
    centroids = orthonormal_centroids(c + 1, spec.embedding_dim, spec.seed + 7919)
    class_vectors = centroids[:c]
    background = centroids[c]
    vocab_path = out / "vocabulary.json"
    Vocabulary.save_terms(
        {name: class_vectors[i] for i, name in enumerate(spec.obstacle_classes)},
        vocab_path,
        spec.embedding_dim,
    )
    encoder = ContentEncoder(class_vectors, background, spec.embedding_noise, spec.seed)

    # crop geometry must match what the pipeline will cut, so GT crops use
    # the same helper and the recommended config's padding
    base_cfg = PipelineConfig()
    pad_frac, min_size = base_cfg.crop_pad_frac, base_cfg.crop_min_size

    root_ss = np.random.SeedSequence(spec.seed)
    video_seeds = root_ss.spawn(spec.num_videos)

    videos_doc = []
    best_scores: list[tuple[bool, float]] = []  # (faint, best own-class score)
    max_cross = 0.0
    for vi in range(spec.num_videos):
        video_id = f"video_{vi:03d}"
        vdir = out / video_id
        vdir.mkdir(parents=True, exist_ok=True)
        rng = np.random.default_rng(video_seeds[vi])
        tracks, decoys = _plan_video(spec, layout, rng, vi)

        frames_doc = []
        contents = []
        for f in range(spec.frames_per_video):
            q, gt_inst, gt_road, content = _render_frame(spec, layout, tracks, decoys, f, rng)
            write_tensor(q, vdir / f"score_{f:04d}.oodt")
            write_tensor(gt_inst, vdir / f"gt_{f:04d}.oodt")
            write_tensor(gt_road, vdir / f"road_{f:04d}.oodt")
            write_tensor(content, vdir / f"content_{f:04d}.oodt")
            contents.append(content)
            frames_doc.append(
                {
                    "index": f,
                    "score_tensor": f"{video_id}/score_{f:04d}.oodt",
                    "gt_instances": f"{video_id}/gt_{f:04d}.oodt",
                    "gt_road": f"{video_id}/road_{f:04d}.oodt",
                    "image": f"{video_id}/content_{f:04d}.oodt",
                }
            )

        # ground-truth tracks, crops and embeddings
        tracks_doc = []
        crops_doc = []
        emb_rows = []
        for t in tracks:
            obs_doc = []
            crop_entries = []
            sims = []
            for f in range(spec.frames_per_video):
                half = t.halves[f]
                bbox = _square_bbox(t.rows[f], t.cols[f], half)
                area = (2 * half + 1) ** 2
                obs_doc.append(
                    {
                        "frame": f,
                        "bbox": list(bbox),
                        "centroid": [float(t.rows[f]), float(t.cols[f])],
                        "area": area,
                    }
                )
                crop_box = expand_bbox(bbox, (spec.height, spec.width), pad_frac, min_size)
                vec = encoder.embed_box(contents[f], crop_box, video_id, f)
                emb_rows.append(vec)
                sims.append(float(vec.astype(np.float64) @ class_vectors[t.class_index]))
                crop_entries.append(
                    {
                        "frame_index": f,
                        "bbox": list(bbox),
                        "crop_box": list(crop_box),
                        "centroid": [float(t.rows[f]), float(t.cols[f])],
                        "row": len(emb_rows) - 1,
                    }
                )
            tracks_doc.append(
                {
                    "track_id": t.track_id,
                    "class": spec.obstacle_classes[t.class_index],
                    "observations": obs_doc,
                }
            )
            crops_doc.append(
                {
                    "sequence_id": f"{video_id}:gt{t.track_id:04d}",
                    "class": spec.obstacle_classes[t.class_index],
                    "crops": crop_entries,
                }
            )
            best_scores.append((t.faint, max(sims)))
            for other_ci in range(c):
                if other_ci == t.class_index:
                    continue
                row0 = crop_entries[0]["row"]
                cross = max(
                    float(emb_rows[row0 + j].astype(np.float64) @ class_vectors[other_ci])
                    for j in range(len(crop_entries))
                )
                max_cross = max(max_cross, cross)

        (vdir / "gt_tracks.json").write_text(
            json.dumps({"video_id": video_id, "tracks": tracks_doc}, indent=2, sort_keys=True)
            + "\n"
        )
        (vdir / "gt_crops.json").write_text(
            json.dumps({"video_id": video_id, "sequences": crops_doc}, indent=2, sort_keys=True)
            + "\n"
        )
        write_tensor(np.stack(emb_rows), vdir / "gt_embeddings.oodt")
        frame_embs = np.stack(
            [
                encoder.embed_box(
                    contents[f], (0, 0, spec.height - 1, spec.width - 1), video_id, f
                )
                for f in range(spec.frames_per_video)
            ]
        )
        write_tensor(frame_embs, vdir / "gt_frame_embeddings.oodt")

        videos_doc.append(
            {
                "video_id": video_id,
                "split": "train" if vi < spec.num_train_videos else "eval",
                "frames": frames_doc,
                "gt_tracks": f"{video_id}/gt_tracks.json",
                "gt_crops": f"{video_id}/gt_crops.json",
                "gt_embeddings": f"{video_id}/gt_embeddings.oodt",
                "gt_frame_embeddings": f"{video_id}/gt_frame_embeddings.oodt",
                "instance_classes": {
                    str(t.track_id): spec.obstacle_classes[t.class_index] for t in tracks
                },
            }
        )

    # documented retrieval threshold: midpoint of the worst-case bands
    dev = encoder.noise_deviation_bound()
    solid = [s for faint, s in best_scores if not faint] or [s for _, s in best_scores]
    min_pos = min(solid)
    clean_tau = 0.5 * ((max_cross + dev) + (min_pos - dev))
    if spec.enforce_margin:
        margin = (min_pos - dev) - (max_cross + dev)
        if margin <= 2.0 * dev:
            raise InputError(
                f"retrieval margin {margin:.4f} does not clear twice the noise deviation "
                f"bound {dev:.4f}; lower embedding_noise or use larger obstacles"
            )

    config = _recommended_config(spec, clean_tau)
    manifest_doc = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "dataset": f"synthetic-{spec.seed}",
        "frame_rate": spec.frame_rate,
        "classes": {
            "known": list(spec.known_classes),
            "road_index": spec.road_index,
            "obstacle": list(spec.obstacle_classes),
        },
        "vocabulary": "vocabulary.json",
        "pipeline_config": config.to_json(),
        "synthetic": {
            "spec": asdict(spec),
            "clean_tau": clean_tau,
            "encoder": {
                "noise_scale": spec.embedding_noise,
                "seed": spec.seed,
                "background_vector": [float(x) for x in background],
            },
        },
        "videos": videos_doc,
    }
    (out / "manifest.json").write_text(json.dumps(manifest_doc, indent=2, sort_keys=True) + "\n")
    return load_manifest(out / "manifest.json")


def validate_corpus(manifest: CorpusManifest) -> list[str]:
    """Independent self-consistency check of a synthetic corpus: GT masks,
    GT tracks, crop sidecars and embeddings must agree. Returns a list of
    problems (empty = consistent)."""
    problems: list[str] = []
    vocab = Vocabulary.load(manifest.resolve(manifest.vocabulary))
    if sorted(vocab.terms()) != sorted(manifest.obstacle_classes):
        problems.append("vocabulary terms do not match the obstacle class list")
    for video in manifest.videos:
        where = video.video_id
        tracks = json.loads(manifest.resolve(video.gt_tracks).read_text())["tracks"]
        crops = json.loads(manifest.resolve(video.gt_crops).read_text())["sequences"]
        embeddings = read_tensor(manifest.resolve(video.gt_embeddings))
        by_frame: dict[int, dict[int, dict]] = {}
        for t in tracks:
            if manifest.video(video.video_id).instance_classes.get(str(t["track_id"])) != t["class"]:
                problems.append(f"{where}: track {t['track_id']} class disagrees with manifest")
            for obs in t["observations"]:
                by_frame.setdefault(obs["frame"], {})[t["track_id"]] = obs
        for frame in video.frames:
            gt = read_tensor(manifest.resolve(frame.gt_instances))
            ids = sorted(int(i) for i in np.unique(gt) if i != 0)
            expect = sorted(by_frame.get(frame.index, {}))
            if ids != expect:
                problems.append(
                    f"{where} frame {frame.index}: mask instances {ids} != tracked {expect}"
                )
                continue
            for tid in ids:
                obs = by_frame[frame.index][tid]
                rows, cols = np.nonzero(gt == tid)
                bbox = [int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max())]
                if bbox != list(obs["bbox"]) or rows.size != obs["area"]:
                    problems.append(
                        f"{where} frame {frame.index} instance {tid}: geometry mismatch"
                    )
                centroid = [float(rows.mean()), float(cols.mean())]
                if not np.allclose(centroid, obs["centroid"], atol=1e-9):
                    problems.append(
                        f"{where} frame {frame.index} instance {tid}: centroid mismatch"
                    )
        total_crops = 0
        for seq in crops:
            tid = int(seq["sequence_id"].rsplit("gt", 1)[1])
            track = next(t for t in tracks if t["track_id"] == tid)
            if len(seq["crops"]) != len(track["observations"]):
                problems.append(f"{where}: sequence {seq['sequence_id']} crop count mismatch")
            for crop, obs in zip(seq["crops"], track["observations"]):
                if crop["bbox"] != obs["bbox"] or crop["frame_index"] != obs["frame"]:
                    problems.append(
                        f"{where}: sequence {seq['sequence_id']} crop/observation mismatch"
                    )
            total_crops += len(seq["crops"])
        if embeddings.shape[0] != total_crops:
            problems.append(
                f"{where}: {embeddings.shape[0]} embedding rows for {total_crops} crops"
            )
    return problems
