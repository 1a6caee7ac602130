"""Corpus manifests: what a dataset on disk looks like.

A manifest is one JSON document; every path inside it is relative to the
manifest's directory. Loading validates the whole corpus once: referenced
files must exist and pass their header checks, frame indices must be
contiguous per video, and score tensors must agree with the declared class
list.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoder import ContentEncoder
from .errors import FormatError
from .tensorfile import read_tensor, tensor_header

MANIFEST_FORMAT = "oodr-corpus"
MANIFEST_VERSION = 1


@dataclass
class FrameEntry:
    index: int
    score_tensor: str
    gt_instances: str | None = None
    gt_road: str | None = None
    image: str | None = None


@dataclass
class VideoEntry:
    video_id: str
    frames: list[FrameEntry]
    split: str = "eval"
    gt_tracks: str | None = None
    gt_crops: str | None = None
    gt_embeddings: str | None = None
    gt_frame_embeddings: str | None = None
    instance_classes: dict[str, str] = field(default_factory=dict)


@dataclass
class CorpusManifest:
    base_dir: Path
    dataset: str
    frame_rate: float
    known_classes: list[str]
    road_index: int
    obstacle_classes: list[str]
    vocabulary: str
    videos: list[VideoEntry]
    pipeline_config: dict | None = None
    synthetic: dict | None = None

    def resolve(self, rel: str) -> Path:
        return self.base_dir / rel

    @property
    def num_known_classes(self) -> int:
        return len(self.known_classes)

    def video(self, video_id: str) -> VideoEntry:
        for v in self.videos:
            if v.video_id == video_id:
                return v
        raise KeyError(video_id)

    def select_videos(self, videos: list[str] | None = None, split: str | None = None):
        out = self.videos
        if split is not None:
            out = [v for v in out if v.split == split]
        if videos:
            wanted = set(videos)
            out = [v for v in out if v.video_id in wanted]
        return out

    def frame_shape(self) -> tuple[int, int]:
        _, dims = tensor_header(self.resolve(self.videos[0].frames[0].score_tensor))
        return dims[0], dims[1]

    def load_scores(self, video: VideoEntry, frame: FrameEntry) -> np.ndarray:
        return read_tensor(self.resolve(frame.score_tensor))

    def encoder(self) -> ContentEncoder:
        """The corpus's deterministic content encoder (synthetic corpora
        only)."""
        if not self.synthetic or "encoder" not in self.synthetic:
            raise FormatError("this corpus does not define a content encoder")
        enc = self.synthetic["encoder"]
        from .vocabulary import Vocabulary

        vocab = Vocabulary.load(self.resolve(self.vocabulary))
        vectors = np.stack([vocab.resolve(name) for name in self.obstacle_classes])
        return ContentEncoder(
            class_vectors=vectors,
            background_vector=np.asarray(enc["background_vector"], dtype=np.float64),
            noise_scale=float(enc["noise_scale"]),
            seed=int(enc["seed"]),
        )


def _check_file(manifest_dir: Path, rel: str, kind: str, where: str) -> Path:
    path = manifest_dir / rel
    if not path.is_file():
        raise FormatError(f"{where}: missing {kind} file {path}")
    return path


def load_manifest(path: str | Path) -> CorpusManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    if doc.get("format") != MANIFEST_FORMAT:
        raise FormatError(f"{path}: not a corpus manifest")
    if doc.get("version") != MANIFEST_VERSION:
        raise FormatError(f"{path}: unsupported manifest version {doc.get('version')}")

    base = path.parent
    classes = doc["classes"]
    videos = []
    for vdoc in doc["videos"]:
        frames = [
            FrameEntry(
                index=int(f["index"]),
                score_tensor=f["score_tensor"],
                gt_instances=f.get("gt_instances"),
                gt_road=f.get("gt_road"),
                image=f.get("image"),
            )
            for f in vdoc["frames"]
        ]
        videos.append(
            VideoEntry(
                video_id=vdoc["video_id"],
                frames=frames,
                split=vdoc.get("split", "eval"),
                gt_tracks=vdoc.get("gt_tracks"),
                gt_crops=vdoc.get("gt_crops"),
                gt_embeddings=vdoc.get("gt_embeddings"),
                gt_frame_embeddings=vdoc.get("gt_frame_embeddings"),
                instance_classes=vdoc.get("instance_classes", {}),
            )
        )

    manifest = CorpusManifest(
        base_dir=base,
        dataset=doc["dataset"],
        frame_rate=float(doc.get("frame_rate", 0.0)),
        known_classes=list(classes["known"]),
        road_index=int(classes["road_index"]),
        obstacle_classes=list(classes.get("obstacle", [])),
        vocabulary=doc["vocabulary"],
        videos=videos,
        pipeline_config=doc.get("pipeline_config"),
        synthetic=doc.get("synthetic"),
    )
    if not 0 <= manifest.road_index < manifest.num_known_classes:
        raise FormatError(f"{path}: road index {manifest.road_index} outside the class list")

    _check_file(base, manifest.vocabulary, "vocabulary", manifest.dataset)
    k = manifest.num_known_classes
    shape: tuple[int, int] | None = None
    for video in manifest.videos:
        where = f"{path}: video {video.video_id}"
        if not video.frames:
            raise FormatError(f"{where}: has no frames")
        for prev, cur in zip(video.frames, video.frames[1:]):
            if cur.index != prev.index + 1:
                raise FormatError(
                    f"{where}: frame indices must be contiguous, gap between "
                    f"{prev.index} and {cur.index}"
                )
        for frame in video.frames:
            p = _check_file(base, frame.score_tensor, "score tensor", where)
            dtype, dims = tensor_header(p)
            if len(dims) != 3 or dtype != np.dtype("<f4"):
                raise FormatError(f"{where}: {p} is not an H*W*K float32 tensor")
            if dims[2] != k:
                raise FormatError(
                    f"{where}: {p} has {dims[2]} classes, manifest declares {k}"
                )
            if shape is None:
                shape = (dims[0], dims[1])
            elif (dims[0], dims[1]) != shape:
                raise FormatError(f"{where}: {p} frame shape {dims[:2]} differs from {shape}")
            for rel, kind, want_dims in (
                (frame.gt_instances, "GT instance mask", 2),
                (frame.gt_road, "GT road mask", 2),
                (frame.image, "image", 2),
            ):
                if rel is None:
                    continue
                fp = _check_file(base, rel, kind, where)
                fd, fdims = tensor_header(fp)
                if len(fdims) != want_dims or (fdims[0], fdims[1]) != shape:
                    raise FormatError(f"{where}: {fp} shape {fdims} does not match frames {shape}")
        for rel, kind in (
            (video.gt_tracks, "GT tracks"),
            (video.gt_crops, "GT crop sidecar"),
        ):
            if rel is not None:
                _check_file(base, rel, kind, where)
        for rel in (video.gt_embeddings, video.gt_frame_embeddings):
            if rel is not None:
                tensor_header(_check_file(base, rel, "embedding tensor", where))
    return manifest


def save_manifest_doc(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
