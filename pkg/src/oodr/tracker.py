"""Tracking-by-detection over per-frame OoD segments.

Greedy IoU + center-distance association, least-squares center
extrapolation over gaps, and a minimum-length filter that turns surviving
tracks into croppable obstacle sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .scoring import SegmentInstance


@dataclass
class TrackerParams:
    iou_min: float = 0.25
    center_max: float = 8.0  # px; callers usually derive 5% of the frame diagonal
    max_gap: int = 3
    min_track_length: int = 10
    regression_window: int = 5
    crop_pad_frac: float = 0.1
    crop_min_size: int = 16
    # "observed" counts frames with a detection; "spanned" counts last-first+1
    length_counting: str = "observed"


@dataclass
class Track:
    track_id: int
    observations: list[tuple[int, SegmentInstance]]
    predicted_centers: dict[int, tuple[float, float]] = field(default_factory=dict)
    gap_count: int = 0
    state: str = "active"

    @property
    def last_frame(self) -> int:
        return self.observations[-1][0]

    @property
    def last_centroid(self) -> tuple[float, float]:
        return self.observations[-1][1].centroid

    @property
    def last_segment(self) -> SegmentInstance:
        return self.observations[-1][1]


def segment_iou(a: SegmentInstance, b: SegmentInstance) -> float:
    """Pixel-set intersection over union of two segments."""
    at, al, ab, ar = a.bbox
    bt, bl, bb, br = b.bbox
    if ab < bt or bb < at or ar < bl or br < al:
        return 0.0
    top, left = min(at, bt), min(al, bl)
    bottom, right = max(ab, bb), max(ar, br)
    shape = (bottom - top + 1, right - left + 1)
    ma = np.zeros(shape, dtype=bool)
    mb = np.zeros(shape, dtype=bool)
    ma[a.pixels[:, 0] - top, a.pixels[:, 1] - left] = True
    mb[b.pixels[:, 0] - top, b.pixels[:, 1] - left] = True
    inter = int((ma & mb).sum())
    if inter == 0:
        return 0.0
    return inter / float(a.area + b.area - inter)


def predict_center(track: Track, frame: int, window: int = 5) -> tuple[float, float]:
    """Least-squares line through the last `window` observed centroids,
    evaluated at `frame`; falls back to the last centroid with < 2
    observations."""
    obs = track.observations[-window:]
    if len(obs) < 2:
        return track.last_centroid
    frames = np.array([f for f, _ in obs], dtype=np.float64)
    rows = np.array([s.centroid[0] for _, s in obs])
    cols = np.array([s.centroid[1] for _, s in obs])
    t = frames - frames.mean()
    denom = float(t @ t)
    r = rows.mean() + (t @ rows) / denom * (frame - frames.mean())
    c = cols.mean() + (t @ cols) / denom * (frame - frames.mean())
    return (float(r), float(c))


def _reference_center(track: Track, frame: int, window: int) -> tuple[float, float]:
    # last observed centroid while the track is current; extrapolated when
    # it has been missing
    if track.gap_count > 0:
        return predict_center(track, frame, window)
    return track.last_centroid


def match_segments(
    active_tracks: list[Track],
    segments: list[SegmentInstance],
    iou_min: float,
    center_max: float,
    frame: int | None = None,
    regression_window: int = 5,
) -> list[tuple[int, int]]:
    """Greedy one-to-one (track index, segment index) assignment.

    Candidate pairs need IoU >= iou_min and center distance <= center_max;
    higher IoU wins, ties go to the smaller center distance, then to the
    older track id.
    """
    if frame is None and segments:
        frame = segments[0].frame_index
    candidates = []
    for ti, track in enumerate(active_tracks):
        ref = _reference_center(track, frame, regression_window) if frame is not None else track.last_centroid
        for si, seg in enumerate(segments):
            iou = segment_iou(track.last_segment, seg)
            if iou < iou_min:
                continue
            dist = math.hypot(seg.centroid[0] - ref[0], seg.centroid[1] - ref[1])
            if dist > center_max:
                continue
            candidates.append((-iou, dist, track.track_id, si, ti))
    candidates.sort()
    used_tracks: set[int] = set()
    used_segments: set[int] = set()
    assignment = []
    for _, _, _, si, ti in candidates:
        if ti in used_tracks or si in used_segments:
            continue
        used_tracks.add(ti)
        used_segments.add(si)
        assignment.append((ti, si))
    assignment.sort()
    return assignment


class Tracker:
    """Stateful per-video tracker; feed frames in order via step()."""

    def __init__(self, params: TrackerParams | None = None):
        self.params = params or TrackerParams()
        self.active: list[Track] = []
        self.terminated: list[Track] = []
        self._next_id = 0
        self._last_frame: int | None = None

    def step(self, frame_index: int, segments: list[SegmentInstance]) -> None:
        if self._last_frame is not None and frame_index <= self._last_frame:
            raise InputError(
                f"frame index went backwards: {frame_index} after {self._last_frame}"
            )
        for seg in segments:
            if seg.frame_index != frame_index:
                raise InputError(
                    f"segment carries frame {seg.frame_index}, step is for frame {frame_index}"
                )
        self._last_frame = frame_index

        p = self.params
        assignment = match_segments(
            self.active, segments, p.iou_min, p.center_max, frame_index, p.regression_window
        )
        matched_tracks = {ti for ti, _ in assignment}
        matched_segments = {si for _, si in assignment}

        for ti, si in assignment:
            track = self.active[ti]
            track.observations.append((frame_index, segments[si]))
            track.gap_count = 0

        survivors = []
        for ti, track in enumerate(self.active):
            if ti in matched_tracks:
                survivors.append(track)
                continue
            track.predicted_centers[frame_index] = predict_center(
                track, frame_index, p.regression_window
            )
            track.gap_count += 1
            if track.gap_count > p.max_gap:
                track.state = "terminated"
                self.terminated.append(track)
            else:
                survivors.append(track)
        self.active = survivors

        for si, seg in enumerate(segments):
            if si in matched_segments:
                continue
            self.active.append(Track(track_id=self._next_id, observations=[(frame_index, seg)]))
            self._next_id += 1

    def finish(self) -> list[Track]:
        """Terminate everything still active and return all tracks, oldest
        id first."""
        for track in self.active:
            track.state = "terminated"
            self.terminated.append(track)
        self.active = []
        self.terminated.sort(key=lambda t: t.track_id)
        return self.terminated


@dataclass
class CropRef:
    frame_index: int
    bbox: tuple[int, int, int, int]  # tight detection box, inclusive
    crop_box: tuple[int, int, int, int]  # padded box actually cut out
    centroid: tuple[float, float]
    image: str | None = None  # relative path to the stored crop, if any

    def to_json(self) -> dict:
        doc = {
            "frame_index": self.frame_index,
            "bbox": list(self.bbox),
            "crop_box": list(self.crop_box),
            "centroid": list(self.centroid),
        }
        if self.image is not None:
            doc["image"] = self.image
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "CropRef":
        return cls(
            frame_index=int(doc["frame_index"]),
            bbox=tuple(doc["bbox"]),
            crop_box=tuple(doc["crop_box"]),
            centroid=tuple(doc["centroid"]),
            image=doc.get("image"),
        )


@dataclass
class SequenceRecord:
    """A finalized obstacle sequence: the unit of retrieval."""

    sequence_id: str
    source_video: str
    crops: list[CropRef]
    embeddings: np.ndarray | None = None  # (len(crops), d) float32 when present

    @property
    def length(self) -> int:
        return len(self.crops)

    def to_json(self) -> dict:
        doc = {
            "sequence_id": self.sequence_id,
            "source_video": self.source_video,
            "length": self.length,
            "crops": [c.to_json() for c in self.crops],
        }
        if self.embeddings is not None:
            doc["embeddings"] = [[float(x) for x in row] for row in self.embeddings]
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "SequenceRecord":
        emb = doc.get("embeddings")
        return cls(
            sequence_id=doc["sequence_id"],
            source_video=doc["source_video"],
            crops=[CropRef.from_json(c) for c in doc["crops"]],
            embeddings=None if emb is None else np.asarray(emb, dtype=np.float32),
        )


def expand_bbox(
    bbox: tuple[int, int, int, int],
    frame_shape: tuple[int, int],
    pad_frac: float = 0.1,
    min_size: int = 16,
) -> tuple[int, int, int, int]:
    """Pad a tight bbox by pad_frac per side, enforce a minimum side, clamp
    to the frame."""
    top, left, bottom, right = bbox
    h, w = frame_shape
    box_h = bottom - top + 1
    box_w = right - left + 1
    pad_r = round(pad_frac * box_h)
    pad_c = round(pad_frac * box_w)
    top, bottom = top - pad_r, bottom + pad_r
    left, right = left - pad_c, right + pad_c
    grow_r = max(0, min_size - (bottom - top + 1))
    grow_c = max(0, min_size - (right - left + 1))
    top -= grow_r // 2
    bottom += grow_r - grow_r // 2
    left -= grow_c // 2
    right += grow_c - grow_c // 2
    # shift back inside the frame before clamping so the minimum size
    # survives at the borders when the frame allows it
    if top < 0:
        bottom, top = bottom - top, 0
    if left < 0:
        right, left = right - left, 0
    if bottom >= h:
        top, bottom = top - (bottom - h + 1), h - 1
    if right >= w:
        left, right = left - (right - w + 1), w - 1
    return (max(0, top), max(0, left), min(h - 1, bottom), min(w - 1, right))


def track_length(track: Track, counting: str = "observed") -> int:
    if counting == "spanned":
        return track.observations[-1][0] - track.observations[0][0] + 1
    return len(track.observations)


def finalize_tracks(
    tracks: list[Track],
    frame_shape: tuple[int, int],
    video_id: str,
    params: TrackerParams | None = None,
) -> list[SequenceRecord]:
    """Tracks with at least min_track_length observed frames become
    SequenceRecords; shorter ones are dropped. One crop per observation,
    none for gap frames."""
    p = params or TrackerParams()
    records = []
    for track in sorted(tracks, key=lambda t: t.track_id):
        if track_length(track, p.length_counting) < p.min_track_length:
            continue
        crops = [
            CropRef(
                frame_index=f,
                bbox=seg.bbox,
                crop_box=expand_bbox(seg.bbox, frame_shape, p.crop_pad_frac, p.crop_min_size),
                centroid=seg.centroid,
            )
            for f, seg in track.observations
        ]
        records.append(
            SequenceRecord(
                sequence_id=f"{video_id}:{track.track_id:04d}",
                source_video=video_id,
                crops=crops,
            )
        )
    return records
