"""Pipeline configuration, embedded into every artifact for provenance."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigMismatchError, InputError


@dataclass
class PipelineConfig:
    # scoring / segmentation
    anomaly_threshold: float | None = None  # None -> -0.5 * K at run time
    # meta classification
    meta_model: str | None = None
    meta_cutoff: float = 0.5
    # region of interest
    roi_radius: int | None = None  # None -> 15 px scaled from 1024-wide frames
    # tracker
    iou_min: float = 0.25
    center_max_frac: float = 0.05  # of the frame diagonal
    max_gap: int = 3
    min_track_length: int = 10
    regression_window: int = 5
    crop_pad_frac: float = 0.1
    crop_min_size: int = 16
    track_length_counting: str = "observed"
    # retrieval
    retrieval_tau: float = 0.25
    # evaluation
    match_radius_frac: float = 0.05  # of the frame diagonal
    f1_thresholds: list[float] = field(
        default_factory=lambda: [round(0.25 + 0.05 * i, 2) for i in range(11)]
    )

    def validate(self) -> None:
        if not -1.0 <= self.retrieval_tau <= 1.0:
            raise InputError(f"retrieval_tau must lie in [-1, 1], got {self.retrieval_tau}")
        if not 0.0 <= self.meta_cutoff <= 1.0:
            raise InputError(f"meta_cutoff must lie in [0, 1], got {self.meta_cutoff}")
        if self.roi_radius is not None and self.roi_radius < 0:
            raise InputError("roi_radius must be >= 0")
        if self.iou_min < 0 or self.max_gap < 0 or self.min_track_length < 1:
            raise InputError("tracker thresholds out of range")
        if self.track_length_counting not in ("observed", "spanned"):
            raise InputError("track_length_counting must be 'observed' or 'spanned'")

    def resolve_threshold(self, num_classes: int) -> float:
        if self.anomaly_threshold is not None:
            return self.anomaly_threshold
        return -0.5 * num_classes

    def resolve_roi_radius(self, width: int) -> int:
        if self.roi_radius is not None:
            return self.roi_radius
        return max(1, round(15 * width / 1024))

    def center_max_px(self, frame_shape: tuple[int, int]) -> float:
        return self.center_max_frac * math.hypot(*frame_shape)

    def match_radius_px(self, frame_shape: tuple[int, int]) -> float:
        return self.match_radius_frac * math.hypot(*frame_shape)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "PipelineConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise InputError(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        return cls.from_json(json.loads(Path(path).read_text()))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")


def check_same_config(configs: dict[str, dict], force: bool = False) -> None:
    """Refuse to mix artifacts from different configurations unless forced."""
    if force or len(configs) < 2:
        return
    items = sorted(configs.items())
    _, first = items[0]
    for name, other in items[1:]:
        if other != first:
            raise ConfigMismatchError(
                f"artifact {name!r} was produced under a different pipeline config than "
                f"{items[0][0]!r}; rerun the stages with one config or pass force"
            )
