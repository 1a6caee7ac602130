import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oodr import pipeline
from oodr.synth import SyntheticSpec, generate_synthetic


@pytest.fixture(scope="session")
def clean_corpus(tmp_path_factory):
    """Small zero-noise corpus, segmented/tracked/ingested once."""
    root = tmp_path_factory.mktemp("clean")
    spec = SyntheticSpec(seed=42, num_videos=2, num_train_videos=0, frames_per_video=15)
    manifest = generate_synthetic(spec, root / "corpus")
    config = pipeline.resolve_config(manifest, None)
    pipeline.run_segment(manifest, config, root / "segments", use_meta=False)
    pipeline.run_track(manifest, config, root / "segments", root / "tracks")
    pipeline.run_ingest(manifest, config, root / "snapshot.json", root / "tracks")
    return {
        "root": root,
        "manifest": manifest,
        "config": config,
        "segments": root / "segments",
        "tracks": root / "tracks",
        "snapshot": root / "snapshot.json",
    }
