"""Shared fixtures: synthetic corpora and small ingested datasets."""

from __future__ import annotations

import numpy as np
import pytest

from veriframe.faces import MarkerStubDetector
from veriframe.ingest import ingest_videos, load_index
from veriframe.synthetic import make_corpus


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """A 20-video synthetic corpus: videos/ plus manifest.csv."""
    root = tmp_path_factory.mktemp("corpus")
    make_corpus(root, n_videos=20, frames_per_video=10, seed=2024)
    return root


@pytest.fixture(scope="session")
def ingested(corpus_dir, tmp_path_factory):
    """The corpus run through ingest: (output_root, index rows, report)."""
    from veriframe.manifest import load_manifest

    output_root = tmp_path_factory.mktemp("crops")
    manifest = load_manifest(corpus_dir / "manifest.csv")
    report = ingest_videos(
        manifest,
        video_root=corpus_dir / "videos",
        output_root=output_root,
        detector=MarkerStubDetector(),
        frames_per_video=10,
        seed=11,
    )
    rows = load_index(output_root / "index.csv")
    return output_root, rows, report


@pytest.fixture(scope="session")
def flat_crop_dir(tmp_path_factory):
    """200 bare 64x64 noise crops (no markers): bright=FAKE, dark=REAL.

    Returns (root, rows): 160 train, 40 val, linearly separable by mean
    brightness.
    """
    from veriframe.ingest import CropRecord, write_index
    from veriframe.media import save_png

    root = tmp_path_factory.mktemp("flat_crops")
    (root / "real").mkdir()
    (root / "fake").mkdir()
    rng = np.random.default_rng(7)
    rows = []
    for i in range(200):
        fake = i % 2 == 1
        low, high = (150, 246) if fake else (10, 106)
        crop = rng.integers(low, high, size=(64, 64, 1), dtype=np.uint8)
        crop = np.repeat(crop, 3, axis=2)
        label = "FAKE" if fake else "REAL"
        split = "train" if i < 160 else "val"
        path = f"{label.lower()}/crop_{i:04d}.png"
        save_png(crop, root / path)
        rows.append(
            CropRecord(crop_path=path, video=f"v{i}", label=label,
                       split=split, frame_index=0, box_index=0)
        )
    write_index(rows, root / "index.csv")
    return root, rows
