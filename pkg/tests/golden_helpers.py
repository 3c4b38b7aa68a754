"""Shared recipe for the frozen-weights and end-to-end golden responses.

Both the test suite and scripts/make_golden.py import this module so the
committed golden bytes and the assertions are generated from one source of
truth. Every seed below is load-bearing: changing any of them invalidates
the goldens under tests/data/.
"""

from __future__ import annotations

import re
from pathlib import Path

from veriframe.datapipe import build_stream
from veriframe.faces import MarkerStubDetector
from veriframe.ingest import ingest_videos, load_index
from veriframe.manifest import load_manifest
from veriframe.media import encode_png
from veriframe.model import default_config, build_model
from veriframe.synthetic import make_corpus, make_face_image, make_video_frames, frames_to_zip_bytes
from veriframe.trainer import TrainConfig, export_model, train

DATA_DIR = Path(__file__).parent / "data"

CORPUS_SEED = 2024
N_VIDEOS = 20
FRAMES_PER_VIDEO = 10
INGEST_SEED = 11
TRAIN_SEED = 5
LEARNING_RATE = 1e-3
EPOCHS = 20
BATCH_SIZE = 32
FROZEN_MODEL_SEED = 1234
REQUEST_SEED = 123

_MODEL_ID = re.compile(rb'"model_id":"[0-9a-f]*"')


def mask_model_id(raw: bytes) -> bytes:
    return _MODEL_ID.sub(b'"model_id":"*"', raw)


def golden_image_bytes() -> bytes:
    """Two-face probe image: one bright (counterfeit-style), one dark."""
    image = make_face_image(
        size=(340, 340),
        faces=[(30, 40, 120, 120, True), (180, 190, 110, 110, False)],
        seed=77,
    )
    return encode_png(image)


def golden_video_bytes(n_frames: int = 30) -> bytes:
    return frames_to_zip_bytes(make_video_frames(n_frames, fake=True, seed=88))


def export_frozen_artifact(path) -> None:
    model = build_model(default_config("tiny_test"), seed=FROZEN_MODEL_SEED)
    export_model(model, path)


def run_e2e_training(output_root, artifact_dir):
    """Train the toy discriminator over an already-ingested corpus."""
    rows = load_index(Path(output_root) / "index.csv")
    config = default_config("tiny_test")
    size = config.backbone.input_size
    train_stream = build_stream(rows, "train", root=output_root,
                                target_size=size, batch_size=BATCH_SIZE,
                                shuffle_seed=TRAIN_SEED, cache=True)
    val_stream = build_stream(rows, "val", root=output_root, target_size=size,
                              batch_size=BATCH_SIZE, cache=True)
    tcfg = TrainConfig(batch_size=BATCH_SIZE, learning_rate=LEARNING_RATE,
                       epochs=EPOCHS, seed=TRAIN_SEED)
    model, history = train(config, train_stream, val_stream, tcfg)
    export_model(model, artifact_dir)
    return model, history, rows


def build_e2e_corpus(workdir):
    """Corpus + ingest exactly as the session fixtures produce them."""
    workdir = Path(workdir)
    corpus = workdir / "corpus"
    output_root = workdir / "crops"
    make_corpus(corpus, n_videos=N_VIDEOS, frames_per_video=FRAMES_PER_VIDEO,
                seed=CORPUS_SEED)
    manifest = load_manifest(corpus / "manifest.csv")
    ingest_videos(
        manifest,
        video_root=corpus / "videos",
        output_root=output_root,
        detector=MarkerStubDetector(),
        frames_per_video=FRAMES_PER_VIDEO,
        seed=INGEST_SEED,
    )
    return output_root
