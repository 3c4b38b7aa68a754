"""Deterministic synthetic media: marker-tagged faces, frames, and corpora.

The generator is the counterpart of the stub detector: each "face" is a
noise-filled rectangle wrapped in a magenta ring the stub can find. Real
faces carry dark noise, counterfeit ones bright noise, which makes toy
corpora linearly separable by construction.
"""

from __future__ import annotations

import io
import zipfile
from pathlib import Path

import numpy as np

from .faces import MARKER_RGB
from .manifest import Manifest, build_manifest, save_manifest
from .media import encode_png, save_png

DARK_RANGE = (10, 106)     # REAL face content: mean ~57
BRIGHT_RANGE = (150, 246)  # FAKE face content: mean ~197


def draw_marker_ring(image: np.ndarray, x: int, y: int, w: int, h: int,
                     thickness: int = 4) -> None:
    """Draw the detector marker: a magenta ring just inside (x, y, w, h)."""
    t = max(1, thickness)
    color = np.array(MARKER_RGB, dtype=np.uint8)
    image[y:y + t, x:x + w] = color
    image[y + h - t:y + h, x:x + w] = color
    image[y:y + h, x:x + t] = color
    image[y:y + h, x + w - t:x + w] = color


def fill_face_content(image: np.ndarray, x: int, y: int, w: int, h: int,
                      bright: bool, rng: np.random.Generator,
                      thickness: int = 4) -> None:
    low, high = BRIGHT_RANGE if bright else DARK_RANGE
    t = max(1, thickness)
    inner_h = max(0, h - 2 * t)
    inner_w = max(0, w - 2 * t)
    if inner_h and inner_w:
        noise = rng.integers(low, high, size=(inner_h, inner_w), dtype=np.uint8)
        image[y + t:y + h - t, x + t:x + w - t] = noise[..., None]


def make_face_image(
    size: tuple[int, int] = (340, 340),
    faces: list[tuple[int, int, int, int, bool]] | None = None,
    seed: int = 0,
    ring_thickness: int = 4,
) -> np.ndarray:
    """Render a frame with zero or more marker-ringed faces.

    ``faces`` lists (x, y, w, h, is_bright) rectangles. The background is a
    seeded mid-gray texture so frames are deterministic but not constant.
    """
    height, width = size
    rng = np.random.default_rng(seed)
    background = rng.integers(110, 141, size=(height, width), dtype=np.uint8)
    image = np.repeat(background[..., None], 3, axis=2)
    for x, y, w, h, bright in faces or []:
        fill_face_content(image, x, y, w, h, bright, rng, ring_thickness)
        draw_marker_ring(image, x, y, w, h, ring_thickness)
    return image


def make_video_frames(
    n_frames: int,
    fake: bool,
    seed: int,
    size: tuple[int, int] = (340, 340),
    face_size: int = 120,
) -> list[np.ndarray]:
    """Frames for one synthetic video: one wandering face per frame."""
    rng = np.random.default_rng(seed)
    height, width = size
    frames = []
    for index in range(n_frames):
        x = int(rng.integers(0, width - face_size))
        y = int(rng.integers(0, height - face_size))
        frames.append(
            make_face_image(
                size=size,
                faces=[(x, y, face_size, face_size, fake)],
                seed=int(rng.integers(0, 2**31)),
            )
        )
    return frames


def write_frame_directory(frames: list[np.ndarray], directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for index, frame in enumerate(frames):
        save_png(frame, directory / f"frame_{index:05d}.png")


def frames_to_zip_bytes(frames: list[np.ndarray]) -> bytes:
    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w", zipfile.ZIP_STORED) as archive:
        for index, frame in enumerate(frames):
            archive.writestr(f"frame_{index:05d}.png", encode_png(frame))
    return buffer.getvalue()


def make_corpus(
    root: str | Path,
    n_videos: int = 20,
    frames_per_video: int = 10,
    seed: int = 0,
    splits: tuple[float, float] = (0.6, 0.2),
) -> Manifest:
    """Write a labeled synthetic video corpus and its manifest under root.

    Videos alternate REAL/FAKE so every split stays class-balanced; the
    first ``splits[0]`` fraction is train, the next ``splits[1]`` val, the
    remainder test. Returns the loaded manifest (also saved as
    ``manifest.csv`` inside root).
    """
    root = Path(root)
    videos = root / "videos"
    videos.mkdir(parents=True, exist_ok=True)
    n_train = round(n_videos * splits[0])
    n_val = round(n_videos * splits[1])
    rows = []
    for index in range(n_videos):
        fake = index % 2 == 1
        label = "FAKE" if fake else "REAL"
        if index < n_train:
            split = "train"
        elif index < n_train + n_val:
            split = "val"
        else:
            split = "test"
        name = f"vid_{index:03d}.mp4"
        frames = make_video_frames(frames_per_video, fake, seed=seed * 100003 + index)
        write_frame_directory(frames, videos / name)
        original = f"src_{index:03d}.mp4" if fake else None
        rows.append((name, label, split, original))
    manifest = build_manifest(rows, source=str(root / "manifest.csv"))
    save_manifest(manifest, root / "manifest.csv")
    return manifest
