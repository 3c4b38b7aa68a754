"""Build the face corpus: decode videos, sample frames, crop faces to disk.

Output layout::

    <output_root>/real/<video>__f<frame>__b<box>.png
    <output_root>/fake/<video>__f<frame>__b<box>.png
    <output_root>/index.csv   (crop_path,video,label,split,frame_index,box_index)

Crops are PNG so no codec artifacts contaminate the training signal. The
sidecar index is written in manifest order, so re-running with the same seed
reproduces it byte for byte.
"""

from __future__ import annotations

import csv
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ManifestError, MediaError, VeriframeError
from .faces import DetectorBackend, crop_face, detect_faces
from .manifest import Manifest
from .media import open_video, save_png

INDEX_COLUMNS = ["crop_path", "video", "label", "split", "frame_index", "box_index"]


@dataclass(frozen=True)
class CropRecord:
    """One written face crop, as recorded in ``index.csv``."""

    crop_path: str
    video: str
    label: str
    split: str
    frame_index: int
    box_index: int


@dataclass
class IngestReport:
    videos_processed: int = 0
    videos_failed: list[tuple[str, str]] = field(default_factory=list)
    frames_sampled: int = 0
    faces_written: dict[str, int] = field(default_factory=lambda: {"real": 0, "fake": 0})
    output_root: str = ""


def sample_frame_indices(
    total_frames: int,
    n: int,
    mode: str = "uniform",
    seed: int = 0,
) -> list[int]:
    """Pick min(n, total_frames) distinct sorted frame indices.

    ``uniform`` strides evenly across the video; ``random`` draws a seeded
    uniform sample without replacement. Both are deterministic for fixed
    arguments.
    """
    if total_frames < 1:
        raise VeriframeError("video has no frames")
    if n < 1:
        raise VeriframeError(f"frame count {n} must be positive")
    k = min(n, total_frames)
    if mode == "uniform":
        return [i * total_frames // k for i in range(k)]
    if mode == "random":
        rng = np.random.default_rng(seed)
        picks = rng.choice(total_frames, size=k, replace=False)
        return sorted(int(i) for i in picks)
    raise VeriframeError(f"unknown sampling mode {mode!r}")


def _video_seed(seed: int, name: str) -> int:
    # Independent of manifest position so worker count cannot change results.
    return int(
        np.random.SeedSequence([seed, zlib.crc32(name.encode("utf-8"))]).generate_state(1)[0]
    )


def _process_video(
    entry,
    video_root: Path,
    output_root: Path,
    detector: DetectorBackend,
    frames_per_video: int,
    mode: str,
    seed: int,
    crop_size: int,
    margin: float,
):
    """Returns (records, frames_sampled, error_or_None) for one video."""
    path = video_root / entry.name
    try:
        reader = open_video(path)
        indices = sample_frame_indices(
            reader.frame_count, frames_per_video, mode=mode,
            seed=_video_seed(seed, entry.name),
        )
    except (MediaError, VeriframeError) as exc:
        return [], 0, str(exc)
    label_dir = entry.label.lower()
    records: list[CropRecord] = []
    frames_sampled = 0
    for frame_index in indices:
        try:
            frame = reader.read_frame(frame_index)
        except MediaError as exc:
            return records, frames_sampled, f"frame {frame_index}: {exc}"
        frames_sampled += 1
        for box_index, box in enumerate(detect_faces(frame, detector)):
            crop = crop_face(frame, box, margin=margin, out_size=crop_size)
            filename = f"{entry.name}__f{frame_index}__b{box_index}.png"
            save_png(crop, output_root / label_dir / filename)
            records.append(
                CropRecord(
                    crop_path=f"{label_dir}/{filename}",
                    video=entry.name,
                    label=entry.label,
                    split=entry.split,
                    frame_index=frame_index,
                    box_index=box_index,
                )
            )
    return records, frames_sampled, None


def ingest_videos(
    manifest: Manifest,
    video_root: str | Path,
    output_root: str | Path,
    detector: DetectorBackend,
    frames_per_video: int = 10,
    mode: str = "uniform",
    seed: int = 0,
    crop_size: int = 256,
    margin: float = 0.2,
    workers: int = 1,
) -> IngestReport:
    """Extract, crop, and store faces for every manifest entry.

    Missing or unreadable videos are recorded in ``videos_failed`` rather
    than aborting the run. Frames with no detected face count toward
    ``frames_sampled`` but write nothing.
    """
    if not manifest.entries:
        raise ManifestError("empty manifest")
    video_root = Path(video_root)
    output_root = Path(output_root)
    for label_dir in ("real", "fake"):
        (output_root / label_dir).mkdir(parents=True, exist_ok=True)

    report = IngestReport(output_root=str(output_root))
    all_records: list[CropRecord] = []

    def work(entry):
        return _process_video(
            entry, video_root, output_root, detector, frames_per_video,
            mode, seed, crop_size, margin,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, manifest.entries))
    else:
        results = [work(entry) for entry in manifest.entries]

    for entry, (records, frames_sampled, error) in zip(manifest.entries, results):
        report.frames_sampled += frames_sampled
        if error is not None:
            report.videos_failed.append((entry.name, error))
        else:
            report.videos_processed += 1
        for record in records:
            report.faces_written[record.label.lower()] += 1
        all_records.extend(records)

    write_index(all_records, output_root / "index.csv")
    return report


def write_index(records: list[CropRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(INDEX_COLUMNS)
        for record in records:
            writer.writerow(
                [record.crop_path, record.video, record.label, record.split,
                 record.frame_index, record.box_index]
            )


def load_index(path: str | Path) -> list[CropRecord]:
    path = Path(path)
    if not path.is_file():
        raise VeriframeError(f"index file not found: {path}")
    records: list[CropRecord] = []
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != INDEX_COLUMNS:
            raise VeriframeError(f"unexpected index header in {path}: {header}")
        for row in reader:
            if not row:
                continue
            crop_path, video, label, split, frame_index, box_index = row
            records.append(
                CropRecord(
                    crop_path=crop_path,
                    video=video,
                    label=label,
                    split=split,
                    frame_index=int(frame_index),
                    box_index=int(box_index),
                )
            )
    return records
