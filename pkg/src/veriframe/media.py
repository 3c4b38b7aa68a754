"""Image codecs and the video-decoder interface.

Video decoding is pluggable so the test suite never needs a codec: a "video"
may be a directory of numbered ``frame_*.png`` files or a ZIP archive of the
same, and real container formats are handled by an optional OpenCV-backed
reader that is imported lazily.
"""

from __future__ import annotations

import io
import os
import re
import tempfile
import zipfile
from pathlib import Path
from typing import Protocol

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import MediaError

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}
VIDEO_EXTENSIONS = {".mp4", ".avi", ".mov", ".mkv", ".webm", ".zip"}

_FRAME_NAME = re.compile(r"frame_(\d+)\.png$")


def decode_image(data: bytes) -> np.ndarray:
    """Decode encoded image bytes to an H x W x 3 uint8 RGB array."""
    try:
        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("RGB"))
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise MediaError(f"undecodable image payload: {exc}") from exc


def load_image(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise MediaError(f"image file not found: {path}")
    return decode_image(path.read_bytes())


def encode_png(image: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(buffer, format="PNG")
    return buffer.getvalue()


def save_png(image: np.ndarray, path: str | Path) -> None:
    Path(path).write_bytes(encode_png(image))


def resize_rgb(image: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resize of an RGB uint8 array; identity sizes are a copy."""
    image = np.asarray(image, dtype=np.uint8)
    if image.shape[0] == height and image.shape[1] == width:
        return image.copy()
    resized = Image.fromarray(image).resize((width, height), Image.BILINEAR)
    return np.asarray(resized)


class VideoReader(Protocol):
    """Minimal random-access frame source."""

    @property
    def frame_count(self) -> int: ...

    def read_frame(self, index: int) -> np.ndarray: ...


class FrameDirectoryVideo:
    """A "video" stored as a directory of ``frame_%05d.png`` files."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        names = []
        for name in os.listdir(self.directory):
            match = _FRAME_NAME.fullmatch(name)
            if match:
                names.append((int(match.group(1)), name))
        if not names:
            raise MediaError(f"no frame_*.png files in {self.directory}")
        names.sort()
        self._names = [name for _, name in names]

    @property
    def frame_count(self) -> int:
        return len(self._names)

    def read_frame(self, index: int) -> np.ndarray:
        if not 0 <= index < len(self._names):
            raise MediaError(f"frame index {index} out of range")
        return load_image(self.directory / self._names[index])


class ZipFramesVideo:
    """A "video" transported as ZIP bytes containing frame PNGs."""

    def __init__(self, data: bytes):
        try:
            self._zip = zipfile.ZipFile(io.BytesIO(data))
        except zipfile.BadZipFile as exc:
            raise MediaError(f"undecodable video payload: {exc}") from exc
        names = []
        for name in self._zip.namelist():
            match = _FRAME_NAME.search(name)
            if match:
                names.append((int(match.group(1)), name))
        if not names:
            raise MediaError("video archive contains no frame_*.png entries")
        names.sort()
        self._names = [name for _, name in names]

    @property
    def frame_count(self) -> int:
        return len(self._names)

    def read_frame(self, index: int) -> np.ndarray:
        if not 0 <= index < len(self._names):
            raise MediaError(f"frame index {index} out of range")
        return decode_image(self._zip.read(self._names[index]))


class OpenCvVideo:
    """Container-format reader backed by OpenCV; imported only when used.

    ``from_bytes`` unlinks its temp file immediately after the capture opens
    so no payload-derived path outlives the reader even on a crash.
    """

    def __init__(self, path: str | Path):
        import cv2  # deferred: optional dependency

        self._cv2 = cv2
        self._capture = cv2.VideoCapture(str(path))
        if not self._capture.isOpened():
            raise MediaError(f"OpenCV cannot open video: {path}")
        self._count = int(self._capture.get(cv2.CAP_PROP_FRAME_COUNT))
        if self._count <= 0:
            raise MediaError(f"video has no readable frames: {path}")

    @classmethod
    def from_bytes(cls, data: bytes, suffix: str = ".mp4") -> "OpenCvVideo":
        fd, name = tempfile.mkstemp(suffix=suffix)
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
            reader = cls(name)
        finally:
            try:
                os.unlink(name)
            except FileNotFoundError:
                pass
        return reader

    @property
    def frame_count(self) -> int:
        return self._count

    def read_frame(self, index: int) -> np.ndarray:
        if not 0 <= index < self._count:
            raise MediaError(f"frame index {index} out of range")
        self._capture.set(self._cv2.CAP_PROP_POS_FRAMES, index)
        ok, frame = self._capture.read()
        if not ok:
            raise MediaError(f"failed to decode frame {index}")
        return self._cv2.cvtColor(frame, self._cv2.COLOR_BGR2RGB)


def open_video(path: str | Path) -> VideoReader:
    """Open a video by path: frame directory, frame ZIP, or real container."""
    path = Path(path)
    if path.is_dir():
        return FrameDirectoryVideo(path)
    if not path.exists():
        raise MediaError(f"video not found: {path}")
    if path.suffix.lower() == ".zip":
        return ZipFramesVideo(path.read_bytes())
    return OpenCvVideo(path)


def open_video_bytes(data: bytes, filename: str = "") -> VideoReader:
    """Open a video payload received as bytes (service upload path)."""
    if data[:2] == b"PK":
        return ZipFramesVideo(data)
    suffix = Path(filename).suffix.lower() or ".mp4"
    return OpenCvVideo.from_bytes(data, suffix=suffix)


def sniff_media_type(filename: str, data: bytes) -> str:
    """Classify an upload as ``image`` or ``video`` by extension, then magic.

    Raises :class:`MediaError` when neither identifies the payload.
    """
    suffix = Path(filename).suffix.lower()
    if suffix in IMAGE_EXTENSIONS:
        return "image"
    if suffix in VIDEO_EXTENSIONS:
        return "video"
    if data[:8] == b"\x89PNG\r\n\x1a\n" or data[:2] == b"\xff\xd8":
        return "image"
    if data[:2] == b"PK":
        return "video"
    if len(data) >= 12 and data[4:8] == b"ftyp":
        return "video"
    raise MediaError(f"unsupported media type for {filename!r}")
