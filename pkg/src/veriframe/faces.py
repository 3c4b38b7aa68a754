"""Face detection interface, the detector pre-scaling policy, and cropping.

Detection runs on a rescaled copy of the frame so faces land near the size
the detector was tuned for (the native 340 x 340 corpus); returned boxes are
always mapped back into original-frame coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Protocol

import numpy as np

from .errors import DetectorError, RegistryError, VeriframeError
from .media import resize_rgb


@dataclass(frozen=True)
class FaceBox:
    """A detected face rectangle in pixel coordinates.

    ``applied_scale`` records the factor the image was resized by before
    detection; coordinates here are already divided back into the original
    frame.
    """

    x: float
    y: float
    w: float
    h: float
    confidence: float
    applied_scale: float = 1.0

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise VeriframeError(f"degenerate face box {self.w}x{self.h}")
        if not 0.0 <= self.confidence <= 1.0:
            raise VeriframeError(f"confidence {self.confidence} outside [0,1]")


class DetectorBackend(Protocol):
    name: str

    def detect(self, image: np.ndarray) -> list[FaceBox]: ...


def scale_factor(longest_side_px: int) -> float:
    """Pre-detection resize factor for a frame whose longest side is given.

    Piecewise-constant and non-increasing; the output side is pushed toward
    the 340 px regime the detector expects. Below 100 px the frame is doubled,
    up to 1000 px it is left alone, then halved, then scaled by 0.33 above
    1900 px.
    """
    if longest_side_px < 1:
        raise VeriframeError(f"non-positive image side {longest_side_px}")
    if longest_side_px < 100:
        return 2.0
    if longest_side_px <= 1000:
        return 1.0
    if longest_side_px <= 1900:
        return 0.5
    return 0.33


def detect_faces(image: np.ndarray, backend: DetectorBackend) -> list[FaceBox]:
    """Detect faces, returning boxes in original-frame coordinates.

    The frame is rescaled by :func:`scale_factor` of its longest side before
    the backend runs; box coordinates are divided back by that factor and
    clamped, and results are sorted by descending confidence.
    """
    image = np.asarray(image)
    if image.size == 0:
        raise VeriframeError("empty image")
    height, width = image.shape[:2]
    scale = scale_factor(max(height, width))
    if scale != 1.0:
        scaled_w = max(1, round(width * scale))
        scaled_h = max(1, round(height * scale))
        scaled = resize_rgb(image, scaled_w, scaled_h)
    else:
        scaled_w, scaled_h = width, height
        scaled = image
    try:
        raw = backend.detect(scaled)
    except VeriframeError:
        raise
    except Exception as exc:
        raise DetectorError(f"detector {backend.name!r} failed: {exc}") from exc

    boxes: list[FaceBox] = []
    for box in raw:
        # Clamp in detector space first so coords * scale stay inside the
        # rescaled bounds despite the integer rounding of the resize.
        x0 = min(max(box.x, 0.0), scaled_w)
        y0 = min(max(box.y, 0.0), scaled_h)
        x1 = min(max(box.x + box.w, 0.0), scaled_w)
        y1 = min(max(box.y + box.h, 0.0), scaled_h)
        if x1 <= x0 or y1 <= y0:
            continue
        boxes.append(
            FaceBox(
                x=x0 / scale,
                y=y0 / scale,
                w=(x1 - x0) / scale,
                h=(y1 - y0) / scale,
                confidence=box.confidence,
                applied_scale=scale,
            )
        )
    boxes.sort(key=lambda b: (-b.confidence, b.y, b.x))
    return boxes


def crop_face(
    image: np.ndarray,
    box: FaceBox,
    margin: float = 0.2,
    out_size: int = 256,
) -> np.ndarray:
    """Crop a margin-padded face region and resample it to out_size squared.

    The box is expanded by ``margin`` of its own size on each side, clamped to
    the image, then bilinearly resized. The identity case (full-image box,
    zero margin, matching out_size) returns a pixel-identical copy.
    """
    image = np.asarray(image)
    if margin < 0:
        raise VeriframeError(f"negative margin {margin}")
    if out_size < 1:
        raise VeriframeError(f"non-positive output size {out_size}")
    height, width = image.shape[:2]
    ex0 = box.x - margin * box.w
    ey0 = box.y - margin * box.h
    ex1 = box.x + box.w * (1 + margin)
    ey1 = box.y + box.h * (1 + margin)
    x0 = max(0, int(np.floor(ex0)))
    y0 = max(0, int(np.floor(ey0)))
    x1 = min(width, int(np.ceil(ex1)))
    y1 = min(height, int(np.ceil(ey1)))
    if x1 <= x0 or y1 <= y0:
        raise VeriframeError(
            f"face box ({box.x}, {box.y}, {box.w}, {box.h}) lies outside the "
            f"{width}x{height} image"
        )
    crop = image[y0:y1, x0:x1]
    return resize_rgb(crop, out_size, out_size)


# --- stub backend -----------------------------------------------------------
#
# The stub detects the synthetic marker drawn by veriframe.synthetic: a
# magenta ring around each face region. It exists so the whole pipeline runs
# hermetically; production deployments register a real detector adapter.

MARKER_RGB = (255, 0, 255)


def marker_mask(image: np.ndarray) -> np.ndarray:
    """Boolean mask of pixels close enough to the marker color.

    Thresholds leave room for bilinear-resampling blur while staying
    unreachable for any grayscale content (which always has R == G).
    """
    arr = np.asarray(image)
    r = arr[..., 0].astype(np.int16)
    g = arr[..., 1].astype(np.int16)
    b = arr[..., 2].astype(np.int16)
    return (r >= 200) & (g <= 80) & (b >= 200)


class MarkerStubDetector:
    """Deterministic detector for the synthetic magenta-ring face marker.

    Each 8-connected component of marker-colored pixels yields one box (its
    bounding rectangle). Confidence grows with how complete the ring is and
    saturates at 1.0 for a solid ring.
    """

    name = "stub"

    def __init__(self, min_component_pixels: int = 12):
        self.min_component_pixels = min_component_pixels

    def detect(self, image: np.ndarray) -> list[FaceBox]:
        from scipy import ndimage

        mask = marker_mask(image)
        if not mask.any():
            return []
        labeled, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
        boxes: list[FaceBox] = []
        for slice_y, slice_x in ndimage.find_objects(labeled):
            component = labeled[slice_y, slice_x] > 0
            size = int(component.sum())
            if size < self.min_component_pixels:
                continue
            w = slice_x.stop - slice_x.start
            h = slice_y.stop - slice_y.start
            confidence = min(1.0, size / (2.0 * (w + h)))
            boxes.append(
                FaceBox(
                    x=float(slice_x.start),
                    y=float(slice_y.start),
                    w=float(w),
                    h=float(h),
                    confidence=confidence,
                )
            )
        return boxes


_DETECTORS: dict[str, Callable[[], DetectorBackend]] = {
    "stub": MarkerStubDetector,
}


def register_detector(name: str, factory: Callable[[], DetectorBackend]) -> None:
    _DETECTORS[name] = factory


def get_detector(name: str) -> DetectorBackend:
    try:
        factory = _DETECTORS[name]
    except KeyError:
        raise RegistryError(
            f"unknown detector backend {name!r}; registered: "
            f"{sorted(_DETECTORS)}"
        ) from None
    return factory()


def available_detectors() -> list[str]:
    return sorted(_DETECTORS)


def with_scale(box: FaceBox, applied_scale: float) -> FaceBox:
    return replace(box, applied_scale=applied_scale)
