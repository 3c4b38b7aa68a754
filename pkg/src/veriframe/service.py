"""Stateless inference API: receive media, dispatch by type, sample frames,
detect and crop faces, classify each crop, and return the averaged verdict.

Uploads are processed entirely in memory and discarded with the request;
nothing payload-derived is ever written to durable storage.
"""

from __future__ import annotations

import json
import secrets
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .datapipe import preprocess_sample
from .errors import MediaError, VeriframeError
from .faces import DetectorBackend, FaceBox, crop_face, detect_faces, get_detector
from .ingest import sample_frame_indices
from .media import decode_image, open_video_bytes, sniff_media_type
from .model import Model
from .trainer import DEFAULT_PREPROCESSING, load_model

DEFAULT_FRAMES = 10
DEFAULT_THRESHOLD = 0.5
DEFAULT_MAX_UPLOAD_MB = 50


@dataclass(frozen=True)
class FaceVerdict:
    frame_index: int
    box: FaceBox
    probability_fake: float
    label: str


@dataclass(frozen=True)
class Aggregate:
    probability_fake: float | None
    label: str
    threshold: float


@dataclass(frozen=True)
class PredictionReport:
    media_type: str
    frames_analyzed: int
    faces: tuple[FaceVerdict, ...]
    aggregate: Aggregate
    model_id: str


def _verdict_label(probability_fake: float, threshold: float) -> str:
    return "FAKE" if probability_fake >= threshold else "REAL"


def classify_media(
    payload: bytes,
    declared_type: str,
    model: Model,
    detector: DetectorBackend,
    frames: int = DEFAULT_FRAMES,
    threshold: float = DEFAULT_THRESHOLD,
    seed: Optional[int] = None,
    model_id: str = "",
) -> PredictionReport:
    """Run the full backend workflow over one in-memory media payload.

    Images become a single-frame array; videos contribute ``frames`` randomly
    sampled frames (seeded when a seed is given, fresh otherwise). Every
    detected face is cropped and preprocessed per the model's exported
    preprocessing metadata, scored, and the aggregate is the unweighted mean
    over all faces. Zero faces is not an error: the aggregate is marked
    ``no_face_detected``.
    """
    if declared_type not in ("image", "video"):
        raise MediaError(f"unknown media type {declared_type!r}")
    preprocessing = getattr(model, "preprocessing", None) or dict(DEFAULT_PREPROCESSING)
    input_size = preprocessing.get("input_size", model.config.backbone.input_size)
    crop_margin = preprocessing.get("crop_margin", DEFAULT_PREPROCESSING["crop_margin"])
    crop_size = preprocessing.get("crop_size", DEFAULT_PREPROCESSING["crop_size"])

    if declared_type == "image":
        frame_array = [(0, decode_image(payload))]
    else:
        reader = open_video_bytes(payload)
        if seed is None:
            seed = secrets.randbits(32)
        indices = sample_frame_indices(
            reader.frame_count, frames, mode="random", seed=seed
        )
        frame_array = [(index, reader.read_frame(index)) for index in indices]

    located: list[tuple[int, FaceBox]] = []
    crops: list[np.ndarray] = []
    for frame_index, frame in frame_array:
        for box in detect_faces(frame, detector):
            crop = crop_face(frame, box, margin=crop_margin, out_size=crop_size)
            crops.append(preprocess_sample(crop, input_size))
            located.append((frame_index, box))

    faces: list[FaceVerdict] = []
    if crops:
        probabilities = model.predict_proba(np.stack(crops))
        for (frame_index, box), p in zip(located, probabilities):
            p = float(p)
            faces.append(
                FaceVerdict(
                    frame_index=frame_index,
                    box=box,
                    probability_fake=p,
                    label=_verdict_label(p, threshold),
                )
            )
        mean_p = float(np.mean([face.probability_fake for face in faces]))
        aggregate = Aggregate(
            probability_fake=mean_p,
            label=_verdict_label(mean_p, threshold),
            threshold=threshold,
        )
    else:
        aggregate = Aggregate(
            probability_fake=None, label="no_face_detected", threshold=threshold
        )
    return PredictionReport(
        media_type=declared_type,
        frames_analyzed=len(frame_array),
        faces=tuple(faces),
        aggregate=aggregate,
        model_id=model_id,
    )


def report_to_dict(report: PredictionReport) -> dict:
    return {
        "media_type": report.media_type,
        "frames_analyzed": report.frames_analyzed,
        "faces": [
            {
                "frame_index": face.frame_index,
                "box": {
                    "x": face.box.x,
                    "y": face.box.y,
                    "w": face.box.w,
                    "h": face.box.h,
                    "confidence": face.box.confidence,
                    "applied_scale": face.box.applied_scale,
                },
                "probability_fake": face.probability_fake,
                "label": face.label,
            }
            for face in report.faces
        ],
        "aggregate": {
            "probability_fake": report.aggregate.probability_fake,
            "label": report.aggregate.label,
            "threshold": report.aggregate.threshold,
        },
        "model_id": report.model_id,
    }


def canonical_report_json(report: PredictionReport) -> bytes:
    """Deterministic byte serialization: fixed field order, no whitespace."""
    return json.dumps(
        report_to_dict(report), separators=(",", ":"), allow_nan=False
    ).encode("utf-8")


@dataclass
class ServiceConfig:
    model_artifact: str | None = None
    detector: str = "stub"
    max_upload_mb: int = DEFAULT_MAX_UPLOAD_MB
    port: int = 8000
    host: str = "127.0.0.1"


class ServiceState:
    """Shared model/detector bindings; the model swap is atomic."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.detector: DetectorBackend = get_detector(config.detector)
        self._lock = threading.Lock()
        self.model: Model | None = None
        self.model_id: str = ""
        if config.model_artifact:
            self.reload(config.model_artifact)

    def reload(self, artifact_path: str | Path) -> str:
        model = load_model(artifact_path)
        with self._lock:
            self.model = model
            self.model_id = getattr(model, "model_id", "")
            self.config.model_artifact = str(artifact_path)
        return self.model_id

    def current(self) -> tuple[Model | None, str]:
        with self._lock:
            return self.model, self.model_id


def create_app(config: ServiceConfig | None = None, state: ServiceState | None = None) -> FastAPI:
    """Build the FastAPI app; pass an existing state to share bindings."""
    from fastapi.middleware.cors import CORSMiddleware

    config = config or ServiceConfig()
    state = state or ServiceState(config)
    app = FastAPI(title="veriframe inference service")
    # the analyst UI is served from its own origin; the API carries no
    # credentials or user state, so a wide-open policy is safe here
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.service = state
    max_bytes = config.max_upload_mb * 1024 * 1024

    @app.get("/api/v1/health")
    async def health() -> Response:
        model, model_id = state.current()
        if model is None:
            return JSONResponse(
                {"status": "unavailable", "model_id": None,
                 "backend_name": state.detector.name},
                status_code=503,
            )
        return JSONResponse(
            {"status": "ok", "model_id": model_id,
             "backend_name": state.detector.name}
        )

    @app.post("/api/v1/predict")
    async def predict(
        request: Request,
        frames: int = DEFAULT_FRAMES,
        threshold: float = DEFAULT_THRESHOLD,
        seed: Optional[int] = None,
    ) -> Response:
        content_length = request.headers.get("content-length")
        if content_length is not None and int(content_length) > max_bytes:
            return JSONResponse({"error": "payload_too_large"}, status_code=413)
        model, model_id = state.current()
        if model is None:
            return JSONResponse({"error": "model_not_loaded"}, status_code=503)
        form = await request.form()
        upload = form.get("file")
        if upload is None or isinstance(upload, str):
            return JSONResponse({"error": "missing_file"}, status_code=400)
        payload = await upload.read()
        if len(payload) > max_bytes:
            return JSONResponse({"error": "payload_too_large"}, status_code=413)
        try:
            media_type = sniff_media_type(upload.filename or "", payload)
            report = classify_media(
                payload,
                media_type,
                model,
                state.detector,
                frames=frames,
                threshold=threshold,
                seed=seed,
                model_id=model_id,
            )
        except MediaError as exc:
            return JSONResponse(
                {"error": "unsupported_media", "detail": str(exc)}, status_code=400
            )
        except VeriframeError as exc:
            return JSONResponse(
                {"error": "classification_failed", "detail": str(exc)},
                status_code=422,
            )
        return Response(
            content=canonical_report_json(report), media_type="application/json"
        )

    return app


def serve(config: ServiceConfig) -> None:
    """Run the API under uvicorn; SIGHUP hot-reloads the model artifact."""
    import signal

    import uvicorn

    state = ServiceState(config)
    app = create_app(config, state)

    def _reload_handler(signum, frame):
        if config.model_artifact:
            state.reload(config.model_artifact)

    try:
        signal.signal(signal.SIGHUP, _reload_handler)
    except (ValueError, AttributeError):
        pass  # non-main thread or platform without SIGHUP
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
