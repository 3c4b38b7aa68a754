"""Fine-tuning loop and the portable model artifact format.

An artifact is a directory of three files::

    descriptor.json   everything needed to rebuild the network and its
                      preprocessing (backbone, head, input size, crop rules)
    weights.bin       magic + JSON parameter table + raw little-endian blobs
    checksum.txt      sha256 over weights.bin, verified on load

The format is deliberately language-neutral and self-describing; exporting a
just-loaded model reproduces weights.bin byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datapipe import BatchStream
from .errors import ArtifactError, DivergenceError, VeriframeError
from .model import Model, ModelConfig, backbone_spec, build_model

WEIGHTS_MAGIC = b"VFW1"
FORMAT_VERSION = 1

DEFAULT_PREPROCESSING = {
    "normalization": "unit_interval",
    "crop_margin": 0.2,
    "crop_size": 256,
}


@dataclass
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 1e-4
    epochs: int = 1
    seed: int = 0
    checkpoint_dir: str | None = None
    loss: str = "binary_cross_entropy"

    def __post_init__(self):
        if self.batch_size < 1:
            raise VeriframeError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise VeriframeError("learning_rate must be > 0")
        if self.epochs < 1:
            raise VeriframeError("epochs must be >= 1")
        if self.loss != "binary_cross_entropy":
            raise VeriframeError("only binary cross-entropy is supported")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float


@dataclass
class ModelArtifact:
    path: str
    descriptor: dict
    checksum: str

    @property
    def model_id(self) -> str:
        return self.checksum[:12]


def _bce(p_fake: np.ndarray, y: np.ndarray) -> float:
    eps = 1e-12
    p = np.clip(np.asarray(p_fake, dtype=np.float64), eps, 1.0 - eps)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def _accuracy(p_fake: np.ndarray, y: np.ndarray, threshold: float = 0.5) -> float:
    predicted_fake = np.asarray(p_fake) >= threshold
    return float(np.mean(predicted_fake == (np.asarray(y) >= 0.5)))


def evaluate_stream(model: Model, stream: BatchStream, epoch: int = 0):
    """Mean loss and accuracy of a model over one pass of a stream."""
    losses, hits, total = 0.0, 0.0, 0
    for batch in stream.epoch(epoch):
        p = model.predict_proba(batch.pixels)
        n = len(batch)
        losses += _bce(p, batch.labels) * n
        hits += _accuracy(p, batch.labels) * n
        total += n
    return losses / total, hits / total


def train(
    config: ModelConfig,
    train_stream: BatchStream,
    val_stream: BatchStream,
    tcfg: TrainConfig,
) -> tuple[Model, list[EpochStats]]:
    """Train a freshly built model, returning the best-validation weights.

    The checkpoint kept is the one with the highest validation accuracy,
    ties broken by the earliest epoch; history has exactly ``epochs`` rows.
    A non-finite training loss aborts with :class:`DivergenceError`.
    """
    size = config.backbone.input_size
    for stream, role in ((train_stream, "train"), (val_stream, "val")):
        if stream.target_size != size:
            raise VeriframeError(
                f"{role} stream target_size {stream.target_size} != backbone "
                f"input size {size}"
            )
    model = build_model(config, seed=tcfg.seed)
    model.configure_optimizer(tcfg.learning_rate)

    history: list[EpochStats] = []
    best_accuracy = -1.0
    best_params = model.snapshot()
    for epoch in range(tcfg.epochs):
        loss_sum, hit_sum, seen = 0.0, 0.0, 0
        for batch in train_stream.epoch(epoch):
            loss, p_fake = model.train_batch(batch.pixels, batch.labels)
            if not np.isfinite(loss):
                raise DivergenceError(epoch)
            n = len(batch)
            loss_sum += loss * n
            hit_sum += _accuracy(p_fake, batch.labels) * n
            seen += n
        val_loss, val_accuracy = evaluate_stream(model, val_stream, epoch)
        history.append(
            EpochStats(
                epoch=epoch,
                train_loss=loss_sum / seen,
                train_accuracy=hit_sum / seen,
                val_loss=val_loss,
                val_accuracy=val_accuracy,
            )
        )
        if val_accuracy > best_accuracy:
            best_accuracy = val_accuracy
            best_params = model.snapshot()
            if tcfg.checkpoint_dir:
                export_model(model, Path(tcfg.checkpoint_dir) / "best")
    model.set_parameters(best_params)
    return model, history


# --- artifact serialization --------------------------------------------------


def serialize_weights(named: list[tuple[str, np.ndarray]]) -> bytes:
    table = []
    blobs = []
    for name, value in named:
        # note: tobytes() already emits C order; ascontiguousarray would
        # silently promote 0-d arrays to shape (1,)
        value = np.asarray(value)
        if value.dtype.byteorder == ">":
            value = value.astype(value.dtype.newbyteorder("<"))
        table.append({"name": name, "shape": list(value.shape),
                      "dtype": value.dtype.name})
        blobs.append(value.tobytes())
    header = json.dumps({"params": table}, sort_keys=True,
                        separators=(",", ":")).encode("utf-8")
    return WEIGHTS_MAGIC + struct.pack("<I", len(header)) + header + b"".join(blobs)


def deserialize_weights(data: bytes) -> list[tuple[str, np.ndarray]]:
    if data[:4] != WEIGHTS_MAGIC:
        raise ArtifactError("weights.bin has an unrecognized magic prefix")
    (header_len,) = struct.unpack("<I", data[4:8])
    header = json.loads(data[8:8 + header_len].decode("utf-8"))
    offset = 8 + header_len
    named: list[tuple[str, np.ndarray]] = []
    for entry in header["params"]:
        dtype = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"], dtype=np.int64)) if entry["shape"] else 1
        nbytes = count * dtype.itemsize
        chunk = data[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise ArtifactError(f"weights.bin truncated at {entry['name']!r}")
        named.append(
            (entry["name"], np.frombuffer(chunk, dtype=dtype).reshape(entry["shape"]).copy())
        )
        offset += nbytes
    if offset != len(data):
        raise ArtifactError("weights.bin has trailing bytes")
    return named


_REQUIRED_DESCRIPTOR_FIELDS = (
    "format_version", "backbone", "input_size", "head_hidden_units",
    "head_output", "positive_class", "normalization", "crop_margin",
    "crop_size",
)


def build_descriptor(config: ModelConfig, preprocessing: dict | None = None) -> dict:
    pre = dict(DEFAULT_PREPROCESSING)
    pre.update(preprocessing or {})
    return {
        "format_version": FORMAT_VERSION,
        "backbone": config.backbone.name,
        "input_size": config.backbone.input_size,
        "nominal_depth": config.backbone.nominal_depth,
        "head_hidden_units": config.head_hidden_units,
        "head_output": config.head_output,
        "positive_class": config.positive_class,
        "normalization": pre["normalization"],
        "crop_margin": pre["crop_margin"],
        "crop_size": pre["crop_size"],
    }


def export_model(model: Model, path: str | Path,
                 preprocessing: dict | None = None) -> ModelArtifact:
    """Write descriptor + weights + checksum; returns the artifact handle."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    descriptor = build_descriptor(model.config, preprocessing)
    weights = serialize_weights(model.parameters())
    checksum = hashlib.sha256(weights).hexdigest()
    (path / "descriptor.json").write_text(
        json.dumps(descriptor, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (path / "weights.bin").write_bytes(weights)
    (path / "checksum.txt").write_text(f"sha256:{checksum}\n", encoding="utf-8")
    return ModelArtifact(path=str(path), descriptor=descriptor, checksum=checksum)


def read_descriptor(path: Path) -> dict:
    descriptor_path = path / "descriptor.json"
    if not descriptor_path.is_file():
        raise ArtifactError(f"artifact is missing descriptor.json: {path}")
    descriptor = json.loads(descriptor_path.read_text(encoding="utf-8"))
    for required in _REQUIRED_DESCRIPTOR_FIELDS:
        if required not in descriptor:
            raise ArtifactError(f"descriptor is missing field {required!r}")
    return descriptor


def load_model(path: str | Path) -> Model:
    """Rebuild a model from an artifact directory.

    Verifies the weights checksum and the format version before touching the
    network. The returned model carries ``.preprocessing``, ``.checksum``,
    and ``.model_id`` attributes for the inference side.
    """
    path = Path(path)
    if not path.is_dir():
        raise ArtifactError(f"artifact directory not found: {path}")
    descriptor = read_descriptor(path)
    version = descriptor["format_version"]
    if version != FORMAT_VERSION:
        raise ArtifactError(
            f"unsupported artifact format_version {version} (supported: {FORMAT_VERSION})"
        )
    weights_path = path / "weights.bin"
    if not weights_path.is_file():
        raise ArtifactError(f"artifact is missing weights.bin: {path}")
    weights = weights_path.read_bytes()
    checksum_path = path / "checksum.txt"
    if not checksum_path.is_file():
        raise ArtifactError(f"artifact is missing checksum.txt: {path}")
    recorded = checksum_path.read_text(encoding="utf-8").strip()
    actual = f"sha256:{hashlib.sha256(weights).hexdigest()}"
    if recorded != actual:
        raise ArtifactError(
            f"weights checksum mismatch: recorded {recorded}, actual {actual}"
        )
    spec = backbone_spec(descriptor["backbone"])
    if spec.input_size != descriptor["input_size"]:
        raise ArtifactError(
            f"descriptor input_size {descriptor['input_size']} does not match "
            f"backbone {spec.name!r} ({spec.input_size})"
        )
    config = ModelConfig(
        backbone=spec,
        head_hidden_units=descriptor["head_hidden_units"],
        head_output=descriptor["head_output"],
    )
    model = build_model(config, seed=0)
    model.set_parameters(deserialize_weights(weights))
    model.preprocessing = {
        "input_size": descriptor["input_size"],
        "normalization": descriptor["normalization"],
        "crop_margin": descriptor["crop_margin"],
        "crop_size": descriptor["crop_size"],
    }
    model.checksum = actual.split(":", 1)[1]
    model.model_id = model.checksum[:12]
    return model


def save_history(history: list[EpochStats], path: str | Path) -> None:
    rows = [
        {
            "epoch": h.epoch,
            "train_loss": h.train_loss,
            "train_accuracy": h.train_accuracy,
            "val_loss": h.val_loss,
            "val_accuracy": h.val_accuracy,
        }
        for h in history
    ]
    Path(path).write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
