"""Backbone registry, classification heads, and the two output activations.

Every model maps a preprocessed batch (B, S, S, 3) in [0, 1] to per-sample
``probability_fake`` in [0, 1]. Internally a ``sigmoid_1`` head scores a
single "real" logit (the public probability is its complement) while a
``softmax_2`` head scores [real, fake] logits; the two parameterizations are
numerically interchangeable for a binary posterior.

The ``tiny_test`` backbone is a small in-repo conv stack so training,
gradient checks, and the inference service all run without pretrained
weights; the full-size backbones bind a Keras implementation lazily.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .errors import RegistryError, VeriframeError
from .nn import (
    Adam,
    Conv2d,
    Dense,
    GlobalAvgPool,
    MaxPool2d,
    Parameter,
    ReLU,
    Sequential,
)

HEAD_OUTPUTS = ("sigmoid_1", "softmax_2")
POSITIVE_CLASS = "FAKE"


def sigmoid(x):
    """Logistic function 1 / (1 + e^-x), overflow-safe for |x| up to 500+."""
    arr = np.asarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    exp_neg = np.exp(arr[~pos])
    out[~pos] = exp_neg / (1.0 + exp_neg)
    if np.ndim(x) == 0:
        return float(out)
    return out


def softmax(z):
    """e^z_i / sum_j e^z_j along the last axis, with max-subtraction."""
    arr = np.asarray(z, dtype=np.float64)
    if arr.size == 0:
        raise VeriframeError("softmax of an empty vector")
    shifted = arr - arr.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class BackboneSpec:
    name: str
    input_size: int
    nominal_depth: int
    pretrained: bool = False


@dataclass(frozen=True)
class ModelConfig:
    backbone: BackboneSpec
    head_hidden_units: int = 16
    head_output: str = "softmax_2"
    positive_class: str = field(default=POSITIVE_CLASS)

    def __post_init__(self):
        if self.head_hidden_units < 1:
            raise VeriframeError(
                f"head_hidden_units must be >= 1, got {self.head_hidden_units}"
            )
        if self.head_output not in HEAD_OUTPUTS:
            raise VeriframeError(f"unknown head_output {self.head_output!r}")
        if self.positive_class != POSITIVE_CLASS:
            raise VeriframeError("positive class is fixed to FAKE")


class Model(Protocol):
    config: ModelConfig

    def predict_proba(self, batch: np.ndarray) -> np.ndarray: ...

    def parameters(self) -> list[tuple[str, np.ndarray]]: ...

    def set_parameters(self, named: list[tuple[str, np.ndarray]]) -> None: ...

    def configure_optimizer(self, learning_rate: float) -> None: ...

    def train_batch(self, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]: ...


def head_out_dim(head_output: str) -> int:
    return 1 if head_output == "sigmoid_1" else 2


def make_head(n_features: int, hidden_units: int, head_output: str,
              rng: np.random.Generator) -> Sequential:
    """Dense hidden layer plus the output logits for the chosen head."""
    return Sequential([
        Dense(n_features, hidden_units, rng, name="head.hidden"),
        ReLU(),
        Dense(hidden_units, head_out_dim(head_output), rng, name="head.out"),
    ])


def logits_to_probability_fake(z: np.ndarray, head_output: str) -> np.ndarray:
    if head_output == "sigmoid_1":
        # The single neuron models p_real; the public contract is p_fake.
        return sigmoid(-z[:, 0])
    return softmax(z)[:, 1]


def loss_and_logit_grad(z: np.ndarray, y: np.ndarray, head_output: str):
    """Mean binary cross-entropy on probability_fake plus dL/dlogits.

    Gradients are the exact fused forms (no clipping), so finite-difference
    checks of the printed loss agree to machine precision.
    """
    n = z.shape[0]
    eps = 1e-12
    if head_output == "sigmoid_1":
        p_fake = sigmoid(-z[:, 0])
        loss = -np.mean(
            y * np.log(np.maximum(p_fake, eps))
            + (1.0 - y) * np.log(np.maximum(1.0 - p_fake, eps))
        )
        dz = ((y - p_fake) / n)[:, None]
        return float(loss), p_fake, dz
    probs = softmax(z)
    p_fake = probs[:, 1]
    picked = np.where(y >= 0.5, p_fake, probs[:, 0])
    loss = -np.mean(np.log(np.maximum(picked, eps)))
    onehot = np.stack([1.0 - y, y], axis=1)
    dz = (probs - onehot) / n
    return float(loss), p_fake, dz


class NumpyModel:
    """In-repo conv backbone + dense head with analytic backprop."""

    engine = "numpy"

    def __init__(self, config: ModelConfig, features: Sequential,
                 n_features: int, seed: int):
        self.config = config
        self.features = features
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6EAD]))
        self.head = make_head(n_features, config.head_hidden_units,
                              config.head_output, rng)
        self._optimizer: Adam | None = None

    # -- inference ---------------------------------------------------------

    def _check_batch(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float64)
        size = self.config.backbone.input_size
        if batch.ndim != 4 or batch.shape[1:] != (size, size, 3):
            raise VeriframeError(
                f"input size mismatch: backbone {self.config.backbone.name!r} "
                f"expects (B, {size}, {size}, 3), got {batch.shape}"
            )
        return batch

    def forward_logits(self, batch: np.ndarray, train: bool = False) -> np.ndarray:
        feats = self.features.forward(self._check_batch(batch), train=train)
        return self.head.forward(feats, train=train)

    def predict_proba(self, batch: np.ndarray) -> np.ndarray:
        z = self.forward_logits(batch, train=False)
        return logits_to_probability_fake(z, self.config.head_output)

    __call__ = predict_proba

    # -- training ----------------------------------------------------------

    def configure_optimizer(self, learning_rate: float) -> None:
        self._optimizer = Adam(self.param_objects(), lr=learning_rate)

    def train_batch(self, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
        if self._optimizer is None:
            raise VeriframeError("optimizer not configured")
        self._optimizer.zero_grad()
        z = self.forward_logits(x, train=True)
        loss, p_fake, dz = loss_and_logit_grad(z, np.asarray(y, dtype=np.float64),
                                               self.config.head_output)
        dfeat = self.head.backward(dz)
        self.features.backward(dfeat)
        self._optimizer.step()
        return loss, p_fake

    def head_loss(self, features: np.ndarray, y: np.ndarray) -> float:
        z = self.head.forward(np.asarray(features, dtype=np.float64), train=False)
        loss, _, _ = loss_and_logit_grad(z, np.asarray(y, dtype=np.float64),
                                         self.config.head_output)
        return loss

    def head_loss_and_grads(self, features: np.ndarray, y: np.ndarray) -> float:
        """Backprop through the head only; gradients land on head params."""
        for p in self.head.parameters():
            p.zero_grad()
        z = self.head.forward(np.asarray(features, dtype=np.float64), train=True)
        loss, _, dz = loss_and_logit_grad(z, np.asarray(y, dtype=np.float64),
                                          self.config.head_output)
        self.head.backward(dz)
        return loss

    # -- parameter access ---------------------------------------------------

    def param_objects(self) -> list[Parameter]:
        return self.features.parameters() + self.head.parameters()

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        return [(p.name, p.value) for p in self.param_objects()]

    def set_parameters(self, named: list[tuple[str, np.ndarray]]) -> None:
        own = {p.name: p for p in self.param_objects()}
        if set(own) != {name for name, _ in named}:
            raise VeriframeError(
                f"parameter names do not match model: expected {sorted(own)}"
            )
        for name, value in named:
            target = own[name]
            value = np.asarray(value, dtype=np.float64)
            if value.shape != target.value.shape:
                raise VeriframeError(
                    f"parameter {name!r} shape {value.shape} != {target.value.shape}"
                )
            target.value[...] = value

    def snapshot(self) -> list[tuple[str, np.ndarray]]:
        return [(p.name, p.value.copy()) for p in self.param_objects()]


def _build_tiny(config: ModelConfig, seed: int) -> NumpyModel:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7141]))
    features = Sequential([
        Conv2d(3, 8, 3, rng, name="conv1"),
        ReLU(),
        MaxPool2d(),
        Conv2d(8, 16, 3, rng, name="conv2"),
        ReLU(),
        MaxPool2d(),
        GlobalAvgPool(),
    ])
    return NumpyModel(config, features, n_features=16, seed=seed)


def _build_keras(config: ModelConfig, seed: int):
    from .keras_backbones import build_keras_model

    return build_keras_model(config, seed)


_Builder = Callable[[ModelConfig, int], Model]

_REGISTRY: dict[str, tuple[BackboneSpec, _Builder]] = {
    "tiny_test": (BackboneSpec("tiny_test", input_size=64, nominal_depth=4), _build_tiny),
    "resnet50": (BackboneSpec("resnet50", input_size=224, nominal_depth=50), _build_keras),
    "efficientnet_b0": (BackboneSpec("efficientnet_b0", input_size=224, nominal_depth=82), _build_keras),
    "inception_resnet_v2": (BackboneSpec("inception_resnet_v2", input_size=299, nominal_depth=164), _build_keras),
}


def register_backbone(spec: BackboneSpec, builder: _Builder) -> None:
    _REGISTRY[spec.name] = (spec, builder)


def available_backbones() -> list[str]:
    return sorted(_REGISTRY)


def backbone_spec(name: str) -> BackboneSpec:
    try:
        return _REGISTRY[name][0]
    except KeyError:
        raise RegistryError(
            f"unknown backbone {name!r}; registered: {available_backbones()}"
        ) from None


def build_model(config: ModelConfig, seed: int = 0) -> Model:
    name = config.backbone.name
    try:
        _, builder = _REGISTRY[name]
    except KeyError:
        raise RegistryError(
            f"unknown backbone {name!r}; registered: {available_backbones()}"
        ) from None
    return builder(config, seed)


def default_config(backbone_name: str, head_output: str = "softmax_2",
                   head_hidden_units: int = 16) -> ModelConfig:
    return ModelConfig(
        backbone=backbone_spec(backbone_name),
        head_hidden_units=head_hidden_units,
        head_output=head_output,
    )
