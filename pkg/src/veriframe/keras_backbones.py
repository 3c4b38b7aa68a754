"""Keras-backed full-size backbones behind the common Model interface.

TensorFlow is imported only when one of these backbones is actually built,
so the rest of the toolkit stays importable without it. Architectures are
constructed with random initialization by default; pass a weights path
through ``pretrained_weights`` to bind user-supplied parameters.
"""

from __future__ import annotations

import numpy as np

from .errors import RegistryError, VeriframeError
from .model import ModelConfig, head_out_dim, logits_to_probability_fake

_KERAS_BUILDERS = {
    "resnet50": "ResNet50",
    "efficientnet_b0": "EfficientNetB0",
    "inception_resnet_v2": "InceptionResNetV2",
}


def _import_tf():
    try:
        import tensorflow as tf
    except ImportError as exc:
        raise RegistryError(
            "this backbone needs the optional 'backbones' extra "
            "(pip install veriframe[backbones])"
        ) from exc
    return tf


class KerasModel:
    """Full-size backbone + dense head, trained and served through Keras."""

    engine = "keras"

    def __init__(self, config: ModelConfig, seed: int = 0,
                 pretrained_weights: str | None = None):
        tf = _import_tf()
        self._tf = tf
        self.config = config
        size = config.backbone.input_size
        tf.keras.utils.set_random_seed(seed)
        app = getattr(tf.keras.applications, _KERAS_BUILDERS[config.backbone.name])
        base = app(
            include_top=False,
            weights=pretrained_weights,
            pooling="avg",
            input_shape=(size, size, 3),
        )
        inputs = tf.keras.Input(shape=(size, size, 3))
        feats = base(inputs)
        hidden = tf.keras.layers.Dense(
            config.head_hidden_units, activation="relu", name="head_hidden"
        )(feats)
        logits = tf.keras.layers.Dense(
            head_out_dim(config.head_output), name="head_out"
        )(hidden)
        self.network = tf.keras.Model(inputs, logits)
        self._optimizer = None

    def _check_batch(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float32)
        size = self.config.backbone.input_size
        if batch.ndim != 4 or batch.shape[1:] != (size, size, 3):
            raise VeriframeError(
                f"input size mismatch: backbone {self.config.backbone.name!r} "
                f"expects (B, {size}, {size}, 3), got {batch.shape}"
            )
        return batch

    def predict_proba(self, batch: np.ndarray) -> np.ndarray:
        logits = self.network(self._check_batch(batch), training=False).numpy()
        return logits_to_probability_fake(logits.astype(np.float64),
                                          self.config.head_output)

    __call__ = predict_proba

    def configure_optimizer(self, learning_rate: float) -> None:
        self._optimizer = self._tf.keras.optimizers.Adam(learning_rate=learning_rate)

    def train_batch(self, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
        if self._optimizer is None:
            raise VeriframeError("optimizer not configured")
        tf = self._tf
        x = tf.constant(self._check_batch(x))
        y64 = np.asarray(y, dtype=np.float64)
        with tf.GradientTape() as tape:
            logits = self.network(x, training=True)
            if self.config.head_output == "sigmoid_1":
                # single neuron models p_real; BCE target is therefore 1 - y
                loss = tf.reduce_mean(
                    tf.nn.sigmoid_cross_entropy_with_logits(
                        labels=tf.constant(1.0 - y64, dtype=logits.dtype)[:, None],
                        logits=logits,
                    )
                )
            else:
                loss = tf.reduce_mean(
                    tf.nn.sparse_softmax_cross_entropy_with_logits(
                        labels=tf.constant(y64.astype(np.int32)), logits=logits
                    )
                )
        grads = tape.gradient(loss, self.network.trainable_variables)
        self._optimizer.apply_gradients(zip(grads, self.network.trainable_variables))
        p_fake = logits_to_probability_fake(
            logits.numpy().astype(np.float64), self.config.head_output
        )
        return float(loss.numpy()), p_fake

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        named = []
        for index, weight in enumerate(self.network.weights):
            named.append((f"w{index:04d}.{weight.name}", weight.numpy()))
        return named

    def set_parameters(self, named: list[tuple[str, np.ndarray]]) -> None:
        weights = self.network.weights
        if len(named) != len(weights):
            raise VeriframeError(
                f"expected {len(weights)} parameter arrays, got {len(named)}"
            )
        for (name, value), weight in zip(named, weights):
            if tuple(value.shape) != tuple(weight.shape):
                raise VeriframeError(
                    f"parameter {name!r} shape {value.shape} != {tuple(weight.shape)}"
                )
            weight.assign(value)

    def snapshot(self) -> list[tuple[str, np.ndarray]]:
        return [(name, value.copy()) for name, value in self.parameters()]


def build_keras_model(config: ModelConfig, seed: int = 0,
                      pretrained_weights: str | None = None) -> KerasModel:
    if config.backbone.name not in _KERAS_BUILDERS:
        raise RegistryError(f"no keras builder for {config.backbone.name!r}")
    return KerasModel(config, seed=seed, pretrained_weights=pretrained_weights)
