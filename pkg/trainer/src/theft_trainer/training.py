"""Keras training of the detector architecture.

Architecture: dense d->n (tanh) feeding the LSTM stack as a length-n
sequence of 1-dim inputs, two LSTM layers with l2 kernel regularization,
softmax head.  RMSprop, categorical cross-entropy, the published
defaults (30 epochs, batch 512, lr 0.001), learning-rate reduction on
plateau, and early stopping.

TensorFlow import is deferred and pinned to deterministic CPU settings
(oneDNN off, op determinism on) so a fixed seed reproduces weights
byte-for-byte.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from .errors import DivergenceError

_TF = None


def _tf():
    global _TF
    if _TF is None:
        os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "2")
        os.environ["TF_ENABLE_ONEDNN_OPTS"] = "0"  # keep float ops order-stable
        import tensorflow as tf

        tf.config.experimental.enable_op_determinism()
        _TF = tf
    return _TF


@dataclass(frozen=True)
class TrainingConfig:
    seed: int
    epochs: int = 30
    batch_size: int = 512
    learning_rate: float = 0.001
    first_layer_units: int = 10
    lstm_units: int = 300
    l2_kernel: float = 1e-4
    reduce_lr_on_plateau: bool = True
    early_stopping: bool = True
    validation_fraction: float = 0.1

    def __post_init__(self):
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation fraction must lie in [0, 1)")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("bad epochs/batch size")


@dataclass
class TrainedModel:
    model: object
    history: Dict[str, List[float]] = field(default_factory=dict)


def build_model(d: int, cfg: TrainingConfig):
    tf = _tf()
    layers = tf.keras.layers
    reg = tf.keras.regularizers.l2(cfg.l2_kernel)
    model = tf.keras.Sequential(
        [
            tf.keras.Input(shape=(d,)),
            layers.Dense(cfg.first_layer_units, activation="tanh", name="first"),
            layers.Reshape((cfg.first_layer_units, 1)),
            layers.LSTM(cfg.lstm_units, return_sequences=True,
                        kernel_regularizer=reg, name="lstm_a"),
            layers.LSTM(cfg.lstm_units, kernel_regularizer=reg, name="lstm_b"),
            layers.Dense(2, activation="softmax", name="head"),
        ]
    )
    model.compile(
        optimizer=tf.keras.optimizers.RMSprop(learning_rate=cfg.learning_rate),
        loss="categorical_crossentropy",
        metrics=["accuracy"],
    )
    return model


def train(x: np.ndarray, y: np.ndarray, cfg: TrainingConfig) -> TrainedModel:
    """Fit on balanced features; y holds 0/1 labels."""
    tf = _tf()
    tf.keras.utils.set_random_seed(cfg.seed)
    model = build_model(x.shape[1], cfg)
    if cfg.epochs == 0:
        return TrainedModel(model, {})
    y_cat = tf.keras.utils.to_categorical(y, 2)
    callbacks = [tf.keras.callbacks.TerminateOnNaN()]
    monitor = "val_loss" if cfg.validation_fraction else "loss"
    if cfg.reduce_lr_on_plateau:
        callbacks.append(
            tf.keras.callbacks.ReduceLROnPlateau(
                monitor=monitor, factor=0.5, patience=2, min_lr=1e-5
            )
        )
    if cfg.early_stopping:
        callbacks.append(
            tf.keras.callbacks.EarlyStopping(
                monitor=monitor, patience=4, restore_best_weights=True
            )
        )
    # shuffle once with the seeded generator so validation_split (which
    # takes the tail) sees both classes
    order = np.random.default_rng(cfg.seed).permutation(len(x))
    fit = model.fit(
        x[order],
        y_cat[order],
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        validation_split=cfg.validation_fraction,
        callbacks=callbacks,
        verbose=0,
    )
    history = {k: [float(v) for v in vals] for k, vals in fit.history.items()}
    losses = history.get("loss", [])
    if losses and not np.isfinite(losses[-1]):
        raise DivergenceError("training loss became non-finite")
    return TrainedModel(model, history)


def predict_labels(model, x: np.ndarray, batch_size: int = 1024) -> np.ndarray:
    probs = model.predict(x, batch_size=batch_size, verbose=0)
    return np.argmax(probs, axis=1)
