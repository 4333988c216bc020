"""Quantized weight-file export plus the numpy reference forward pass.

The exported JSON follows the detector's documented schema exactly; an
extra top-level "reference" section (ignored by the detector's loader)
carries a fixture input together with this package's own forward-pass
outputs so the cross-component agreement can be asserted file-to-file:

* ``quantized_logits`` -- integer first layer, then float64 LSTM/head;
  the detector must reproduce these bit-for-bit;
* ``full_precision_probs`` -- the same weights evaluated with float
  first-layer arithmetic; the detector must agree within 1e-5.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from .errors import RangeError

WEIGHTS_VERSION = 1
MAX_ABS_WEIGHT = 32.0


@dataclass(frozen=True)
class ExportScales:
    reading_scale: int = 1000
    weight_scale_bits: int = 10

    @property
    def weight_scale(self) -> int:
        return 1 << self.weight_scale_bits


def extract_keras_stack(model) -> Dict[str, object]:
    """Pull (first dense, LSTM list, head) weights out of the Keras model."""
    dense, lstm = [], []
    for layer in model.layers:
        kind = type(layer).__name__
        if kind == "Dense":
            dense.append(layer.get_weights())
        elif kind == "LSTM":
            w, u, b = layer.get_weights()
            lstm.append((w, u, b))
    if len(dense) != 2 or not lstm:
        raise ValueError("expected one first dense layer, LSTMs, and a head")
    return {"first": dense[0], "lstm": lstm, "head": dense[1]}


def _reals(arr) -> List:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        return [repr(float(v)) for v in arr]
    return [[repr(float(v)) for v in row] for row in arr]


def quantize_first_layer(kernel: np.ndarray, scales: ExportScales) -> np.ndarray:
    kernel = np.asarray(kernel, dtype=np.float64)
    if np.abs(kernel).max(initial=0.0) >= MAX_ABS_WEIGHT:
        raise RangeError(
            "first-layer weight magnitude %.3f exceeds the +/-%g codec budget"
            % (np.abs(kernel).max(), MAX_ABS_WEIGHT)
        )
    return np.round(kernel * scales.weight_scale).astype(np.int64)


# ---------------------------------------------------------------------------
# Reference forward pass (numpy float64, same op order as the detector)
# ---------------------------------------------------------------------------


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _lstm_forward(seq, W, U, b, return_sequence=False):
    u = U.shape[0]
    h = np.zeros(u)
    c = np.zeros(u)
    outputs = np.empty((seq.shape[0], u)) if return_sequence else None
    for t in range(seq.shape[0]):
        z = seq[t] @ W + h @ U + b
        i = _sigmoid(z[:u])
        f = _sigmoid(z[u : 2 * u])
        g = np.tanh(z[2 * u : 3 * u])
        o = _sigmoid(z[3 * u :])
        c = f * c + i * g
        h = o * np.tanh(c)
        if return_sequence:
            outputs[t] = h
    return (outputs, h) if return_sequence else h


def _tail_logits(activations, stack):
    seq = activations.reshape(-1, 1)
    for idx, (W, U, b) in enumerate(stack["lstm64"]):
        if idx == len(stack["lstm64"]) - 1:
            h = _lstm_forward(seq, W, U, b)
        else:
            seq, h = _lstm_forward(seq, W, U, b, return_sequence=True)
    W_out, b_out = stack["head64"]
    return h @ W_out + b_out


def _softmax(logits):
    e = np.exp(logits - logits.max())
    return e / e.sum()


def reference_outputs(
    kwh: Sequence[float],
    w_quant: np.ndarray,
    bias: np.ndarray,
    stack: Dict[str, object],
    scales: ExportScales,
) -> Dict[str, np.ndarray]:
    """Both reference paths for one fixture day, from the exported values."""
    units = np.array([round(float(v) * scales.reading_scale) for v in kwh],
                     dtype=np.int64)
    scale = float(scales.reading_scale * scales.weight_scale)
    quant_act = np.tanh((units @ w_quant).astype(np.float64) / scale + bias)
    quant_logits = _tail_logits(quant_act, stack)

    w_deq = w_quant.astype(np.float64) / scales.weight_scale
    x = np.asarray(kwh, dtype=np.float64)
    fp_act = np.tanh(x @ w_deq + bias)
    fp_probs = _softmax(_tail_logits(fp_act, stack))
    return {"quantized_logits": quant_logits, "full_precision_probs": fp_probs}


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def _f64(arr) -> np.ndarray:
    """float64 view of the trained weights; repr() strings round-trip exactly."""
    return np.asarray(arr, dtype=np.float64)


def quantize_export(
    model,
    scales: ExportScales,
    path,
    fixture_kwh: Sequence[float],
) -> Dict[str, object]:
    """Write the weight file; returns the document (with reference block)."""
    stack = extract_keras_stack(model)
    first_kernel, first_bias = stack["first"]
    w_quant = quantize_first_layer(first_kernel, scales)
    d, n = w_quant.shape

    lstm_entries = []
    lstm64 = []
    for W, U, b in stack["lstm"]:
        W64 = _f64(W)
        U64 = _f64(U)
        b64 = _f64(b)
        lstm64.append((W64, U64, b64))
        lstm_entries.append(
            {
                "input_dim": W64.shape[0],
                "units": U64.shape[0],
                "W": _reals(W64),
                "U": _reals(U64),
                "b": _reals(b64),
            }
        )
    head_W, head_b = stack["head"]
    head64 = (_f64(head_W), _f64(head_b))
    bias64 = _f64(first_bias)

    refs = reference_outputs(
        fixture_kwh, w_quant, bias64,
        {"lstm64": lstm64, "head64": head64}, scales,
    )
    doc = {
        "version": WEIGHTS_VERSION,
        "d": d,
        "n": n,
        "reading_scale": scales.reading_scale,
        "weight_scale_bits": scales.weight_scale_bits,
        "first": {
            "w_quant": [[int(v) for v in row] for row in w_quant],
            "bias": _reals(bias64),
        },
        "lstm": lstm_entries,
        "output": {"W": _reals(head64[0]), "b": _reals(head64[1])},
        "reference": {
            "input_kwh": [repr(float(v)) for v in fixture_kwh],
            "quantized_logits": [repr(float(v)) for v in refs["quantized_logits"]],
            "full_precision_probs": [
                repr(float(v)) for v in refs["full_precision_probs"]
            ],
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return doc


def metrics_report(y_true: np.ndarray, y_pred: np.ndarray) -> Dict[str, float]:
    """Confusion counts and DR/FA/HD/accuracy in the detector's report shape."""
    tp = int(np.sum((y_pred == 1) & (y_true == 1)))
    fp = int(np.sum((y_pred == 1) & (y_true == 0)))
    tn = int(np.sum((y_pred == 0) & (y_true == 0)))
    fn = int(np.sum((y_pred == 0) & (y_true == 1)))
    dr = tp / (tp + fn) if tp + fn else 0.0
    fa = fp / (tn + fp) if tn + fp else 0.0
    total = tp + fp + tn + fn
    return {
        "tp": tp, "fp": fp, "tn": tn, "fn": fn,
        "dr": dr, "fa": fa, "hd": dr - fa,
        "accuracy": (tp + tn) / total if total else 0.0,
    }
