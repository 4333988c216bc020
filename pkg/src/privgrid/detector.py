"""Neural theft detector: private first layer, LSTM stack, metrics.

The first dense layer collapses a d-slot day into n activations.  Its
weights are integer-quantized so the functional-decryption route and the
plaintext route compute the *same* integer inner products and therefore
bit-identical activations: the only real-arithmetic steps (scale, bias,
tanh) happen after the exact integer part on both paths.

The n activations feed the LSTM stack as a length-n sequence of
one-dimensional inputs, followed by a two-way softmax head.  All floating
point runs in numpy float64 with a fixed operation order, so inference is
reproducible bit-for-bit.

Weight file format (JSON, reals as decimal strings, arrays row-major):

    {"version": 1, "d": ..., "n": ..., "reading_scale": ...,
     "weight_scale_bits": ...,
     "first": {"w_quant": int[d][n], "bias": real[n]},
     "lstm": [{"input_dim": ..., "units": ..., "W": real[input_dim][4u],
               "U": real[units][4u], "b": real[4u]}, ...],
     "output": {"W": real[units][2], "b": real[2]}}

LSTM gates are packed in i, f, c, o order along the last axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .crypto import FixedPointCodec
from .errors import LengthMismatch, NonFiniteError, ParseError, ShapeError
from .funcenc import QuantizedFirstLayer

WEIGHTS_VERSION = 1


# ---------------------------------------------------------------------------
# Model containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LstmLayer:
    input_dim: int
    units: int
    W: np.ndarray  # (input_dim, 4*units)
    U: np.ndarray  # (units, 4*units)
    b: np.ndarray  # (4*units,)

    def __post_init__(self):
        if self.W.shape != (self.input_dim, 4 * self.units):
            raise ShapeError("lstm kernel shape %s" % (self.W.shape,))
        if self.U.shape != (self.units, 4 * self.units):
            raise ShapeError("lstm recurrent shape %s" % (self.U.shape,))
        if self.b.shape != (4 * self.units,):
            raise ShapeError("lstm bias shape %s" % (self.b.shape,))


@dataclass(frozen=True)
class OutputLayer:
    W: np.ndarray  # (units, 2)
    b: np.ndarray  # (2,)


@dataclass(frozen=True)
class ModelWeights:
    first: QuantizedFirstLayer
    lstm_layers: Tuple[LstmLayer, ...]
    output: OutputLayer

    def __post_init__(self):
        if not self.lstm_layers:
            raise ShapeError("model needs at least one recurrent layer")
        if self.lstm_layers[0].input_dim != 1:
            raise ShapeError("first recurrent layer must take 1-dim inputs")
        prev = self.lstm_layers[0].units
        for layer in self.lstm_layers[1:]:
            if layer.input_dim != prev:
                raise ShapeError(
                    "recurrent layer expects %d-dim inputs after %d units"
                    % (layer.input_dim, prev)
                )
            prev = layer.units
        if self.output.W.shape != (prev, 2) or self.output.b.shape != (2,):
            raise ShapeError("output head must map %d units to 2 classes" % prev)

    @property
    def shape_chain(self) -> List[int]:
        return [self.first.d, self.first.n] + [l.units for l in self.lstm_layers] + [2]


# ---------------------------------------------------------------------------
# Parameter counting
# ---------------------------------------------------------------------------


def dense_param_count(n_in: int, n_out: int) -> int:
    return n_in * n_out + n_out


def lstm_param_count(input_dim: int, units: int) -> int:
    """Kernel + recurrent kernel + bias over the four gates."""
    return 4 * units * (input_dim + units + 1)


def model_param_counts(weights: ModelWeights) -> Dict[str, int]:
    counts = {"first": dense_param_count(weights.first.d, weights.first.n)}
    for idx, layer in enumerate(weights.lstm_layers):
        counts["lstm%d" % idx] = lstm_param_count(layer.input_dim, layer.units)
    out_in = weights.lstm_layers[-1].units
    counts["output"] = dense_param_count(out_in, 2)
    return counts


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def _finish_first_layer(products: np.ndarray, layer: QuantizedFirstLayer) -> np.ndarray:
    scale = float(layer.codec.reading_scale * layer.codec.weight_scale)
    return np.tanh(products / scale + layer.bias)


def first_layer_private(
    products: Sequence[int], layer: QuantizedFirstLayer
) -> np.ndarray:
    """Activations from functionally-decrypted integer inner products."""
    arr = np.asarray(products, dtype=np.float64)
    if arr.shape != (layer.n,):
        raise ShapeError("expected %d decrypted products" % layer.n)
    return _finish_first_layer(arr, layer)


def first_layer_plain(readings_kwh: Sequence[float], layer: QuantizedFirstLayer) -> np.ndarray:
    """Plaintext route through the same quantized weights.

    Readings are fixed-point encoded and multiplied in exact integer
    arithmetic, which is precisely the value the decryption route
    recovers, so the two paths agree bit-for-bit.
    """
    if len(readings_kwh) != layer.d:
        raise ShapeError("expected %d readings" % layer.d)
    units = np.array(
        [layer.codec.encode_reading(float(v)) for v in readings_kwh], dtype=np.int64
    )
    products = units @ layer.w  # exact: magnitudes stay far below 2^63
    return _finish_first_layer(products.astype(np.float64), layer)


def first_layer_reference(
    readings_kwh: Sequence[float], w_real: np.ndarray, bias: np.ndarray
) -> np.ndarray:
    """Full-precision activations from unquantized weights (float path)."""
    x = np.asarray(readings_kwh, dtype=np.float64)
    return np.tanh(x @ np.asarray(w_real, dtype=np.float64) + bias)


def lstm_forward(
    sequence: np.ndarray, layer: LstmLayer, return_sequence: bool = False
):
    """Standard LSTM pass with zero initial states; gates i, f, c, o."""
    seq = np.asarray(sequence, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[1] != layer.input_dim:
        raise ShapeError(
            "sequence shape %s does not match input_dim %d"
            % (seq.shape, layer.input_dim)
        )
    u = layer.units
    h = np.zeros(u)
    c = np.zeros(u)
    outputs = np.empty((seq.shape[0], u)) if return_sequence else None
    for t in range(seq.shape[0]):
        z = seq[t] @ layer.W + h @ layer.U + layer.b
        i = _sigmoid(z[:u])
        f = _sigmoid(z[u : 2 * u])
        g = np.tanh(z[2 * u : 3 * u])
        o = _sigmoid(z[3 * u :])
        c = f * c + i * g
        h = o * np.tanh(c)
        if return_sequence:
            outputs[t] = h
    return (outputs, h) if return_sequence else h


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def logits_from_activations(activations: np.ndarray, weights: ModelWeights) -> np.ndarray:
    seq = np.asarray(activations, dtype=np.float64).reshape(-1, 1)
    if seq.shape[0] != weights.first.n:
        raise ShapeError("expected %d first-layer activations" % weights.first.n)
    for idx, layer in enumerate(weights.lstm_layers):
        last = idx == len(weights.lstm_layers) - 1
        if last:
            h = lstm_forward(seq, layer)
        else:
            seq, h = lstm_forward(seq, layer, return_sequence=True)
    return h @ weights.output.W + weights.output.b


def infer_from_activations(activations: np.ndarray, weights: ModelWeights) -> np.ndarray:
    return softmax(logits_from_activations(activations, weights))


def infer(inputs, weights: ModelWeights, path: str = "plain") -> np.ndarray:
    """Class probabilities (honest, theft) for one meter-day.

    path="plain" takes d kWh readings; path="private" takes the n integer
    inner products recovered by functional decryption.
    """
    if path == "plain":
        activations = first_layer_plain(inputs, weights.first)
    elif path == "private":
        activations = first_layer_private(inputs, weights.first)
    else:
        raise ValueError("path must be plain or private")
    return infer_from_activations(activations, weights)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def dr(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def fa(self) -> float:
        return self.fp / (self.tn + self.fp) if self.tn + self.fp else 0.0

    @property
    def hd(self) -> float:
        return self.dr - self.fa

    @property
    def accuracy(self) -> float:
        total = self.tp + self.fp + self.tn + self.fn
        return (self.tp + self.tn) / total if total else 0.0

    def as_dict(self) -> Dict[str, float]:
        return {
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
            "dr": self.dr, "fa": self.fa, "hd": self.hd,
            "accuracy": self.accuracy,
        }


def evaluate(predictions: Sequence[int], labels: Sequence[int]) -> Metrics:
    """Confusion counts and rates; label 1 marks a thief."""
    if len(predictions) != len(labels):
        raise LengthMismatch(
            "%d predictions vs %d labels" % (len(predictions), len(labels))
        )
    tp = fp = tn = fn = 0
    for pred, lab in zip(predictions, labels):
        if lab not in (0, 1) or pred not in (0, 1):
            raise ValueError("labels and predictions must be binary")
        if pred and lab:
            tp += 1
        elif pred and not lab:
            fp += 1
        elif not pred and lab:
            fn += 1
        else:
            tn += 1
    return Metrics(tp, fp, tn, fn)


# ---------------------------------------------------------------------------
# Weight file I/O
# ---------------------------------------------------------------------------


def _real(value) -> float:
    return float(value)


def _check_finite(name: str, arr: np.ndarray) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NonFiniteError("%s contains NaN or infinity" % name)
    return arr


def _real_matrix(name: str, rows, shape) -> np.ndarray:
    arr = np.array([[_real(v) for v in row] for row in rows], dtype=np.float64)
    if arr.shape != shape:
        raise ShapeError("%s has shape %s, want %s" % (name, arr.shape, shape))
    return _check_finite(name, arr)


def _real_vector(name: str, values, length) -> np.ndarray:
    arr = np.array([_real(v) for v in values], dtype=np.float64)
    if arr.shape != (length,):
        raise ShapeError("%s has length %d, want %d" % (name, arr.size, length))
    return _check_finite(name, arr)


def load_weights(path) -> ModelWeights:
    """Parse and fully validate a weight file; any shape problem is fatal."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError("cannot read weight file %s: %s" % (path, exc)) from exc
    try:
        if doc["version"] != WEIGHTS_VERSION:
            raise ParseError("unsupported weight file version %r" % doc["version"])
        d, n = int(doc["d"]), int(doc["n"])
        codec = FixedPointCodec(int(doc["reading_scale"]), int(doc["weight_scale_bits"]))
        w_quant = np.array(doc["first"]["w_quant"], dtype=np.int64)
        if w_quant.shape != (d, n):
            raise ShapeError(
                "first layer is %s, header says (%d, %d)" % (w_quant.shape, d, n)
            )
        bias = _real_vector("first.bias", doc["first"]["bias"], n)
        first = QuantizedFirstLayer(w_quant, bias, codec)
        lstm_layers = []
        for idx, entry in enumerate(doc["lstm"]):
            input_dim, units = int(entry["input_dim"]), int(entry["units"])
            lstm_layers.append(
                LstmLayer(
                    input_dim,
                    units,
                    _real_matrix("lstm%d.W" % idx, entry["W"], (input_dim, 4 * units)),
                    _real_matrix("lstm%d.U" % idx, entry["U"], (units, 4 * units)),
                    _real_vector("lstm%d.b" % idx, entry["b"], 4 * units),
                )
            )
        last_units = lstm_layers[-1].units if lstm_layers else 0
        output = OutputLayer(
            _real_matrix("output.W", doc["output"]["W"], (last_units, 2)),
            _real_vector("output.b", doc["output"]["b"], 2),
        )
    except KeyError as exc:
        raise ParseError("weight file missing field %s" % exc) from exc
    except (TypeError, ValueError) as exc:
        raise ParseError("malformed weight file: %s" % exc) from exc
    return ModelWeights(first, tuple(lstm_layers), output)


def _encode_reals(arr: np.ndarray):
    if arr.ndim == 1:
        return [repr(float(v)) for v in arr]
    return [[repr(float(v)) for v in row] for row in arr]


def weights_to_json(weights: ModelWeights) -> str:
    first = weights.first
    doc = {
        "version": WEIGHTS_VERSION,
        "d": first.d,
        "n": first.n,
        "reading_scale": first.codec.reading_scale,
        "weight_scale_bits": first.codec.weight_scale_bits,
        "first": {
            "w_quant": [[int(v) for v in row] for row in first.w],
            "bias": _encode_reals(first.bias),
        },
        "lstm": [
            {
                "input_dim": layer.input_dim,
                "units": layer.units,
                "W": _encode_reals(layer.W),
                "U": _encode_reals(layer.U),
                "b": _encode_reals(layer.b),
            }
            for layer in weights.lstm_layers
        ],
        "output": {
            "W": _encode_reals(weights.output.W),
            "b": _encode_reals(weights.output.b),
        },
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def save_weights(weights: ModelWeights, path) -> None:
    with open(path, "w") as fh:
        fh.write(weights_to_json(weights))


# ---------------------------------------------------------------------------
# Deterministic fixture models
# ---------------------------------------------------------------------------


def quantize_first_layer(
    w_real: np.ndarray, bias: np.ndarray, codec: FixedPointCodec
) -> QuantizedFirstLayer:
    """Round-half-even quantization of a real first-layer kernel."""
    w_quant = np.round(np.asarray(w_real, dtype=np.float64) * codec.weight_scale)
    return QuantizedFirstLayer(w_quant.astype(np.int64), bias, codec)


def random_model(
    d: int,
    n: int,
    lstm_units: Sequence[int],
    seed: int,
    codec: FixedPointCodec | None = None,
) -> ModelWeights:
    """Shape-valid random weights for fixtures and crypto-path testing."""
    codec = codec or FixedPointCodec()
    rng = np.random.default_rng(seed)

    def glorot(shape):
        limit = np.sqrt(6.0 / (shape[0] + shape[-1]))
        return rng.uniform(-limit, limit, size=shape)

    first = quantize_first_layer(glorot((d, n)) * 2.0, rng.uniform(-0.1, 0.1, n), codec)
    layers = []
    input_dim = 1
    for units in lstm_units:
        layers.append(
            LstmLayer(
                input_dim,
                units,
                glorot((input_dim, 4 * units)),
                glorot((units, 4 * units)),
                rng.uniform(-0.05, 0.05, 4 * units),
            )
        )
        input_dim = units
    output = OutputLayer(glorot((input_dim, 2)), rng.uniform(-0.05, 0.05, 2))
    return ModelWeights(first, tuple(layers), output)
