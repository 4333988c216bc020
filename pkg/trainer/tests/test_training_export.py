import json

import numpy as np
import pytest

from theft_trainer.dataset import synthesize_dataset
from theft_trainer.errors import RangeError
from theft_trainer.export import (
    ExportScales,
    metrics_report,
    quantize_export,
    quantize_first_layer,
)
from theft_trainer.training import TrainingConfig, predict_labels, train

TINY = dict(epochs=2, batch_size=64, lstm_units=8, first_layer_units=4,
            validation_fraction=0.0, reduce_lr_on_plateau=False,
            early_stopping=False)


@pytest.fixture(scope="module")
def tiny_data(honest_csv):
    return synthesize_dataset(honest_csv, seed=2)


class TestTraining:
    def test_zero_epochs_is_chance_on_balanced_set(self, tiny_data):
        trained = train(tiny_data.x_train, tiny_data.y_train,
                        TrainingConfig(seed=1, **{**TINY, "epochs": 0}))
        preds = predict_labels(trained.model, tiny_data.x_train)
        accuracy = float(np.mean(preds == tiny_data.y_train))
        assert 0.35 <= accuracy <= 0.65
        assert trained.history == {}

    def test_same_seed_identical_history(self, tiny_data):
        cfg = TrainingConfig(seed=9, **TINY)
        h1 = train(tiny_data.x_train, tiny_data.y_train, cfg).history
        h2 = train(tiny_data.x_train, tiny_data.y_train, cfg).history
        assert h1 == h2
        assert len(h1["loss"]) == 2

    def test_learning_happens(self, tiny_data):
        cfg = TrainingConfig(seed=3, **{**TINY, "epochs": 6})
        trained = train(tiny_data.x_train, tiny_data.y_train, cfg)
        assert trained.history["loss"][-1] < trained.history["loss"][0]


class TestExport:
    def test_quantize_range_guard(self):
        kernel = np.zeros((8, 2))
        kernel[0, 0] = 40.0
        with pytest.raises(RangeError):
            quantize_first_layer(kernel, ExportScales())

    def test_reproducible_weight_file(self, tiny_data, tmp_path):
        cfg = TrainingConfig(seed=4, **TINY)
        fixture = [float(v) for v in tiny_data.x_test[0]]
        paths = []
        for name in ("a.json", "b.json"):
            trained = train(tiny_data.x_train, tiny_data.y_train, cfg)
            path = tmp_path / name
            quantize_export(trained.model, ExportScales(), path, fixture)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_export_loads_in_detector_and_agrees(self, tiny_data, tmp_path):
        from privgrid.detector import infer, load_weights, logits_from_activations
        from privgrid.detector import first_layer_plain

        cfg = TrainingConfig(seed=5, **TINY)
        trained = train(tiny_data.x_train, tiny_data.y_train, cfg)
        path = tmp_path / "weights.json"
        fixture = [float(v) for v in tiny_data.x_test[1]]
        doc = quantize_export(trained.model, ExportScales(), path, fixture)

        model = load_weights(path)
        assert model.shape_chain == [48, 4, 8, 8, 2]

        got_logits = logits_from_activations(
            first_layer_plain(fixture, model.first), model
        )
        want_logits = [float(v) for v in doc["reference"]["quantized_logits"]]
        assert list(got_logits) == want_logits  # bit-for-bit

        got_probs = infer(fixture, model, path="plain")
        want_probs = np.array(
            [float(v) for v in doc["reference"]["full_precision_probs"]]
        )
        assert np.abs(got_probs - want_probs).max() <= 1e-5

    def test_keras_and_numpy_forward_agree(self, tiny_data, tmp_path):
        # convention check: gate order, activation choice, state init
        from theft_trainer.export import extract_keras_stack, _lstm_forward, _f64

        cfg = TrainingConfig(seed=6, **TINY)
        trained = train(tiny_data.x_train, tiny_data.y_train, cfg)
        stack = extract_keras_stack(trained.model)
        x = tiny_data.x_test[:8]
        keras_probs = trained.model.predict(x, verbose=0)

        w_first, b_first = stack["first"]
        for row, want in zip(x, keras_probs):
            act = np.tanh(row @ _f64(w_first) + _f64(b_first))
            seq = act.reshape(-1, 1)
            (w1, u1, b1), (w2, u2, b2) = stack["lstm"]
            seq, _ = _lstm_forward(seq, _f64(w1), _f64(u1), _f64(b1), True)
            h = _lstm_forward(seq, _f64(w2), _f64(u2), _f64(b2))
            head_w, head_b = stack["head"]
            logits = h @ _f64(head_w) + _f64(head_b)
            probs = np.exp(logits - logits.max())
            probs /= probs.sum()
            assert np.abs(probs - want).max() < 1e-4  # float32 vs float64


class TestMetricsReport:
    def test_counts(self):
        y = np.array([1, 1, 0, 0, 1])
        p = np.array([1, 0, 0, 1, 1])
        rep = metrics_report(y, p)
        assert (rep["tp"], rep["fn"], rep["fp"], rep["tn"]) == (2, 1, 1, 1)
        assert rep["dr"] == pytest.approx(2 / 3)
        assert rep["fa"] == pytest.approx(1 / 2)
        assert rep["hd"] == pytest.approx(2 / 3 - 1 / 2)
