"""Batch entry point: honest CSV in, weight file + metrics report out.

    python -m theft_trainer.run --csv honest.csv --out out/ --seed 1

Writes ``out/weights.json`` (detector format, with the embedded reference
block) and ``out/metrics.json`` (held-out confusion counts and rates).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dataset import synthesize_dataset
from .errors import TrainerError
from .export import ExportScales, metrics_report, quantize_export
from .training import TrainingConfig, predict_labels, train


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="theft-trainer")
    parser.add_argument("--csv", required=True, help="honest readings CSV")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--batch-size", type=int, default=512)
    parser.add_argument("--learning-rate", type=float, default=0.001)
    parser.add_argument("--lstm-units", type=int, default=300)
    parser.add_argument("--period-slots", type=int, default=48)
    args = parser.parse_args(argv)

    try:
        data = synthesize_dataset(args.csv, args.seed, args.period_slots)
        cfg = TrainingConfig(
            seed=args.seed,
            epochs=args.epochs,
            batch_size=args.batch_size,
            learning_rate=args.learning_rate,
            lstm_units=args.lstm_units,
        )
        trained = train(data.x_train, data.y_train, cfg)
        preds = predict_labels(trained.model, data.x_test)
        report = metrics_report(data.y_test, preds)

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        fixture_day = [float(v) for v in data.x_test[0]]
        quantize_export(trained.model, ExportScales(), out / "weights.json", fixture_day)
        (out / "metrics.json").write_text(
            json.dumps(report, indent=1, sort_keys=True) + "\n"
        )
        (out / "history.json").write_text(
            json.dumps(trained.history, indent=1, sort_keys=True) + "\n"
        )
    except TrainerError as exc:
        print("error: %s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return 1
    print(
        "held-out: DR=%.3f FA=%.3f HD=%.3f accuracy=%.3f  (n=%d)"
        % (report["dr"], report["fa"], report["hd"], report["accuracy"],
           len(data.y_test))
    )
    print("weights written to %s" % (out / "weights.json"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
