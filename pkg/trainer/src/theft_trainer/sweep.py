"""Optional hyperparameter sweep: time steps, batch size, LSTM width.

Reproduces the parameter-study axes (slots {24,48,96}, batch
{256,512,1024}, units {200,300,360}) at whatever corpus the CSV
provides.  One axis varies at a time around the defaults; results land
in a JSON table.  This is exploratory tooling, not part of the tests.

    python -m theft_trainer.sweep --csv honest.csv --out sweep.json --seed 1 \
        --axis batch
"""

from __future__ import annotations

import argparse
import json
import sys

from .dataset import synthesize_dataset
from .export import metrics_report
from .training import TrainingConfig, predict_labels, train

AXES = {
    "slots": [24, 48, 96],
    "batch": [256, 512, 1024],
    "units": [200, 300, 360],
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="theft-trainer-sweep")
    parser.add_argument("--csv", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--axis", choices=sorted(AXES), required=True)
    parser.add_argument("--epochs", type=int, default=30)
    args = parser.parse_args(argv)

    rows = []
    for value in AXES[args.axis]:
        slots = value if args.axis == "slots" else 48
        data = synthesize_dataset(args.csv, args.seed, period_slots=slots)
        cfg = TrainingConfig(
            seed=args.seed,
            epochs=args.epochs,
            batch_size=value if args.axis == "batch" else 512,
            lstm_units=value if args.axis == "units" else 300,
        )
        trained = train(data.x_train, data.y_train, cfg)
        report = metrics_report(
            data.y_test, predict_labels(trained.model, data.x_test)
        )
        rows.append({"axis": args.axis, "value": value, **report})
        print("%s=%s -> accuracy %.4f" % (args.axis, value, report["accuracy"]))
    with open(args.out, "w") as fh:
        json.dump(rows, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
