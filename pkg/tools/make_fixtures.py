"""Regenerate the bundled deterministic fixtures (sample CSV, weight file).

Outputs are pure functions of the seeds below; rerunning must leave the
repository diff-clean.
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from privgrid.crypto import FixedPointCodec, system_params, params_to_json
from privgrid.detector import random_model, save_weights
from privgrid.gridsim import TopologyConfig, generate_dataset, write_readings_csv

DATA = pathlib.Path(__file__).resolve().parents[1] / "src" / "privgrid" / "data"


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    codec = FixedPointCodec()

    topo = TopologyConfig(areas=1, meters_per_area=5, period_slots=48, seed=1234)
    series = generate_dataset(topo, days=1, codec=codec)
    write_readings_csv(DATA / "sample_readings.csv", series, codec)

    model = random_model(d=48, n=10, lstm_units=(24, 16), seed=2024, codec=codec)
    save_weights(model, DATA / "weights_fixture.json")

    (DATA / "params.json").write_text(params_to_json(system_params()))
    print("fixtures written to", DATA)


if __name__ == "__main__":
    main()
