"""Walkthrough: one full detection day with a thief in the area.

Meter 2 under-reports (scaling attack, alpha=0.3).  The pipeline keys the
area, encrypts and ledgers every slot, recovers the area totals, flags
the gap against the transformer reading, and scores meters with the
detector run purely on encrypted first-layer inner products.

The bundled weight fixture is random (shape-valid, untrained) so its
scores carry no signal; train real weights with the trainer package and
point TRAINED_WEIGHTS at the export to see the thief ranked on top.
"""

import importlib.resources as resources
import pathlib

from privgrid.crypto import FixedPointCodec
from privgrid.detector import load_weights
from privgrid.gridsim import (
    AttackAssignment,
    AttackSpec,
    TopologyConfig,
    generate_dataset,
    run_period,
)

TRAINED_WEIGHTS = pathlib.Path(__file__).resolve().parents[1] / "trainer" / "out" / "weights.json"

codec = FixedPointCodec()
topo = TopologyConfig(areas=1, meters_per_area=6, period_slots=48, seed=11)
dataset = generate_dataset(topo, days=1, codec=codec)
if TRAINED_WEIGHTS.exists():
    print("using trained weights from", TRAINED_WEIGHTS)
    weights = load_weights(TRAINED_WEIGHTS)
else:
    print("using the random bundled fixture (scores will be uninformative)")
    weights = load_weights(resources.files("privgrid") / "data" / "weights_fixture.json")

attacks = [AttackAssignment(2, AttackSpec("f1", alpha=0.3, seed=4))]
print("meter 2 steals: reports 30% of its true consumption")
print()

report = run_period(topo, dataset, attacks, weights)
area = report.areas[0]
print("miner:", area.miner_id, "| blocks committed:", area.consensus_committed,
      "| chain valid:", area.chain_valid)
print("decrypted day total: %.1f kWh | transformer reading: %.1f kWh" %
      (sum(area.slot_totals) / 1000, area.e_dtm / 1000))
print("verdict:", area.verdict.upper())
print()
print("per-meter theft scores (encrypted-path inference):")
for meter_id, prob in sorted(area.detection.items(), key=lambda kv: -kv[1]):
    marker = "  <-- attacked" if meter_id == 2 else ""
    print("  meter %d: %.4f%s" % (meter_id, prob, marker))
print()
print("one reading's wire size:", area.report_bytes_measured, "bytes")
print("phase timings:", {k: round(v, 3) for k, v in area.phase_seconds.items()})
