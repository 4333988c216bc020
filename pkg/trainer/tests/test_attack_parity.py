"""The trainer's attack generators must bit-match the frozen fixture that
the detector-side implementation also asserts against."""

import json
from pathlib import Path

import pytest

from theft_trainer.attacks import ATTACK_KINDS, apply_attack

GOLDEN = Path(__file__).resolve().parents[2] / "fixtures" / "cross_attacks.json"


@pytest.fixture(scope="module")
def golden():
    return json.loads(GOLDEN.read_text())


def test_every_case_matches(golden):
    checked = 0
    for case in golden["cases"]:
        for name, entry in case["attacks"].items():
            kind = name.split("_")[0]
            out = apply_attack(
                kind,
                case["readings"],
                case["meter_id"],
                case["day"],
                entry["seed"],
                alpha=entry.get("alpha"),
                window=tuple(entry["window"]) if "window" in entry else None,
            )
            assert out == entry["out"], "%s diverged on %s/%s" % (
                name, case["meter_id"], case["day"],
            )
            checked += 1
    assert checked == len(golden["cases"]) * (len(ATTACK_KINDS) + 2)


def test_fixture_covers_all_kinds(golden):
    kinds = {k.split("_")[0] for case in golden["cases"] for k in case["attacks"]}
    assert kinds == set(ATTACK_KINDS)
