"""Tampering generators f1..f6 over fixed-point readings.

This is an independent implementation of the interface contract pinned
by ``fixtures/cross_attacks.json``: integer watt-hour readings in, the
same integers out, with all randomness drawn from a sha256-derived seed
in the documented order.  The parity tests assert bit-equality against
the frozen fixture, so any drift from the detector-side generator fails
loudly.
"""

from __future__ import annotations

import hashlib
import random
import statistics
from typing import List, Optional, Sequence, Tuple

ATTACK_KINDS = ("f1", "f2", "f3", "f4", "f5", "f6")


def derive_seed(*parts) -> int:
    """Seed contract: int(sha256(b"SEED" + "|".join(str(p))), big-endian)."""
    blob = "|".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.sha256(b"SEED" + blob).digest(), "big")


def apply_attack(
    kind: str,
    readings: Sequence[int],
    meter_id: int,
    day: str,
    seed: int,
    alpha: Optional[float] = None,
    window: Optional[Tuple[int, int]] = None,
) -> List[int]:
    if kind not in ATTACK_KINDS:
        raise ValueError("unknown attack kind %r" % kind)
    rng = random.Random(derive_seed(seed, kind, meter_id, day))
    r = list(readings)
    d = len(r)
    if kind == "f1":
        a = alpha if alpha is not None else rng.uniform(0.1, 0.8)
        return [round(a * v) for v in r]
    if kind == "f2":
        return [round(rng.uniform(0.1, 0.8) * v) for v in r]
    if kind == "f3":
        mean = statistics.fmean(r)
        return [round(mean)] * d
    if kind == "f4":
        mean = statistics.fmean(r)
        return [round(rng.uniform(0.1, 0.8) * mean) for _ in range(d)]
    if kind == "f5":
        return r[::-1]
    if window is not None:
        ts, te = window
    else:
        ts = rng.randint(0, 42)
        te = ts + rng.randint(6, 48)
    return [0 if ts < t < te else v for t, v in enumerate(r, start=1)]
