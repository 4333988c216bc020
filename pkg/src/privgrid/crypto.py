"""System parameters, hashing, fixed-point encoding, and serialization.

Everything downstream (key agreement, encryption, signatures, the ledger)
builds on the two curve groups published here.  Parameters are fully
deterministic: construction from the frozen constants in :mod:`curve`
always yields byte-identical generators and hash outputs, so golden test
vectors stay stable across runs and machines.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Tuple

from .curve import (
    POINT_BYTES,
    CurveGroup,
    PairingGroup,
    Point,
    SUBGROUP_ORDER,
    pairing_group,
    plain_group,
)
from .errors import DecodeError, RangeError

Scalar = int  # elements of Z_q; reduced mod q at module boundaries

HASH_BYTES = 32


def sha256(*parts: bytes) -> bytes:
    """The one hash used everywhere: block hashes, Merkle nodes, key masks."""
    d = hashlib.sha256()
    for part in parts:
        d.update(part)
    return d.digest()


def hash_to_scalar(label: bytes, data: bytes, order: int = SUBGROUP_ORDER) -> Scalar:
    """Map bytes to Z_q.  Two digest blocks keep the mod-q bias negligible."""
    framed = len(label).to_bytes(2, "big") + label + data
    wide = sha256(framed) + sha256(framed, b"#2")
    return int.from_bytes(wide, "big") % order


# ---------------------------------------------------------------------------
# Fixed-point codec
# ---------------------------------------------------------------------------

MAX_READING_KWH = 65.0
MAX_ABS_WEIGHT = 32.0  # |weight| < 2^5


@dataclass(frozen=True)
class FixedPointCodec:
    """Bridges real-valued readings/weights and the integers we encrypt.

    Readings scale by a power of ten (denoting whole watt-hours at the
    default 1000); weights scale by a power of two.  Encoding rounds to
    the nearest unit, so decode(encode(x)) is within half a unit of x.
    """

    reading_scale: int = 1000
    weight_scale_bits: int = 10

    def __post_init__(self):
        s = self.reading_scale
        while s % 10 == 0:
            s //= 10
        if s != 1 or self.reading_scale < 1:
            raise ValueError("reading_scale must be a power of ten")
        if self.weight_scale_bits < 0:
            raise ValueError("weight_scale_bits must be non-negative")

    @property
    def weight_scale(self) -> int:
        return 1 << self.weight_scale_bits

    def encode_reading(self, kwh: float) -> int:
        if abs(kwh) > MAX_READING_KWH:
            raise RangeError("reading %r exceeds +/-%g kWh per slot" % (kwh, MAX_READING_KWH))
        return round(kwh * self.reading_scale)

    def decode_reading(self, units: int) -> float:
        return units / self.reading_scale

    def encode_weight(self, w: float) -> int:
        if abs(w) >= MAX_ABS_WEIGHT:
            raise RangeError("weight %r exceeds +/-%g" % (w, MAX_ABS_WEIGHT))
        return round(w * self.weight_scale)

    def decode_weight(self, units: int) -> float:
        return units / self.weight_scale


# ---------------------------------------------------------------------------
# System parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SystemParams:
    """Published parameters: both groups, their shared order, and the codec."""

    plain: CurveGroup
    pairing: PairingGroup
    codec: FixedPointCodec

    def __post_init__(self):
        if self.plain.order != self.pairing.order:
            raise ValueError("groups must share one prime order")
        if self.plain.generator.is_identity() or self.pairing.generator.is_identity():
            raise ValueError("generators must not be the identity")

    @property
    def order(self) -> int:
        return self.plain.order

    @property
    def g(self) -> Point:
        """Generator of the plain (encryption) group."""
        return self.plain.generator

    @property
    def g2(self) -> Point:
        """Generator of the pairing (signature) group."""
        return self.pairing.generator


def system_params(codec: FixedPointCodec | None = None) -> SystemParams:
    return SystemParams(plain_group(), pairing_group(), codec or FixedPointCodec())


# ---------------------------------------------------------------------------
# Timestamp hashing
# ---------------------------------------------------------------------------


def hash_to_point_pair(
    params: SystemParams, domain_label: bytes, timestamp: bytes
) -> Tuple[Point, Point]:
    """Hash a period label into two independent plain-group points.

    The two coordinates are domain-separated internally ("/0" and "/1"),
    and distinct ``domain_label`` values give unrelated pairs.
    """
    if not timestamp:
        raise ValueError("timestamp must be non-empty")
    first = params.plain.hash_to_point(domain_label + b"/0", timestamp)
    second = params.plain.hash_to_point(domain_label + b"/1", timestamp)
    return first, second


# ---------------------------------------------------------------------------
# Point serialization helpers (thin wrappers over the group methods)
# ---------------------------------------------------------------------------


def serialize_point(p: Point) -> bytes:
    blob = p.encode()
    assert len(blob) == POINT_BYTES
    return blob


def deserialize_point(group: CurveGroup, blob: bytes) -> Point:
    return group.decode(blob)


# ---------------------------------------------------------------------------
# Parameter file
# ---------------------------------------------------------------------------

_PARAMS_VERSION = 1


def params_to_json(params: SystemParams) -> str:
    doc = {
        "version": _PARAMS_VERSION,
        "order_q": hex(params.order),
        "plain_group": {
            "id": params.plain.group_id,
            "cofactor": params.plain.cofactor,
            "generator": params.g.encode().hex(),
        },
        "pairing_group": {
            "id": params.pairing.group_id,
            "cofactor": params.pairing.cofactor,
            "generator": params.g2.encode().hex(),
        },
        "reading_scale": params.codec.reading_scale,
        "weight_scale_bits": params.codec.weight_scale_bits,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def params_from_json(text: str) -> SystemParams:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DecodeError("parameter file is not valid JSON: %s" % exc) from exc
    if doc.get("version") != _PARAMS_VERSION:
        raise DecodeError("unsupported parameter file version")
    codec = FixedPointCodec(int(doc["reading_scale"]), int(doc["weight_scale_bits"]))
    params = system_params(codec)
    if int(doc["order_q"], 16) != params.order:
        raise DecodeError("order mismatch against built-in groups")
    for key, group, gen in (
        ("plain_group", params.plain, params.g),
        ("pairing_group", params.pairing, params.g2),
    ):
        entry = doc[key]
        if entry["id"] != group.group_id or int(entry["cofactor"]) != group.cofactor:
            raise DecodeError("%s does not match built-in parameters" % key)
        if bytes.fromhex(entry["generator"]) != gen.encode():
            raise DecodeError("%s generator mismatch" % key)
    return params
