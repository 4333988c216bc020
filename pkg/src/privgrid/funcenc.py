"""Inner-product functional encryption of meter readings.

A reading r at slot t encrypts to the single group point

    c = s[0]*TS_t[0] + s[1]*TS_t[1] + r*g

where TS_t is the hashed pair of timestamp points for the slot and s is
the meter's secret 2-vector.  Two decryption routes exist, each revealing
exactly one linear function of the plaintexts and nothing else:

* area total:   sum_i c_i - DA^T * TS_t  =  (sum_i r_i) * g
* inner product: sum_t w[t]*c[t] - DW    =  (sum_t w[t]*r[t]) * g

Both end in a bounded discrete-log search (baby-step giant-step) on base
g.  Recovery is exact integer arithmetic; negative inner products are
found by shifting the search window.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .crypto import MAX_READING_KWH, FixedPointCodec, SystemParams, hash_to_point_pair
from .curve import CurveGroup, Point
from .errors import DlogNotFound, RangeError, ShapeError
from .secureagg import AggregationKey, ScalarPair

TIMESTAMP_DOMAIN = b"TS"
MAX_DLOG_WINDOW = 1 << 40
MAX_QUANT_WEIGHT = 1 << 16


@dataclass(frozen=True)
class TimestampPoints:
    """Per-slot timestamp pair TS_t, a deterministic hash of the slot label."""

    ts: Tuple[Point, Point]
    period_label: bytes

    @classmethod
    def for_label(cls, params: SystemParams, label: bytes) -> "TimestampPoints":
        return cls(hash_to_point_pair(params, TIMESTAMP_DOMAIN, label), label)


@dataclass(frozen=True)
class CipherReading:
    c: Point


@dataclass(frozen=True)
class DetectionKeySet:
    """One decryption key point per first-layer neuron, fixed for a period."""

    dw: Tuple[Point, ...]
    period_labels: Tuple[bytes, ...]

    def encode(self) -> bytes:
        return b"".join(p.encode() for p in self.dw)


class QuantizedFirstLayer:
    """Integer-quantized d-by-n first-layer weights plus plaintext bias.

    ``n < d`` is enforced: with at least as many neurons as inputs the
    revealed inner products would determine the readings exactly.
    """

    def __init__(self, w, bias, codec: FixedPointCodec):
        w = np.asarray(w, dtype=np.int64)
        bias = np.asarray(bias, dtype=np.float64)
        if w.ndim != 2:
            raise ShapeError("weight matrix must be 2-D, got %d-D" % w.ndim)
        d, n = w.shape
        if n >= d:
            raise ShapeError(
                "first layer needs fewer neurons than inputs (n=%d, d=%d)" % (n, d)
            )
        if bias.shape != (n,):
            raise ShapeError("bias must have one entry per neuron")
        if np.abs(w).max(initial=0) >= MAX_QUANT_WEIGHT:
            raise RangeError("quantized weight magnitude must stay below 2^16")
        self.w = w
        self.bias = bias
        self.codec = codec

    @property
    def d(self) -> int:
        return self.w.shape[0]

    @property
    def n(self) -> int:
        return self.w.shape[1]

    def column(self, c: int) -> List[int]:
        return [int(v) for v in self.w[:, c]]

    def dlog_bound(self, max_reading_units: int | None = None) -> int:
        """Worst-case |inner product| = d * max|w| * max reading units."""
        if max_reading_units is None:
            max_reading_units = int(MAX_READING_KWH * self.codec.reading_scale)
        return self.d * int(np.abs(self.w).max(initial=0)) * max_reading_units


def mask_point(params: SystemParams, secret: ScalarPair, ts: TimestampPoints) -> Point:
    """s^T * TS_t, the per-slot masking point shared by encryption and keys."""
    return params.plain.msm([(secret[0], ts.ts[0]), (secret[1], ts.ts[1])])


def encrypt_reading(
    params: SystemParams, secret: ScalarPair, ts: TimestampPoints, reading: int
) -> CipherReading:
    limit = int(MAX_READING_KWH * params.codec.reading_scale)
    if abs(reading) > limit:
        raise RangeError("encoded reading %d outside +/-%d" % (reading, limit))
    c = params.plain.msm(
        [(secret[0], ts.ts[0]), (secret[1], ts.ts[1]), (reading, params.g)]
    )
    return CipherReading(c)


def decrypt_aggregate(
    params: SystemParams,
    ciphers: Sequence[CipherReading],
    da: AggregationKey,
    ts: TimestampPoints,
    bound: int,
) -> int:
    """Recover the exact plaintext sum of one slot's ciphertexts."""
    group = params.plain
    total = group.sum_points([c.c for c in ciphers])
    masked = group.msm([(da.da[0], ts.ts[0]), (da.da[1], ts.ts[1])])
    return bsgs_dlog(group, total - masked, params.g, 0, bound)


def gen_detection_keys(
    params: SystemParams,
    secret: ScalarPair,
    layer: QuantizedFirstLayer,
    period: Sequence[TimestampPoints],
) -> DetectionKeySet:
    """DW_c = sum_t w[t][c] * (s^T * TS_t) for every neuron column c."""
    if len(period) != layer.d:
        raise ShapeError(
            "period has %d slots but layer expects %d" % (len(period), layer.d)
        )
    masks = [mask_point(params, secret, ts) for ts in period]
    dw = []
    for c in range(layer.n):
        col = layer.column(c)
        dw.append(params.plain.msm(list(zip(col, masks))))
    return DetectionKeySet(tuple(dw), tuple(ts.period_label for ts in period))


def decrypt_inner_product(
    params: SystemParams,
    ciphers: Sequence[CipherReading],
    w_col: Sequence[int],
    dw_c: Point,
    signed_bound: int,
) -> int:
    """Recover sum_t w[t]*r[t] exactly, sign included."""
    if len(ciphers) != len(w_col):
        raise ShapeError(
            "got %d ciphertexts for %d weights" % (len(ciphers), len(w_col))
        )
    group = params.plain
    combined = group.msm([(int(w), c.c) for w, c in zip(w_col, ciphers)])
    return bsgs_dlog(group, combined - dw_c, params.g, -signed_bound, signed_bound)


# ---------------------------------------------------------------------------
# Baby-step giant-step
# ---------------------------------------------------------------------------

# Baby tables are cached per base and grown on demand; with repeated
# decryptions against the fixed generator the table cost amortizes away.
# The bias towards a large table (few giant steps) reflects that reuse.
_BABY_BIAS = 16
_MAX_TABLE_ENTRIES = 1 << 20
_MAX_CACHED_BASES = 4

_baby_cache: "OrderedDict[bytes, tuple]" = OrderedDict()


def _baby_table(group: CurveGroup, base: Point, size: int):
    """Table mapping x-coordinate of j*base -> j for j in [0, size)."""
    key = base.encode()
    entry = _baby_cache.get(key)
    if entry is None:
        # x -> j table (identity keyed by -1) plus the walk frontier [point, next j]
        entry = ({-1: 0}, [group.identity, 1])
        _baby_cache[key] = entry
        while len(_baby_cache) > _MAX_CACHED_BASES:
            _baby_cache.popitem(last=False)
    _baby_cache.move_to_end(key)
    table, frontier = entry
    cur, nxt = frontier
    while nxt < size:
        cur = cur + base
        table.setdefault(cur.xy[0], nxt)
        nxt += 1
    frontier[0], frontier[1] = cur, nxt
    return table


def bsgs_dlog(group: CurveGroup, target: Point, base: Point, lo: int, hi: int) -> int:
    """Find k with k*base = target and lo <= k <= hi, else DlogNotFound.

    The x-coordinate table covers j and -j at once, so every hit is
    confirmed with one multiplication before being returned.
    """
    if base.is_identity():
        raise ValueError("base must not be the identity")
    if hi < lo:
        raise ValueError("empty search range")
    window = hi - lo
    if window > MAX_DLOG_WINDOW:
        raise ValueError("search window exceeds 2^40; refusing")
    shifted = target - group.mul(lo, base)
    m = max(int(math.isqrt(window)) + 1, 16) * _BABY_BIAS
    m = min(m, window + 1, _MAX_TABLE_ENTRIES)
    table = _baby_table(group, base, m)
    stride = group.mul(m, base)

    def check(i: int, pt: Point):
        x_key = -1 if pt.is_identity() else pt.xy[0]
        j = table.get(x_key)
        if j is None:
            return None
        for candidate in (i * m + j, i * m - j):
            k = lo + candidate
            if lo <= k <= hi and group.mul(candidate, base) == shifted:
                return k
        return None

    # Scan giant steps outward from the window's centre: in the protocol
    # the recovered values sit far from the worst-case bound, so this
    # finds them after a handful of steps instead of window/m on average.
    steps = (window // m) + 2
    centre = steps // 2
    up = shifted - group.mul(centre * m, base)   # i = centre, centre+1, ...
    down = up
    for offset in range(centre + 1):
        hit = check(centre + offset, up)
        if hit is not None:
            return hit
        if offset and centre - offset >= 0:
            down = down + stride
            hit = check(centre - offset, down)
            if hit is not None:
                return hit
        up = up - stride
    for i in range(2 * centre + 1, steps):
        hit = check(i, up)
        if hit is not None:
            return hit
        up = up - stride
    raise DlogNotFound("no discrete log of the target in [%d, %d]" % (lo, hi))


def clear_dlog_cache() -> None:
    _baby_cache.clear()
