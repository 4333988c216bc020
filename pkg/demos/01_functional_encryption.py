"""Walkthrough: encrypting readings so only linear functions decrypt.

A meter encrypts each half-hour reading as one 40-byte curve point.  With
the area key DA the operator recovers only the *sum* across meters; with
a detection key DW it recovers only one weighted combination of a meter's
day.  Neither route exposes an individual reading.
"""

import random

from privgrid.crypto import system_params
from privgrid.funcenc import (
    QuantizedFirstLayer,
    TimestampPoints,
    decrypt_aggregate,
    decrypt_inner_product,
    encrypt_reading,
    gen_detection_keys,
)
from privgrid.secureagg import AggregationKey

import numpy as np

params = system_params()
rng = random.Random(1)
q = params.order

print("== one slot, five meters ==")
ts = TimestampPoints.for_label(params, b"demo-day/slot-00")
secrets = [(rng.randrange(q), rng.randrange(q)) for _ in range(5)]
readings_kwh = [0.75, 1.2, 0.4, 2.0, 0.9]
readings = [params.codec.encode_reading(v) for v in readings_kwh]
ciphers = [encrypt_reading(params, s, ts, r) for s, r in zip(secrets, readings)]
print("ciphertext size:", len(ciphers[0].c.encode()), "bytes")

da = AggregationKey(
    (sum(s[0] for s in secrets) % q, sum(s[1] for s in secrets) % q)
)
total = decrypt_aggregate(params, ciphers, da, ts, bound=5 * 65_000)
print("decrypted area total: %.3f kWh (plaintext %.3f)"
      % (total / 1000, sum(readings_kwh)))
assert total == sum(readings)

print()
print("== one meter-day, weighted combinations ==")
d, n = 8, 3
period = [TimestampPoints.for_label(params, b"demo-day/slot-%02d" % t) for t in range(d)]
secret = (rng.randrange(q), rng.randrange(q))
day_units = [rng.randrange(0, 3000) for _ in range(d)]
day_ciphers = [encrypt_reading(params, secret, period[t], day_units[t]) for t in range(d)]

w = np.array([[rng.randrange(-512, 513) for _ in range(n)] for _ in range(d)])
layer = QuantizedFirstLayer(w, np.zeros(n), params.codec)
dw = gen_detection_keys(params, secret, layer, period)

bound = layer.dlog_bound(3000)
for c in range(n):
    got = decrypt_inner_product(params, day_ciphers, layer.column(c), dw.dw[c], bound)
    want = sum(wt * r for wt, r in zip(layer.column(c), day_units))
    print("column %d: recovered %8d  (plaintext %8d)" % (c, got, want))
    assert got == want

print()
print("The operator saw", n, "combinations of", d, "slots -- an underdetermined")
print("system, so the raw readings stay hidden while detection still runs.")
