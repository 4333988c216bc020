"""Walkthrough: building the area key DA without revealing any meter secret.

Each pair of meters agrees on a shared mask via Diffie-Hellman; the
lower-id meter adds it, the higher-id one subtracts it.  Individually the
blinded shares look random, but their sum is exactly the sum of the
secrets -- and withholding any share poisons the whole aggregate.
"""

import random

from privgrid.crypto import system_params
from privgrid.secureagg import (
    agreement_public_key,
    aggregate_da,
    blind_share,
    gen_meter_secret,
    ka_agree,
)

params = system_params()
q = params.order
rng = random.Random(7)

ids = [1, 2, 3, 4]
meters = {i: gen_meter_secret(params, rng) for i in ids}
publics = {i: agreement_public_key(params, meters[i].x) for i in ids}

print("== pairwise agreement is symmetric ==")
m12 = ka_agree(params, meters[1].x, publics[2])
m21 = ka_agree(params, meters[2].x, publics[1])
print("meter1->meter2 mask == meter2->meter1 mask:", m12 == m21)

shares = []
for i in ids:
    masks = [(o, ka_agree(params, meters[i].x, publics[o])) for o in ids if o != i]
    share = blind_share(params, i, meters[i].s, masks, ids)
    hides = share.y != meters[i].s
    print("meter %d blinded share hides its secret: %s" % (i, hides))
    shares.append(share)

da = aggregate_da(params, shares, len(ids))
want = (
    sum(m.s[0] for m in meters.values()) % q,
    sum(m.s[1] for m in meters.values()) % q,
)
print("masks cancelled exactly:", da.da == want)

print()
print("== the scheme is all-or-nothing ==")
partial = aggregate_da(params, shares[:-1], len(ids) - 1)
rest = (
    sum(meters[i].s[0] for i in ids[:-1]) % q,
    sum(meters[i].s[1] for i in ids[:-1]) % q,
)
print("drop meter 4's share -> aggregate still matches the remaining secrets?",
      partial.da == rest)
print("(uncancelled masks poison it, so a dropout forces a key-setup restart)")
