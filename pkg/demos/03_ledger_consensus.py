"""Walkthrough: signed reports, Merkle-rooted blocks, and the vote round.

The miner batches one slot's signed reports into a block; every meter
re-derives the root, checks the hash and its own record's inclusion, and
votes.  Tampering with a single ciphertext after signing makes every
honest validator dissent, and the chain audit localizes the damage.
"""

import random
from dataclasses import replace

from privgrid import bls
from privgrid.crypto import system_params
from privgrid.funcenc import DetectionKeySet, TimestampPoints, encrypt_reading
from privgrid.ledger import (
    Chain,
    ConsensusConfig,
    MeterValidator,
    ReportRecord,
    build_block,
    consensus_round,
    elect_miner,
    merkle_root,
    report_message,
    validate_chain,
)

params = system_params()
rng = random.Random(3)
period = b"2024-06-01/slot-00"
ts = TimestampPoints.for_label(params, period)

ids = list(range(6))
miner = elect_miner(ids, epoch=0)
print("elected miner:", miner)

chain = Chain()
dw_set = DetectionKeySet((params.g,), (period,))
ref = chain.register_dw(dw_set)

records, validators = [], []
for i in ids:
    sk, pk = bls.keygen(params, rng)
    cipher = encrypt_reading(
        params, (rng.randrange(params.order), rng.randrange(params.order)), ts,
        rng.randrange(2000),
    )
    sig = bls.sign(params, sk, report_message(cipher, ts, dw_set, pk))
    rec = ReportRecord(i, cipher, period, ref, sig, pk)
    records.append(rec)
    validators.append(MeterValidator(i, rec))

block = build_block(params, chain.head_hash, 0, records, 0, period,
                    chain.dw_registry, rng)
res = consensus_round(params, block, validators, ConsensusConfig(),
                      chain.head_hash, period, chain.dw_registry)
print("honest block: committed=%s approvals=%d/%d" %
      (res.committed, res.approvals, len(validators)))
chain.append(block)

print()
print("== miner tampers with one ciphertext after signing ==")
bad_records = list(block.records)
bad_records[2] = replace(
    bad_records[2], cipher=encrypt_reading(params, (1, 1), ts, 0)
)
root = merkle_root([r.canonical_bytes() for r in bad_records])
draft = replace(block, height=1, prev_hash=chain.head_hash,
                records=tuple(bad_records), merkle_root=root)
tampered = replace(draft, stored_hash=draft.compute_hash())
res = consensus_round(params, tampered, validators, ConsensusConfig(),
                      chain.head_hash, period, chain.dw_registry)
print("tampered block: committed=%s dissenters=%s" % (res.committed, res.dissenters))

print()
print("== operator audit ==")
print("clean chain validates:", validate_chain(params, chain) is None)
mutated = replace(chain.blocks[0], timestamp=99)
chain.blocks[0] = mutated
print("mutated block reported at height:", validate_chain(params, chain))
