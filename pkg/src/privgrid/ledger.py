"""Merkle-rooted block ledger with a simulated vote-based consensus.

One block is assembled per reporting slot from the meters' signed
encrypted reports.  The full detection-key sets referenced by records are
stored once per period in a content-addressed registry carried next to
the chain, so each record only holds a 32-byte reference.

Consensus is a synchronous in-process simulation: every meter validator
re-derives the Merkle root, checks the block hash, timestamp, and the
record it submitted (by inclusion proof), and audits all signatures; the
block commits when approvals reach the quorum within the allowed number
of re-broadcasts.  Validator checks are deterministic, so the whole
ledger replays byte-identically from a seed.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from . import bls
from .crypto import SystemParams, sha256
from .errors import (
    EmptyInput,
    NoCandidate,
    SignatureError,
    StaleTimestamp,
)
from .funcenc import CipherReading, DetectionKeySet, TimestampPoints

Digest = bytes
DIGEST_BYTES = 32


# ---------------------------------------------------------------------------
# Report records
# ---------------------------------------------------------------------------


def dw_ref(dw_set: DetectionKeySet) -> Digest:
    return sha256(b"DWSET", dw_set.encode())


def report_message(
    cipher: CipherReading,
    ts: TimestampPoints,
    dw_set: DetectionKeySet,
    pk: bls.VerifyKey,
) -> bytes:
    """Signed wire layout: cipher || timestamp pair || DW keys || public key."""
    return (
        cipher.c.encode()
        + ts.ts[0].encode()
        + ts.ts[1].encode()
        + dw_set.encode()
        + pk.pk.encode()
    )


@dataclass(frozen=True)
class ReportRecord:
    """One meter's ledgered report for one slot."""

    meter_id: int
    cipher: CipherReading
    period_label: bytes
    dw_ref: Digest
    sig: bls.Signature
    pk: bls.VerifyKey

    def canonical_bytes(self) -> bytes:
        """Fixed-width field layout so record hashing is reproducible."""
        label = self.period_label
        return (
            self.meter_id.to_bytes(4, "big")
            + self.cipher.c.encode()
            + len(label).to_bytes(2, "big")
            + label
            + self.dw_ref
            + self.sig.sigma.encode()
            + self.pk.pk.encode()
        )


def wire_report_bytes(
    cipher: CipherReading,
    ts: TimestampPoints,
    dw_set: DetectionKeySet,
    sig: bls.Signature,
    pk: bls.VerifyKey,
) -> bytes:
    """Exactly what a meter transmits for one reading (message plus signature)."""
    return report_message(cipher, ts, dw_set, pk) + sig.sigma.encode()


# ---------------------------------------------------------------------------
# Merkle tree
# ---------------------------------------------------------------------------


def _leaf_hash(leaf: bytes) -> Digest:
    return sha256(b"L", leaf)


def _node_hash(left: Digest, right: Digest) -> Digest:
    return sha256(b"N", left, right)


def merkle_root(leaves: Sequence[bytes]) -> Digest:
    """Binary Merkle root; an odd node is duplicated at every level."""
    if not leaves:
        raise EmptyInput("merkle tree needs at least one leaf")
    level = [_leaf_hash(leaf) for leaf in leaves]
    if len(level) == 1:
        return _node_hash(level[0], level[0])
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [
            _node_hash(level[i], level[i + 1]) for i in range(0, len(level), 2)
        ]
    return level[0]


def merkle_proof(leaves: Sequence[bytes], index: int) -> List[Tuple[Digest, bool]]:
    """Sibling path for ``leaves[index]``; bool marks a right-hand sibling."""
    if not leaves:
        raise EmptyInput("merkle tree needs at least one leaf")
    if not 0 <= index < len(leaves):
        raise IndexError("leaf index out of range")
    level = [_leaf_hash(leaf) for leaf in leaves]
    if len(level) == 1:
        return [(level[0], True)]
    path = []
    pos = index
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        sibling = pos ^ 1
        path.append((level[sibling], bool(sibling % 2)))
        level = [
            _node_hash(level[i], level[i + 1]) for i in range(0, len(level), 2)
        ]
        pos //= 2
    return path


def verify_inclusion(
    leaf: bytes, proof: Sequence[Tuple[Digest, bool]], root: Digest
) -> bool:
    node = _leaf_hash(leaf)
    for sibling, is_right in proof:
        node = _node_hash(node, sibling) if is_right else _node_hash(sibling, node)
    return node == root


# ---------------------------------------------------------------------------
# Blocks and chain
# ---------------------------------------------------------------------------

GENESIS_HASH = b"\x00" * DIGEST_BYTES


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: Digest
    merkle_root: Digest
    timestamp: int
    records: Tuple[ReportRecord, ...]
    stored_hash: Digest

    def data_bytes(self) -> bytes:
        body = b"".join(r.canonical_bytes() for r in self.records)
        return (
            self.height.to_bytes(8, "big")
            + self.prev_hash
            + self.merkle_root
            + body
        )

    def compute_hash(self) -> Digest:
        return sha256(self.data_bytes(), self.timestamp.to_bytes(8, "big"))


@dataclass
class Chain:
    """Ordered blocks plus the content-addressed detection-key registry."""

    blocks: List[Block] = field(default_factory=list)
    dw_registry: Dict[Digest, DetectionKeySet] = field(default_factory=dict)

    @property
    def head_hash(self) -> Digest:
        return self.blocks[-1].stored_hash if self.blocks else GENESIS_HASH

    @property
    def next_height(self) -> int:
        return self.blocks[-1].height + 1 if self.blocks else 0

    def register_dw(self, dw_set: DetectionKeySet) -> Digest:
        ref = dw_ref(dw_set)
        self.dw_registry[ref] = dw_set
        return ref

    def append(self, block: Block) -> None:
        if block.height != self.next_height:
            raise ValueError("non-consecutive block height")
        if block.prev_hash != self.head_hash:
            raise ValueError("broken hash link")
        if self.blocks and block.timestamp < self.blocks[-1].timestamp:
            raise ValueError("timestamp regression")
        self.blocks.append(block)


def _verify_record_signatures(
    params: SystemParams,
    records: Sequence[ReportRecord],
    registry: Dict[Digest, DetectionKeySet],
    rng=None,
) -> Optional[int]:
    """Return the meter id of the first bad record, or None if all verify."""
    messages = []
    for rec in records:
        dw_set = registry.get(rec.dw_ref)
        if dw_set is None or dw_ref(dw_set) != rec.dw_ref:
            return rec.meter_id
        ts = TimestampPoints.for_label(params, rec.period_label)
        messages.append(report_message(rec.cipher, ts, dw_set, rec.pk))
    items = [
        (rec.pk, msg, rec.sig) for rec, msg in zip(records, messages)
    ]
    if bls.batch_verify(params, items, rng):
        return None
    for rec, msg in zip(records, messages):
        if not bls.verify(params, rec.pk, msg, rec.sig):
            return rec.meter_id
    return None  # pragma: no cover - batch vs single can only disagree on forgeries


def build_block(
    params: SystemParams,
    prev_hash: Digest,
    height: int,
    records: Sequence[ReportRecord],
    timestamp: int,
    current_period: bytes,
    registry: Dict[Digest, DetectionKeySet],
    rng=None,
) -> Block:
    """Assemble and self-verify a block from one slot's reports."""
    if not records:
        raise EmptyInput("a block needs at least one record")
    for rec in records:
        if rec.period_label != current_period:
            raise StaleTimestamp(
                "meter %d reported period %r during %r"
                % (rec.meter_id, rec.period_label, current_period)
            )
    bad = _verify_record_signatures(params, records, registry, rng)
    if bad is not None:
        raise SignatureError("record from meter %d failed verification" % bad)
    records = tuple(records)
    root = merkle_root([r.canonical_bytes() for r in records])
    draft = Block(height, prev_hash, root, timestamp, records, b"")
    return replace(draft, stored_hash=draft.compute_hash())


# ---------------------------------------------------------------------------
# Consensus simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConsensusConfig:
    quorum_fraction: Fraction = Fraction(2, 3)
    max_retries: int = 1

    def __post_init__(self):
        q = Fraction(self.quorum_fraction)
        if not Fraction(1, 2) < q <= 1:
            raise ValueError("quorum fraction must be in (1/2, 1]")

    def quorum_count(self, m: int) -> int:
        q = Fraction(self.quorum_fraction)
        need = q * m
        return int(need) if need.denominator == 1 else int(need) + 1


@dataclass
class MeterValidator:
    """A meter's view in the consensus round.

    ``sent_record`` is the exact record this meter submitted for the slot
    (None for meters without a report).  Dishonest validators invert
    their verdict: they dissent from valid blocks and wave tampered ones
    through.
    """

    meter_id: int
    sent_record: Optional[ReportRecord] = None
    honest: bool = True


@dataclass(frozen=True)
class ConsensusResult:
    committed: bool
    approvals: int
    rounds: int
    dissenters: Tuple[int, ...] = ()


def _block_audit(
    params: SystemParams,
    block: Block,
    prev_hash: Digest,
    current_period: bytes,
    registry: Dict[Digest, DetectionKeySet],
) -> bool:
    """Structural checks every honest validator performs on the broadcast block.

    Computed once per round and shared across validators (they would each
    run it independently; the outcome is identical and deterministic).
    """
    if block.prev_hash != prev_hash:
        return False
    if block.stored_hash != block.compute_hash():
        return False
    if merkle_root([r.canonical_bytes() for r in block.records]) != block.merkle_root:
        return False
    if any(r.period_label != current_period for r in block.records):
        return False
    return _verify_record_signatures(params, block.records, registry) is None


def consensus_round(
    params: SystemParams,
    block: Block,
    validators: Sequence[MeterValidator],
    cfg: ConsensusConfig,
    prev_hash: Digest,
    current_period: bytes,
    registry: Dict[Digest, DetectionKeySet],
    rng=None,
) -> ConsensusResult:
    if not validators:
        raise EmptyInput("consensus needs at least one validator")
    audit_ok = _block_audit(params, block, prev_hash, current_period, registry)
    leaves = [r.canonical_bytes() for r in block.records]
    index_by_meter = {r.meter_id: i for i, r in enumerate(block.records)}

    def honest_verdict(v: MeterValidator) -> bool:
        if not audit_ok:
            return False
        if v.sent_record is None:
            return True
        idx = index_by_meter.get(v.meter_id)
        if idx is None:
            return False
        mine = v.sent_record.canonical_bytes()
        if leaves[idx] != mine:
            return False
        return verify_inclusion(mine, merkle_proof(leaves, idx), block.merkle_root)

    quorum = cfg.quorum_count(len(validators))
    rounds = 0
    for _ in range(cfg.max_retries + 1):
        rounds += 1
        votes = {
            v.meter_id: (honest_verdict(v) if v.honest else not honest_verdict(v))
            for v in validators
        }
        approvals = sum(votes.values())
        if approvals >= quorum:
            return ConsensusResult(True, approvals, rounds)
        # Re-broadcast to dissenters for the second check; verdicts are
        # deterministic, so this only models the retry round-trip.
    dissenters = tuple(sorted(i for i, ok in votes.items() if not ok))
    return ConsensusResult(False, approvals, rounds, dissenters)


# ---------------------------------------------------------------------------
# Chain validation
# ---------------------------------------------------------------------------


def validate_chain(params: SystemParams, chain: Chain) -> Optional[int]:
    """Full operator-side audit; returns the first bad height, None when ok."""
    prev_hash = GENESIS_HASH
    prev_ts = None
    for expected_height, block in enumerate(chain.blocks):
        ok = (
            block.height == expected_height
            and block.prev_hash == prev_hash
            and block.stored_hash == block.compute_hash()
            and (prev_ts is None or block.timestamp >= prev_ts)
            and merkle_root([r.canonical_bytes() for r in block.records])
            == block.merkle_root
            and _verify_record_signatures(params, block.records, chain.dw_registry)
            is None
        )
        if not ok:
            return block.height
        prev_hash = block.stored_hash
        prev_ts = block.timestamp
    return None


# ---------------------------------------------------------------------------
# Chain export / import
# ---------------------------------------------------------------------------

_CHAIN_VERSION = 1


def chain_to_json(chain: Chain) -> str:
    import json

    doc = {
        "version": _CHAIN_VERSION,
        "dw_registry": {
            ref.hex(): {
                "dw": [p.encode().hex() for p in dw_set.dw],
                "period_labels": [lbl.hex() for lbl in dw_set.period_labels],
            }
            for ref, dw_set in sorted(chain.dw_registry.items())
        },
        "blocks": [
            {
                "height": b.height,
                "prev_hash": b.prev_hash.hex(),
                "merkle_root": b.merkle_root.hex(),
                "timestamp": b.timestamp,
                "hash": b.stored_hash.hex(),
                "records": [
                    {
                        "meter_id": r.meter_id,
                        "cipher": r.cipher.c.encode().hex(),
                        "period_label": r.period_label.hex(),
                        "dw_ref": r.dw_ref.hex(),
                        "sig": r.sig.sigma.encode().hex(),
                        "pk": r.pk.pk.encode().hex(),
                    }
                    for r in b.records
                ],
            }
            for b in chain.blocks
        ],
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def chain_from_json(params: SystemParams, text: str) -> Chain:
    import json

    from .errors import ParseError

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("chain file is not valid JSON: %s" % exc) from exc
    if doc.get("version") != _CHAIN_VERSION:
        raise ParseError("unsupported chain file version")
    group = params.plain
    pairing = params.pairing
    chain = Chain()
    for ref_hex, entry in doc.get("dw_registry", {}).items():
        dw_set = DetectionKeySet(
            tuple(group.decode(bytes.fromhex(h)) for h in entry["dw"]),
            tuple(bytes.fromhex(h) for h in entry["period_labels"]),
        )
        chain.dw_registry[bytes.fromhex(ref_hex)] = dw_set
    for blk in doc.get("blocks", []):
        records = tuple(
            ReportRecord(
                meter_id=int(r["meter_id"]),
                cipher=CipherReading(group.decode(bytes.fromhex(r["cipher"]))),
                period_label=bytes.fromhex(r["period_label"]),
                dw_ref=bytes.fromhex(r["dw_ref"]),
                sig=bls.Signature(pairing.decode(bytes.fromhex(r["sig"]))),
                pk=bls.VerifyKey(pairing.decode(bytes.fromhex(r["pk"]))),
            )
            for r in blk["records"]
        )
        chain.blocks.append(
            Block(
                height=int(blk["height"]),
                prev_hash=bytes.fromhex(blk["prev_hash"]),
                merkle_root=bytes.fromhex(blk["merkle_root"]),
                timestamp=int(blk["timestamp"]),
                records=records,
                stored_hash=bytes.fromhex(blk["hash"]),
            )
        )
    return chain


# ---------------------------------------------------------------------------
# Miner election
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MinerElection:
    miner_id: int
    votes: Dict[int, int]


def run_election(
    meter_ids: Iterable[int], epoch: int, failure_history: Iterable[int] = ()
) -> MinerElection:
    """Deterministic rotation over the sorted roster, skipping failed meters.

    Every meter "votes" for the same rotation winner; the vote map is kept
    for audit.  A minority coalition cannot move the outcome because the
    winner is a pure function of (epoch, roster, failures).
    """
    ids = sorted(set(meter_ids))
    if not ids:
        raise EmptyInput("no meters to elect from")
    failed = set(failure_history)
    candidates = [i for i in ids if i not in failed]
    if not candidates:
        raise NoCandidate("every meter is in the failure history")
    winner = candidates[epoch % len(candidates)]
    return MinerElection(winner, {i: winner for i in ids})


def elect_miner(
    meter_ids: Iterable[int], epoch: int, failure_history: Iterable[int] = ()
) -> int:
    return run_election(meter_ids, epoch, failure_history).miner_id


# ---------------------------------------------------------------------------
# Block-time micro-benchmark
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchRow:
    n_meters: int
    mean_seconds: float
    cov: float


def bench_block_time(
    params: SystemParams,
    n_meters: Sequence[int],
    trials: int,
    rng,
) -> List[BenchRow]:
    """Wall-clock build_block + consensus_round over synthetic records."""
    from .funcenc import encrypt_reading  # local import avoids a cycle

    if trials < 1:
        raise ValueError("trials must be at least 1")
    if any(not 1 <= n <= 1000 for n in n_meters):
        raise ValueError("meter counts must lie in [1, 1000]")
    rows = []
    for n in n_meters:
        period = b"bench-period"
        ts = TimestampPoints.for_label(params, period)
        registry: Dict[Digest, DetectionKeySet] = {}
        dw_set = DetectionKeySet((params.g,), (period,))
        ref = dw_ref(dw_set)
        registry[ref] = dw_set
        records = []
        validators = []
        for i in range(n):
            sk, pk = bls.keygen(params, rng)
            cipher = encrypt_reading(
                params,
                (rng.randrange(params.order), rng.randrange(params.order)),
                ts,
                rng.randrange(65_000),
            )
            sig = bls.sign(params, sk, report_message(cipher, ts, dw_set, pk))
            rec = ReportRecord(i, cipher, period, ref, sig, pk)
            records.append(rec)
            validators.append(MeterValidator(i, rec))
        cfg = ConsensusConfig()
        samples = []
        for _ in range(trials):
            start = time.perf_counter()
            block = build_block(
                params, GENESIS_HASH, 0, records, 0, period, registry, rng
            )
            result = consensus_round(
                params, block, validators, cfg, GENESIS_HASH, period, registry, rng
            )
            samples.append(time.perf_counter() - start)
            assert result.committed
        mean = statistics.fmean(samples)
        cov = statistics.pstdev(samples) / mean if len(samples) > 1 and mean else 0.0
        rows.append(BenchRow(n, mean, cov))
    return rows
