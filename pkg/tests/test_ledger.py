import random
from dataclasses import replace
from fractions import Fraction

import pytest

from privgrid import bls
from privgrid.errors import (
    EmptyInput,
    NoCandidate,
    SignatureError,
    StaleTimestamp,
)
from privgrid.funcenc import DetectionKeySet, TimestampPoints, encrypt_reading
from privgrid.ledger import (
    GENESIS_HASH,
    Block,
    Chain,
    ConsensusConfig,
    MeterValidator,
    ReportRecord,
    build_block,
    chain_from_json,
    chain_to_json,
    consensus_round,
    dw_ref,
    elect_miner,
    merkle_proof,
    merkle_root,
    report_message,
    run_election,
    validate_chain,
    verify_inclusion,
    wire_report_bytes,
)
from privgrid.ledger import _leaf_hash, _node_hash


def make_area(params, m, period=b"p0", seed=5):
    """m meters with keys, one shared DW set, signed records, validators."""
    rng = random.Random(seed)
    ts = TimestampPoints.for_label(params, period)
    dw_set = DetectionKeySet((params.g, params.plain.mul(3, params.g)), (period,))
    ref = dw_ref(dw_set)
    registry = {ref: dw_set}
    records, validators = [], []
    for i in range(m):
        sk, pk = bls.keygen(params, rng)
        cipher = encrypt_reading(
            params,
            (rng.randrange(params.order), rng.randrange(params.order)),
            ts,
            rng.randrange(1000),
        )
        sig = bls.sign(params, sk, report_message(cipher, ts, dw_set, pk))
        rec = ReportRecord(i, cipher, period, ref, sig, pk)
        records.append(rec)
        validators.append(MeterValidator(i, rec))
    return records, validators, registry, ts, rng


class TestMerkle:
    def test_single_leaf_duplicated(self):
        a = b"leaf-a"
        assert merkle_root([a]) == _node_hash(_leaf_hash(a), _leaf_hash(a))

    def test_two_leaves(self):
        a, b = b"leaf-a", b"leaf-b"
        assert merkle_root([a, b]) == _node_hash(_leaf_hash(a), _leaf_hash(b))

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            merkle_root([])

    def test_mutation_sweep_changes_root(self):
        rng = random.Random(1)
        leaves = [rng.randbytes(32) for _ in range(200)]
        root = merkle_root(leaves)
        for i in range(200):
            mutated = list(leaves)
            mutated[i] = bytes([mutated[i][0] ^ 1]) + mutated[i][1:]
            assert merkle_root(mutated) != root

    @pytest.mark.parametrize("n", [1, 2, 3, 7, 8, 13])
    def test_inclusion_proofs(self, n):
        rng = random.Random(n)
        leaves = [rng.randbytes(16) for _ in range(n)]
        root = merkle_root(leaves)
        for i, leaf in enumerate(leaves):
            proof = merkle_proof(leaves, i)
            assert verify_inclusion(leaf, proof, root)
            assert not verify_inclusion(leaf + b"x", proof, root)


class TestBuildBlock:
    def test_valid_block_validates(self, params):
        records, _, registry, _, rng = make_area(params, 10)
        block = build_block(
            params, GENESIS_HASH, 0, records, 7, b"p0", registry, rng
        )
        assert block.stored_hash == block.compute_hash()
        chain = Chain(dw_registry=registry)
        chain.append(block)
        assert validate_chain(params, chain) is None

    def test_tampered_cipher_names_meter(self, params):
        records, _, registry, ts, rng = make_area(params, 5)
        victim = records[2]
        fake_cipher = encrypt_reading(params, (1, 2), ts, 999)
        records[2] = replace(victim, cipher=fake_cipher)
        with pytest.raises(SignatureError, match="meter 2"):
            build_block(params, GENESIS_HASH, 0, records, 0, b"p0", registry, rng)

    def test_stale_timestamp(self, params):
        records, _, registry, _, rng = make_area(params, 3)
        records[1] = replace(records[1], period_label=b"p-old")
        with pytest.raises(StaleTimestamp):
            build_block(params, GENESIS_HASH, 0, records, 0, b"p0", registry, rng)

    def test_empty_records(self, params):
        with pytest.raises(EmptyInput):
            build_block(params, GENESIS_HASH, 0, [], 0, b"p0", {}, None)


class TestConsensus:
    def _block(self, params, records, registry, rng):
        return build_block(params, GENESIS_HASH, 0, records, 0, b"p0", registry, rng)

    def test_all_honest_commit_first_round(self, params):
        records, validators, registry, _, rng = make_area(params, 8)
        block = self._block(params, records, registry, rng)
        res = consensus_round(
            params, block, validators, ConsensusConfig(), GENESIS_HASH, b"p0", registry
        )
        assert res.committed and res.rounds == 1 and res.approvals == 8

    def test_post_signature_tamper_rejected(self, params):
        records, validators, registry, ts, rng = make_area(params, 8)
        block = self._block(params, records, registry, rng)
        # miner swaps in a different ciphertext after signing and re-roots
        tampered_records = list(block.records)
        tampered_records[4] = replace(
            tampered_records[4], cipher=encrypt_reading(params, (9, 9), ts, 1)
        )
        tampered_records = tuple(tampered_records)
        root = merkle_root([r.canonical_bytes() for r in tampered_records])
        draft = replace(block, records=tampered_records, merkle_root=root)
        tampered = replace(draft, stored_hash=draft.compute_hash())
        res = consensus_round(
            params, tampered, validators, ConsensusConfig(), GENESIS_HASH, b"p0", registry
        )
        assert not res.committed
        assert set(res.dissenters) == set(range(8))

    def test_byzantine_quarter_still_commits(self, params):
        m = 8
        records, validators, registry, _, rng = make_area(params, m)
        for v in validators[: -(m // 4) - 1 : -1][: (m + 3) // 4]:
            v.honest = False
        byz = sum(1 for v in validators if not v.honest)
        assert byz == 2  # ceil(8/4)
        block = self._block(params, records, registry, rng)
        res = consensus_round(
            params, block, validators, ConsensusConfig(), GENESIS_HASH, b"p0", registry
        )
        assert res.committed
        assert res.approvals == m - byz

    def test_quorum_counts(self):
        cfg = ConsensusConfig()
        assert cfg.quorum_count(4) == 3
        assert cfg.quorum_count(9) == 6
        assert cfg.quorum_count(100) == 67

    def test_bad_quorum_rejected(self):
        with pytest.raises(ValueError):
            ConsensusConfig(quorum_fraction=Fraction(1, 2))


class TestChain:
    def _honest_chain(self, params, n_blocks=3, m=4):
        records, validators, registry, _, rng = make_area(params, m)
        chain = Chain(dw_registry=registry)
        for h in range(n_blocks):
            block = build_block(
                params, chain.head_hash, h, records, h, b"p0", registry, rng
            )
            chain.append(block)
        return chain

    def test_honest_chain_ok(self, params):
        chain = self._honest_chain(params)
        assert validate_chain(params, chain) is None

    def test_empty_chain_ok(self, params):
        assert validate_chain(params, Chain()) is None

    def test_mutated_block_reported(self, params):
        chain = self._honest_chain(params, n_blocks=6)
        victim = chain.blocks[5]
        recs = list(victim.records)
        recs[0] = replace(recs[0], meter_id=99)
        chain.blocks[5] = replace(victim, records=tuple(recs))
        assert validate_chain(params, chain) == 5

    def test_round_trip_json(self, params):
        chain = self._honest_chain(params)
        text = chain_to_json(chain)
        again = chain_from_json(params, text)
        assert chain_to_json(again) == text
        assert validate_chain(params, again) is None

    def test_wire_report_is_600_bytes_with_10_dw(self, params, rng):
        period = b"p0"
        ts = TimestampPoints.for_label(params, period)
        dw_set = DetectionKeySet(tuple([params.g] * 10), (period,))
        sk, pk = bls.keygen(params, rng)
        cipher = encrypt_reading(params, (1, 2), ts, 5)
        sig = bls.sign(params, sk, report_message(cipher, ts, dw_set, pk))
        assert len(wire_report_bytes(cipher, ts, dw_set, sig, pk)) == 600


class TestElection:
    def test_fresh_epoch_lowest_id(self):
        assert elect_miner([4, 2, 1, 3], epoch=0) == 1

    def test_rotation_advances(self):
        assert elect_miner([1, 2, 3, 4], epoch=1) == 2

    def test_failed_miner_skipped(self):
        assert elect_miner([1, 2, 3, 4], epoch=0, failure_history=[1]) == 2

    def test_all_failed(self):
        with pytest.raises(NoCandidate):
            elect_miner([1, 2], epoch=0, failure_history=[1, 2])

    def test_votes_recorded(self):
        result = run_election([1, 2, 3], epoch=2)
        assert result.miner_id == 3
        assert result.votes == {1: 3, 2: 3, 3: 3}

    def test_minority_coalition_cannot_move_outcome(self):
        # The rotation winner is a pure function of (epoch, roster, failures);
        # votes are recorded but carry no discretion a coalition could use.
        ids = list(range(10))
        for epoch in range(10):
            winners = {run_election(ids, epoch).miner_id for _ in range(5)}
            assert len(winners) == 1
