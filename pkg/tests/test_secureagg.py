import random

import pytest

from privgrid.errors import TopologyError
from privgrid.secureagg import (
    MaskShare,
    MeterSecret,
    agreement_public_key,
    aggregate_da,
    blind_share,
    gen_meter_secret,
    ka_agree,
    ka_gen,
    run_key_setup,
)


def make_meters(params, m, seed=0):
    rng = random.Random(seed)
    return {i: gen_meter_secret(params, rng) for i in range(m)}


class TestKeyAgreement:
    def test_secret_one_gives_generator(self, params):
        assert agreement_public_key(params, 1).pk == params.g

    def test_same_seed_same_pair(self, params):
        x1, pk1 = ka_gen(params, random.Random(42))
        x2, pk2 = ka_gen(params, random.Random(42))
        assert x1 == x2 and pk1 == pk2

    def test_symmetry(self, params, rng):
        for _ in range(100):
            xa, pka = ka_gen(params, rng)
            xb, pkb = ka_gen(params, rng)
            assert ka_agree(params, xa, pkb) == ka_agree(params, xb, pka)

    def test_distinct_peers_distinct_masks(self, params, rng):
        xa, _ = ka_gen(params, rng)
        masks = set()
        for _ in range(100):
            _, pk = ka_gen(params, rng)
            masks.add(ka_agree(params, xa, pk))
        assert len(masks) == 100

    def test_zero_secret_rejected(self, params, rng):
        _, pk = ka_gen(params, rng)
        with pytest.raises(ValueError):
            ka_agree(params, 0, pk)
        with pytest.raises(ValueError):
            agreement_public_key(params, 0)


class TestBlindShare:
    def test_single_meter_share_is_secret(self, params):
        s = (123, 456)
        share = blind_share(params, 7, s, [], [7])
        assert share.y == s

    def test_two_meter_cancellation(self, params):
        q = params.order
        s1, s2 = (3, 1), (5, 2)
        mask = (11, 22)
        y1 = blind_share(params, 1, s1, [(2, mask)], [1, 2])
        y2 = blind_share(params, 2, s2, [(1, mask)], [1, 2])
        total = ((y1.y[0] + y2.y[0]) % q, (y1.y[1] + y2.y[1]) % q)
        assert total == (8, 3)

    def test_four_meter_whitebox(self, params):
        meters = make_meters(params, 4)
        da = run_key_setup(params, meters)
        q = params.order
        want = (
            sum(m.s[0] for m in meters.values()) % q,
            sum(m.s[1] for m in meters.values()) % q,
        )
        assert da.da == want

    def test_missing_peer(self, params):
        with pytest.raises(TopologyError):
            blind_share(params, 1, (1, 1), [], [1, 2])

    def test_duplicate_peer(self, params):
        with pytest.raises(TopologyError):
            blind_share(params, 1, (1, 1), [(2, (5, 5)), (2, (5, 5))], [1, 2])

    def test_unknown_peer(self, params):
        with pytest.raises(TopologyError):
            blind_share(params, 1, (1, 1), [(9, (5, 5))], [1, 2])


class TestAggregateDa:
    def test_simple_sum(self, params):
        shares = [MaskShare((3, 1)), MaskShare((5, 2))]
        assert aggregate_da(params, shares, 2).da == (8, 3)

    def test_count_mismatch(self, params):
        with pytest.raises(TopologyError):
            aggregate_da(params, [MaskShare((1, 1))], 2)

    @pytest.mark.parametrize("m", [1, 2, 3, 10])
    def test_mask_cancellation_property(self, params, m):
        q = params.order
        for seed in (0, 1):
            meters = make_meters(params, m, seed=seed)
            da = run_key_setup(params, meters)
            want = (
                sum(x.s[0] for x in meters.values()) % q,
                sum(x.s[1] for x in meters.values()) % q,
            )
            assert da.da == want

    def test_share_never_equals_secret_when_masked(self, params):
        hits = 0
        for seed in range(100):
            meters = make_meters(params, 2, seed=seed)
            pub = {i: agreement_public_key(params, m.x) for i, m in meters.items()}
            mask = ka_agree(params, meters[0].x, pub[1])
            share = blind_share(params, 0, meters[0].s, [(1, mask)], [0, 1])
            hits += share.y == meters[0].s
        assert hits == 0

    def test_dropout_breaks_aggregate(self, params):
        # With one share withheld the sum differs from the remaining
        # secrets' sum by the dropped meter's uncancelled masks.
        q = params.order
        meters = make_meters(params, 4)
        ids = sorted(meters)
        pub = {i: agreement_public_key(params, m.x) for i, m in meters.items()}
        shares = {}
        for i in ids:
            masks = [
                (o, ka_agree(params, meters[i].x, pub[o])) for o in ids if o != i
            ]
            shares[i] = blind_share(params, i, meters[i].s, masks, ids)
        partial = aggregate_da(params, [shares[i] for i in ids if i != 2], 3)
        rest = (
            sum(meters[i].s[0] for i in ids if i != 2) % q,
            sum(meters[i].s[1] for i in ids if i != 2) % q,
        )
        assert partial.da != rest
