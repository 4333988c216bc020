"""Pairwise-mask key agreement and mask-cancelling aggregation.

Meters blind their per-meter encryption secret ``s_i`` (a 2-vector over
Z_q) with pairwise Diffie-Hellman masks before handing it to the miner.
Summing all blinded shares cancels every mask, leaving the area
decryption key ``DA = sum_i s_i`` without revealing any individual
secret.  Masks are ordered by meter id: the lower-id meter of a pair adds
the mask and the higher-id one subtracts it, so each pair contributes
zero to the total.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

from .crypto import Scalar, SystemParams, hash_to_scalar
from .curve import Point
from .errors import DecodeError, TopologyError

ScalarPair = Tuple[Scalar, Scalar]


@dataclass(frozen=True)
class MeterSecret:
    """Per-meter secrets: x signs and agrees keys, s encrypts readings."""

    x: Scalar
    s: ScalarPair


@dataclass(frozen=True)
class AgreementPublicKey:
    pk: Point


@dataclass(frozen=True)
class MaskShare:
    """Blinded secret y_i; structureless by design."""

    y: ScalarPair


@dataclass(frozen=True)
class AggregationKey:
    """Component-wise sum of all meter secrets s_i (mod q)."""

    da: ScalarPair


def gen_meter_secret(params: SystemParams, rng) -> MeterSecret:
    x = rng.randrange(1, params.order)
    s = (params.plain.random_scalar(rng), params.plain.random_scalar(rng))
    return MeterSecret(x=x, s=s)


def ka_gen(params: SystemParams, rng) -> Tuple[Scalar, AgreementPublicKey]:
    """Fresh agreement keypair: secret x and public x*g on the plain curve."""
    x = rng.randrange(1, params.order)
    return x, AgreementPublicKey(params.plain.mul(x, params.g))


def agreement_public_key(params: SystemParams, secret: Scalar) -> AgreementPublicKey:
    if secret % params.order == 0:
        raise ValueError("agreement secret must be non-zero")
    return AgreementPublicKey(params.plain.mul(secret, params.g))


def ka_agree(
    params: SystemParams, my_secret: Scalar, their_public: AgreementPublicKey
) -> ScalarPair:
    """Shared mask pair from x_u * (x_v * g), hashed into two scalars.

    Symmetric in the two parties; the shared point is hashed (rather than
    used raw) because masks must be Z_q scalars, and the hash is
    domain-separated per vector component.
    """
    if my_secret % params.order == 0:
        raise ValueError("agreement secret must be non-zero")
    pk = their_public.pk
    if pk.group.p != params.plain.p or pk.is_identity():
        raise DecodeError("invalid agreement public key")
    shared = params.plain.mul(my_secret, pk).encode()
    return (
        hash_to_scalar(b"MASK/0", shared, params.order),
        hash_to_scalar(b"MASK/1", shared, params.order),
    )


def blind_share(
    params: SystemParams,
    my_index: int,
    s: ScalarPair,
    peer_masks: Iterable[Tuple[int, ScalarPair]],
    expected_peers: Sequence[int],
) -> MaskShare:
    """Blind s with signed pairwise masks: add toward higher ids, subtract lower.

    ``expected_peers`` is the full ordered meter roster of the area
    (including ``my_index``); every other roster member must appear in
    ``peer_masks`` exactly once.
    """
    order = params.order
    roster = set(expected_peers)
    if my_index not in roster:
        raise TopologyError("meter %r not in the area roster" % my_index)
    needed = roster - {my_index}
    seen: Dict[int, ScalarPair] = {}
    for peer, mask in peer_masks:
        if peer == my_index:
            raise TopologyError("meter %r listed itself as a peer" % my_index)
        if peer not in needed:
            raise TopologyError("unexpected peer %r" % peer)
        if peer in seen:
            raise TopologyError("duplicate peer %r" % peer)
        seen[peer] = mask
    missing = needed - set(seen)
    if missing:
        raise TopologyError("missing peers: %s" % sorted(missing))
    y0, y1 = s[0] % order, s[1] % order
    for peer, (m0, m1) in seen.items():
        if my_index < peer:
            y0, y1 = (y0 + m0) % order, (y1 + m1) % order
        else:
            y0, y1 = (y0 - m0) % order, (y1 - m1) % order
    return MaskShare((y0, y1))


def aggregate_da(
    params: SystemParams, shares: Sequence[MaskShare], expected_count: int
) -> AggregationKey:
    """Fold the complete share set into DA; masks cancel pairwise."""
    if len(shares) != expected_count:
        raise TopologyError(
            "expected %d shares, got %d" % (expected_count, len(shares))
        )
    order = params.order
    d0 = d1 = 0
    for share in shares:
        d0 = (d0 + share.y[0]) % order
        d1 = (d1 + share.y[1]) % order
    return AggregationKey((d0, d1))


def run_key_setup(
    params: SystemParams, meters: Dict[int, MeterSecret]
) -> AggregationKey:
    """Full in-process key setup for one area: agree, blind, aggregate.

    Convenience driver used by the simulation; every meter pair performs
    one agreement in each direction (the symmetry of ka_agree makes the
    two directions equal, which doubles as a self-check here).
    """
    ids = sorted(meters)
    publics = {
        i: agreement_public_key(params, meters[i].x) for i in ids
    }
    shares: List[MaskShare] = []
    for i in ids:
        masks = []
        for o in ids:
            if o == i:
                continue
            masks.append((o, ka_agree(params, meters[i].x, publics[o])))
        shares.append(blind_share(params, i, meters[i].s, masks, ids))
    return aggregate_da(params, shares, len(ids))
