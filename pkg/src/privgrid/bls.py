"""Short signatures over report messages with single and batch verification.

Signatures live on the pairing curve: sign(x, m) = x * H2(m) where H2
hashes into the curve's prime-order subgroup, and verification checks
pair(sigma, g2) == pair(H2(m), pk).  The symmetric pairing lets both
arguments come from the same group.

Batch verification blinds every item with a random 64-bit coefficient
before combining, so one forged pair cannot cancel against another; a
batch of forgeries slips through with probability at most 2^-64.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass
from typing import Sequence, Tuple

from .crypto import Scalar, SystemParams
from .curve import Point
from .errors import EmptyInput

MESSAGE_DOMAIN = b"SIG"


@dataclass(frozen=True)
class SigningKey:
    x: Scalar

    def __post_init__(self):
        if self.x == 0:
            raise ValueError("signing key must be non-zero")


@dataclass(frozen=True)
class VerifyKey:
    pk: Point


@dataclass(frozen=True)
class Signature:
    sigma: Point


def keygen(params: SystemParams, rng) -> Tuple[SigningKey, VerifyKey]:
    x = rng.randrange(1, params.order)
    return SigningKey(x), VerifyKey(params.pairing.mul(x, params.g2))


def verify_key(params: SystemParams, sk: SigningKey) -> VerifyKey:
    return VerifyKey(params.pairing.mul(sk.x, params.g2))


def hash_message(params: SystemParams, message: bytes) -> Point:
    return params.pairing.hash_to_point(MESSAGE_DOMAIN, message)


def sign(params: SystemParams, sk: SigningKey, message: bytes) -> Signature:
    return Signature(params.pairing.mul(sk.x, hash_message(params, message)))


def verify(
    params: SystemParams, pk: VerifyKey, message: bytes, sig: Signature
) -> bool:
    group = params.pairing
    if pk.pk.is_identity():
        return False
    lhs = group.pair(sig.sigma, params.g2)
    rhs = group.pair(hash_message(params, message), pk.pk)
    return lhs == rhs


def batch_verify(
    params: SystemParams,
    items: Sequence[Tuple[VerifyKey, bytes, Signature]],
    rng=None,
) -> bool:
    """Accept iff every (pk, message, sig) item individually verifies.

    Checks pair(sum_i c_i*sigma_i, g2) == prod_i pair(H2(m_i), c_i*pk_i)
    with fresh random coefficients c_i.  Coefficients default to the
    system entropy source; pass a seeded rng for reproducible runs.
    """
    if not items:
        raise EmptyInput("batch_verify needs at least one item")
    group = params.pairing
    draw = rng.getrandbits if rng is not None else secrets.randbits
    coeffs = [draw(64) | 1 for _ in items]  # odd, hence non-zero
    lhs = group.pair(
        group.msm([(c, sig.sigma) for c, (_, _, sig) in zip(coeffs, items)]),
        params.g2,
    )
    rhs = None
    for c, (pk, message, _) in zip(coeffs, items):
        if pk.pk.is_identity():
            return False
        term = group.pair(hash_message(params, message), group.mul(c, pk.pk))
        rhs = term if rhs is None else rhs * term
    return lhs == rhs
