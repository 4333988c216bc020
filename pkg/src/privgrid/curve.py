"""Prime-order elliptic-curve groups with a symmetric pairing.

Both protocol groups are the order-``q`` subgroups of supersingular curves

    E : y^2 = x^3 + x   over F_p,   p = h*q - 1,   p ≡ 3 (mod 4)

which are cyclic of order ``p + 1 = h*q``.  Two instantiations share the
same 128-bit prime subgroup order ``q``: a "plain" curve used for
encryption and key agreement (only discrete-log hardness is needed) and a
"pairing" curve used for short signatures.  On the pairing curve the
distortion map ``phi(x, y) = (-x, i*y)`` into E(F_{p^2}) makes the Tate
pairing symmetric: ``pair(P, Q) = tate(P, phi(Q))`` is bilinear and
non-degenerate on the subgroup.

Points serialize to a fixed 40 bytes (two 20-byte big-endian affine
coordinates; the identity is all zeros).  Decoding rejects off-curve and
wrong-subgroup inputs.

Speed notes: scalar multiplication runs on Jacobian coordinates; a
Straus-interleaved multi-scalar multiplication backs the encryption hot
path.  The final exponentiation of the Tate pairing reduces to one
conjugation, one inversion, and a cofactor power because
``(p^2 - 1)/q = (p - 1)*h``.
"""

from __future__ import annotations

import hashlib
from typing import Iterable, Sequence, Tuple

from .errors import DecodeError

POINT_BYTES = 40
_COORD_BYTES = POINT_BYTES // 2

# Shared subgroup order: the smallest prime above 2^127.
SUBGROUP_ORDER = (1 << 127) + 29

# Cofactors found by searching h = 4, 8, ... for prime h*q - 1.
PLAIN_COFACTOR = 104
PAIRING_COFACTOR = 192

_JAC_IDENTITY = (1, 1, 0)


def _sha(*parts: bytes) -> bytes:
    d = hashlib.sha256()
    for part in parts:
        d.update(part)
    return d.digest()


# ---------------------------------------------------------------------------
# Jacobian-coordinate kernels (curve y^2 = x^3 + a*x with a = 1)
# ---------------------------------------------------------------------------


def _jac_double(pt, p):
    X, Y, Z = pt
    if not Z or not Y:
        return _JAC_IDENTITY
    YY = Y * Y % p
    S = 4 * X * YY % p
    ZZ = Z * Z % p
    M = (3 * X * X + ZZ * ZZ) % p            # a = 1 term: + a*Z^4
    X3 = (M * M - 2 * S) % p
    Y3 = (M * (S - X3) - 8 * YY * YY) % p
    Z3 = 2 * Y * Z % p
    return X3, Y3, Z3


def _jac_add_affine(pt, ax, ay, p):
    """Mixed addition: Jacobian pt + affine (ax, ay)."""
    X1, Y1, Z1 = pt
    if not Z1:
        return ax, ay, 1
    ZZ = Z1 * Z1 % p
    U2 = ax * ZZ % p
    S2 = ay * ZZ % p * Z1 % p
    H = (U2 - X1) % p
    R = (S2 - Y1) % p
    if not H:
        if not R:
            return _jac_double(pt, p)
        return _JAC_IDENTITY
    HH = H * H % p
    HHH = HH * H % p
    V = X1 * HH % p
    X3 = (R * R - HHH - 2 * V) % p
    Y3 = (R * (V - X3) - Y1 * HHH) % p
    Z3 = Z1 * H % p
    return X3, Y3, Z3


def _jac_to_affine(pt, p):
    X, Y, Z = pt
    if not Z:
        return None
    zi = pow(Z, -1, p)
    zi2 = zi * zi % p
    return X * zi2 % p, Y * zi2 % p * zi % p


# ---------------------------------------------------------------------------
# Points and groups
# ---------------------------------------------------------------------------


class Point:
    """Immutable affine point on one of the two protocol curves.

    ``xy is None`` encodes the identity.  Arithmetic keeps points inside
    the curve the point was created on; operands from different curves
    raise ``ValueError``.
    """

    __slots__ = ("group", "xy")

    def __init__(self, group: "CurveGroup", xy: Tuple[int, int] | None):
        self.group = group
        self.xy = xy

    # -- predicates ---------------------------------------------------------

    def is_identity(self) -> bool:
        return self.xy is None

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other: "Point") -> "Point":
        g = self.group
        if other.group.p != g.p:
            raise ValueError("points on different curves")
        if self.xy is None:
            return other
        if other.xy is None:
            return self
        p = g.p
        x1, y1 = self.xy
        x2, y2 = other.xy
        if x1 == x2:
            if (y1 + y2) % p == 0:
                return g.identity
            lam = (3 * x1 * x1 + 1) * pow(2 * y1, -1, p) % p
        else:
            lam = (y2 - y1) * pow(x2 - x1, -1, p) % p
        x3 = (lam * lam - x1 - x2) % p
        y3 = (lam * (x1 - x3) - y1) % p
        return Point(g, (x3, y3))

    def __neg__(self) -> "Point":
        if self.xy is None:
            return self
        x, y = self.xy
        return Point(self.group, (x, (-y) % self.group.p))

    def __sub__(self, other: "Point") -> "Point":
        return self + (-other)

    def __rmul__(self, k: int) -> "Point":
        return self.group.mul(k, self)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Point)
            and other.group.p == self.group.p
            and other.xy == self.xy
        )

    def __hash__(self) -> int:
        return hash((self.group.p, self.xy))

    def __repr__(self) -> str:
        if self.xy is None:
            return "Point(identity)"
        return "Point(x=%#x, y=%#x)" % self.xy

    # -- serialization ------------------------------------------------------

    def encode(self) -> bytes:
        """Canonical 40-byte encoding: x || y big-endian, identity = zeros."""
        if self.xy is None:
            return b"\x00" * POINT_BYTES
        x, y = self.xy
        return x.to_bytes(_COORD_BYTES, "big") + y.to_bytes(_COORD_BYTES, "big")


class CurveGroup:
    """Order-``q`` subgroup of a supersingular curve y^2 = x^3 + x over F_p."""

    def __init__(self, group_id: str, cofactor: int, order: int = SUBGROUP_ORDER):
        p = cofactor * order - 1
        if p % 4 != 3:
            raise ValueError("field prime must be 3 mod 4")
        self.group_id = group_id
        self.p = p
        self.cofactor = cofactor
        self.order = order
        self.identity = Point(self, None)
        self._sqrt_exp = (p + 1) // 4
        self.generator = self.hash_to_point(b"GEN", group_id.encode())

    # -- construction -------------------------------------------------------

    def point(self, x: int, y: int) -> Point:
        pt = Point(self, (x % self.p, y % self.p))
        if not self.on_curve(pt):
            raise DecodeError("coordinates not on curve")
        return pt

    def on_curve(self, pt: Point) -> bool:
        if pt.xy is None:
            return True
        x, y = pt.xy
        return (y * y - (x * x * x + x)) % self.p == 0

    def in_subgroup(self, pt: Point) -> bool:
        return self.mul(self.order, pt).is_identity()

    def hash_to_point(self, label: bytes, data: bytes) -> Point:
        """Deterministic try-and-increment hash onto the order-q subgroup.

        Distinct labels give independently distributed points (label and
        data are length-framed, so no concatenation ambiguity).
        """
        p = self.p
        prefix = len(label).to_bytes(2, "big") + label + data
        for counter in range(2**32):
            digest = _sha(prefix, counter.to_bytes(4, "big"))
            x = int.from_bytes(digest + _sha(digest, b"x2"), "big") % p
            rhs = (x * x * x + x) % p
            y = pow(rhs, self._sqrt_exp, p)
            if y * y % p != rhs:
                continue
            if y > p - y:
                y = p - y
            pt = self.mul(self.cofactor, Point(self, (x, y)))
            if not pt.is_identity():
                return pt
        raise RuntimeError("hash_to_point exhausted counter space")

    def random_point(self, rng) -> Point:
        """Uniform non-identity subgroup point from a seeded RNG."""
        k = rng.randrange(1, self.order)
        return self.mul(k, self.generator)

    def random_scalar(self, rng) -> int:
        return rng.randrange(self.order)

    # -- scalar multiplication ----------------------------------------------

    def mul(self, k: int, pt: Point) -> Point:
        if pt.group.p != self.p:
            raise ValueError("point from another curve")
        if pt.xy is None:
            return self.identity
        if k < 0:
            return self.mul(-k, -pt)
        if k == 0:
            return self.identity
        p = self.p
        ax, ay = pt.xy
        acc = _JAC_IDENTITY
        for bit in bin(k)[2:]:
            acc = _jac_double(acc, p)
            if bit == "1":
                acc = _jac_add_affine(acc, ax, ay, p)
        xy = _jac_to_affine(acc, p)
        return Point(self, xy) if xy else self.identity

    def msm(self, terms: Iterable[Tuple[int, Point]]) -> Point:
        """Multi-scalar multiplication sum(k_i * P_i), Straus-interleaved."""
        p = self.p
        prepared = []
        for k, pt in terms:
            if pt.group.p != self.p:
                raise ValueError("point from another curve")
            if k < 0:
                k, pt = -k, -pt
            if k and pt.xy is not None:
                prepared.append((k, pt.xy))
        if not prepared:
            return self.identity
        nbits = max(k.bit_length() for k, _ in prepared)
        acc = _JAC_IDENTITY
        for i in range(nbits - 1, -1, -1):
            acc = _jac_double(acc, p)
            for k, (ax, ay) in prepared:
                if (k >> i) & 1:
                    acc = _jac_add_affine(acc, ax, ay, p)
        xy = _jac_to_affine(acc, p)
        return Point(self, xy) if xy else self.identity

    def sum_points(self, points: Sequence[Point]) -> Point:
        """Sum many points with one shared inversion at the end."""
        p = self.p
        acc = _JAC_IDENTITY
        for pt in points:
            if pt.group.p != self.p:
                raise ValueError("point from another curve")
            if pt.xy is not None:
                acc = _jac_add_affine(acc, pt.xy[0], pt.xy[1], p)
        xy = _jac_to_affine(acc, p)
        return Point(self, xy) if xy else self.identity

    # -- serialization ------------------------------------------------------

    def decode(self, blob: bytes) -> Point:
        """Inverse of :meth:`Point.encode`; rejects anything non-canonical."""
        if len(blob) != POINT_BYTES:
            raise DecodeError("point encoding must be %d bytes" % POINT_BYTES)
        if blob == b"\x00" * POINT_BYTES:
            return self.identity
        x = int.from_bytes(blob[:_COORD_BYTES], "big")
        y = int.from_bytes(blob[_COORD_BYTES:], "big")
        if x >= self.p or y >= self.p:
            raise DecodeError("coordinate exceeds field modulus")
        pt = Point(self, (x, y))
        if not self.on_curve(pt):
            raise DecodeError("point not on curve")
        if not self.in_subgroup(pt):
            raise DecodeError("point outside prime-order subgroup")
        return pt

    def __repr__(self) -> str:
        return "CurveGroup(%s)" % self.group_id


# ---------------------------------------------------------------------------
# F_{p^2} arithmetic and the symmetric Tate pairing
# ---------------------------------------------------------------------------


class Fp2:
    """Element a + b*i of F_{p^2} = F_p[i], i^2 = -1 (valid since p = 3 mod 4)."""

    __slots__ = ("a", "b", "p")

    def __init__(self, a: int, b: int, p: int):
        self.a = a % p
        self.b = b % p
        self.p = p

    def __mul__(self, other: "Fp2") -> "Fp2":
        p = self.p
        a, b, c, d = self.a, self.b, other.a, other.b
        return Fp2((a * c - b * d) % p, (a * d + b * c) % p, p)

    def square(self) -> "Fp2":
        p = self.p
        a, b = self.a, self.b
        return Fp2((a - b) * (a + b) % p, 2 * a * b % p, p)

    def conjugate(self) -> "Fp2":
        return Fp2(self.a, -self.b, self.p)

    def inverse(self) -> "Fp2":
        p = self.p
        norm_inv = pow(self.a * self.a + self.b * self.b, -1, p)
        return Fp2(self.a * norm_inv % p, -self.b * norm_inv % p, p)

    def pow(self, e: int) -> "Fp2":
        result = Fp2(1, 0, self.p)
        base = self
        while e:
            if e & 1:
                result = result * base
            base = base.square()
            e >>= 1
        return result

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Fp2)
            and self.p == other.p
            and self.a == other.a
            and self.b == other.b
        )

    def __hash__(self) -> int:
        return hash((self.a, self.b, self.p))

    def is_one(self) -> bool:
        return self.a == 1 and self.b == 0

    def encode(self) -> bytes:
        return self.a.to_bytes(_COORD_BYTES, "big") + self.b.to_bytes(
            _COORD_BYTES, "big"
        )

    def __repr__(self) -> str:
        return "Fp2(%#x + %#x*i)" % (self.a, self.b)


class PairingGroup(CurveGroup):
    """Curve group additionally supporting a symmetric bilinear pairing."""

    def pair(self, P: Point, Q: Point) -> Fp2:
        """Modified Tate pairing e(P, phi(Q)) into the order-q subgroup of F_{p^2}*.

        Bilinear and non-degenerate for subgroup points; ``pair(P, P)`` is
        not 1 for non-identity P, so the pairing is usable with both
        arguments on the same curve.
        """
        if P.group.p != self.p or Q.group.p != self.p:
            raise ValueError("pairing arguments must live on the pairing curve")
        if P.xy is None or Q.xy is None:
            return Fp2(1, 0, self.p)
        f = self._miller(P, Q)
        # Final exponentiation: (p^2-1)/q = (p-1) * cofactor, and
        # z^(p-1) = conj(z) / z in F_p[i].
        g = f.conjugate() * f.inverse()
        return g.pow(self.cofactor)

    def _miller(self, P: Point, Q: Point) -> Fp2:
        """Miller loop f_{q,P} evaluated at the distorted image of Q."""
        p = self.p
        qx, qy = Q.xy
        dx = (-qx) % p                       # phi(Q).x  = -x, real
        # phi(Q).y = i*y, purely imaginary
        tx, ty = P.xy
        px, py = P.xy
        f = Fp2(1, 0, p)
        t_inf = False
        for bit in bin(self.order)[3:]:      # skip the leading 1 bit
            if not t_inf:
                # Tangent line at T, evaluated at (dx, i*qy).
                if ty == 0:
                    f = f.square() * Fp2(dx - tx, 0, p)
                    t_inf = True
                else:
                    lam = (3 * tx * tx + 1) * pow(2 * ty, -1, p) % p
                    line = Fp2((-ty - lam * (dx - tx)) % p, qy, p)
                    f = f.square() * line
                    x3 = (lam * lam - 2 * tx) % p
                    ty = (lam * (tx - x3) - ty) % p
                    tx = x3
            else:
                f = f.square()
            if bit == "1" and not t_inf:
                # Chord through T and P, evaluated at the distorted point.
                if tx == px:
                    if (ty + py) % p == 0:
                        f = f * Fp2(dx - tx, 0, p)
                        t_inf = True
                    else:
                        lam = (3 * tx * tx + 1) * pow(2 * ty, -1, p) % p
                        line = Fp2((-ty - lam * (dx - tx)) % p, qy, p)
                        f = f * line
                        x3 = (lam * lam - 2 * tx) % p
                        ty = (lam * (tx - x3) - ty) % p
                        tx = x3
                else:
                    lam = (ty - py) * pow(tx - px, -1, p) % p
                    line = Fp2((-ty - lam * (dx - tx)) % p, qy, p)
                    f = f * line
                    x3 = (lam * lam - tx - px) % p
                    ty = (lam * (tx - x3) - ty) % p
                    tx = x3
        return f


def plain_group() -> CurveGroup:
    return CurveGroup("ssw-h104", PLAIN_COFACTOR)


def pairing_group() -> PairingGroup:
    return PairingGroup("ssw-h192", PAIRING_COFACTOR)
