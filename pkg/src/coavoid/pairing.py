"""Bilinear pairing over a supersingular curve, for hash-to-group signatures.

Curve: y^2 = x^3 + x over F_q with q = 3 (mod 4), which is supersingular
with q + 1 points. Signatures live in the order-r subgroup (r | q + 1).
The embedding degree is 2, so pairing values live in F_{q^2} = F_q(i).
The distortion map (x, y) -> (-x, i*y) turns the Tate pairing into a
non-degenerate symmetric pairing on the single subgroup, letting one
verify Sig = sk * H(m) against PK = sk * G via

    e(Sig, G) == e(H(m), PK)

Verticals in Miller's loop evaluate inside F_q and die in the final
exponentiation (their order divides q - 1), so only line numerators are
accumulated. Arithmetic is affine; sizes here favour clarity over speed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

Point = Optional[tuple[int, int]]     # None is the point at infinity
Fq2 = tuple[int, int]                 # a + b*i with i^2 = -1

# fixed demonstration-grade parameter set (512-bit field, 160-bit subgroup)
Q = 8450388460180711417854381272305910076809133176656922184542687943721771102241359741241339651350109035669169901406044740978675253513144365422200901738604567
R = 921124216215495298798681536395123769370615413779
COFACTOR = 9173994463960286046443283581208347763186259956673124494950355357547691504353939232280074212440502746221192
GX = 2254035939041153519371452704384631823513944193757106539310112358696466690099086831394757422743208440207625307517434348527877936286386222165870783389703973
GY = 7901728392202567310520526815192477136444596813748512476375792633496494747599940875207428154450807510534674553033539232123242196075507760478607024061594539
G: Point = (GX, GY)

assert Q % 4 == 3 and (Q + 1) == COFACTOR * R


def is_on_curve(P: Point) -> bool:
    if P is None:
        return True
    x, y = P
    return (y * y - (x * x * x + x)) % Q == 0


def add(P: Point, Qp: Point) -> Point:
    if P is None:
        return Qp
    if Qp is None:
        return P
    x1, y1 = P
    x2, y2 = Qp
    if x1 == x2:
        if (y1 + y2) % Q == 0:
            return None
        m = (3 * x1 * x1 + 1) * pow(2 * y1, -1, Q) % Q
    else:
        m = (y2 - y1) * pow(x2 - x1, -1, Q) % Q
    x3 = (m * m - x1 - x2) % Q
    return (x3, (m * (x1 - x3) - y1) % Q)


def mul(k: int, P: Point) -> Point:
    if k < 0:
        k, P = -k, neg(P)
    acc: Point = None
    while k:
        if k & 1:
            acc = add(acc, P)
        P = add(P, P)
        k >>= 1
    return acc


def neg(P: Point) -> Point:
    if P is None:
        return None
    return (P[0], (-P[1]) % Q)


# -- F_{q^2} ------------------------------------------------------------------

F2_ONE: Fq2 = (1, 0)


def f2_mul(a: Fq2, b: Fq2) -> Fq2:
    return ((a[0] * b[0] - a[1] * b[1]) % Q, (a[0] * b[1] + a[1] * b[0]) % Q)


def f2_inv(a: Fq2) -> Fq2:
    d = pow(a[0] * a[0] + a[1] * a[1], -1, Q)
    return (a[0] * d % Q, (-a[1]) * d % Q)


def f2_conj(a: Fq2) -> Fq2:
    return (a[0], (-a[1]) % Q)


def f2_pow(a: Fq2, e: int) -> Fq2:
    acc = F2_ONE
    while e:
        if e & 1:
            acc = f2_mul(acc, a)
        a = f2_mul(a, a)
        e >>= 1
    return acc


# -- Tate pairing --------------------------------------------------------------

class DegeneratePairing(ValueError):
    pass


def _line(T: tuple[int, int], U: tuple[int, int], at_x: int, at_y: Fq2) -> Fq2:
    """Numerator of the line through T and U (tangent if T == U), evaluated
    at the distorted point (at_x, at_y) with at_x in F_q and at_y in i*F_q."""
    x1, y1 = T
    x2, y2 = U
    if x1 == x2 and (y1 + y2) % Q == 0:       # vertical
        return ((at_x - x1) % Q, 0)
    if T == U:
        m = (3 * x1 * x1 + 1) * pow(2 * y1, -1, Q) % Q
    else:
        m = (y2 - y1) * pow(x2 - x1, -1, Q) % Q
    # at_y - y1 - m*(at_x - x1): real part in F_q, imaginary part from at_y
    real = (-y1 - m * (at_x - x1)) % Q
    return ((real + at_y[0]) % Q, at_y[1] % Q)


def tate(P: Point, Qp: Point) -> Fq2:
    """Distortion-modified Tate pairing of two subgroup points."""
    if P is None or Qp is None:
        return F2_ONE
    # distorted second argument: (-xq, i*yq)
    at_x = (-Qp[0]) % Q
    at_y: Fq2 = (0, Qp[1] % Q)
    f = F2_ONE
    T = P
    for bit in bin(R)[3:]:
        f = f2_mul(f2_mul(f, f), _line(T, T, at_x, at_y))
        T = add(T, T)
        if bit == "1":
            if T is None:
                raise DegeneratePairing("hit infinity mid-loop")
            f = f2_mul(f, _line(T, P, at_x, at_y))
            T = add(T, P)
    if f == (0, 0):
        raise DegeneratePairing("line through evaluation point")
    # final exponentiation: f^(q-1) = conj(f)/f, then the cofactor power
    f = f2_mul(f2_conj(f), f2_inv(f))
    return f2_pow(f, COFACTOR)


# -- hash-to-subgroup and the signature scheme ---------------------------------

def _sqrt_q(t: int) -> Optional[int]:
    y = pow(t, (Q + 1) // 4, Q)
    return y if y * y % Q == t % Q else None


def hash_to_point(message: bytes) -> Point:
    """Try-and-increment onto the curve, then clear the cofactor."""
    counter = 0
    while True:
        h = hashlib.sha256(message + counter.to_bytes(4, "big")).digest()
        x = int.from_bytes(h, "big") % Q
        y = _sqrt_q((x * x * x + x) % Q)
        if y is not None:
            P = mul(COFACTOR, (x, min(y, Q - y)))
            if P is not None:
                return P
        counter += 1


@dataclass(frozen=True)
class PairingKeyPair:
    secret: int
    public: Point


def keygen(rng) -> PairingKeyPair:
    sk = rng.randrange(1, R)
    return PairingKeyPair(secret=sk, public=mul(sk, G))


def sign(secret: int, message: bytes) -> Point:
    return mul(secret % R, hash_to_point(message))


def verify(public: Point, message: bytes, signature: Point) -> bool:
    if signature is None or public is None:
        return False
    if not (is_on_curve(signature) and is_on_curve(public)):
        return False
    if mul(R, signature) is not None:       # must lie in the order-r subgroup
        return False
    try:
        return tate(signature, G) == tate(hash_to_point(message), public)
    except DegeneratePairing:
        return False


def point_to_bytes(P: Point) -> bytes:
    if P is None:
        return b"\x00" * 129
    size = (Q.bit_length() + 7) // 8
    return b"\x04" + P[0].to_bytes(size, "big") + P[1].to_bytes(size, "big")


def point_from_bytes(blob: bytes) -> Point:
    size = (Q.bit_length() + 7) // 8
    if blob == b"\x00" * (2 * size + 1):
        return None
    if len(blob) != 2 * size + 1 or blob[0] != 4:
        raise ValueError("bad point encoding")
    return (int.from_bytes(blob[1:size + 1], "big"),
            int.from_bytes(blob[size + 1:], "big"))
