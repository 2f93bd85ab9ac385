"""Encrypted proximity verification.

After the coarse screen (same identifier, same hidden cell, valid time) the
two parties check real proximity without revealing coordinates. The patient
fixes a circle through a diameter pair p1, p2 and publishes seven blinded
components; the user folds its own position into two response values; only
the patient can strip the blinding, and all it learns is the sign of

    D = r * ((u - p1) . (u - p2))

which is negative exactly when the user sat inside the circle. The user's
blind r hides the magnitude, the patient's multiplier s hides everything
from outsiders, and additive noise below alpha^2 vanishes in the final
floor-divide.

All operating widths must satisfy three bit-length inequalities or the
arithmetic wraps mod p and decisions go wrong; `gen_params` refuses any
set that fails them.
"""

from __future__ import annotations

import hashlib
import math
import secrets as _secrets
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import sympy
from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey, Ed25519PublicKey)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey, X25519PublicKey)
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305

from . import pairing
from .devicelog import ExchangeRecord, validate_timestamp
from .edgeserver import StoredRecord
from .errors import (ConstraintViolation, CoordinateOverflow, NoiseOverflow,
                     SanityCheckFailed, SecretsConsumed)
from .keysched import interval_of

DEFAULT_SIZES = dict(k1=800, k2=310, k3=128, k4=128, coord_bits=22)
TOY_SIZES = dict(k1=256, k2=96, k3=32, k4=32, coord_bits=10)


# -- parameters ----------------------------------------------------------------

@dataclass(frozen=True)
class FineGrainParams:
    k1: int
    k2: int
    k3: int
    k4: int
    coord_bits: int
    p: int
    alpha: int


def constraint_terms(k1: int, k2: int, k3: int, k4: int, coord_bits: int) -> list[tuple[int, int]]:
    """(lhs, rhs) per inequality; each requires lhs < rhs."""
    b = coord_bits
    return [
        (k4 + max(2 * k2 + 2 * b + 2, k2 + b + k3 + 2), k1),
        (k4 + max(2 * k2 + 2 * b + 2, k2 + 2 * b + 1 + k3), k1),
        (k4 + k3 + 2 * b + 2, k2),
    ]


def check_constraints(k1: int, k2: int, k3: int, k4: int, coord_bits: int) -> None:
    failed = [i + 1 for i, (lhs, rhs) in
              enumerate(constraint_terms(k1, k2, k3, k4, coord_bits))
              if not lhs < rhs]
    if failed:
        parts = []
        terms = constraint_terms(k1, k2, k3, k4, coord_bits)
        for i in failed:
            lhs, rhs = terms[i - 1]
            parts.append(f"constraint {i}: {lhs} < {rhs} is false")
        exc = ConstraintViolation("; ".join(parts))
        exc.violated = failed  # type: ignore[attr-defined]
        raise exc


def _random_prime(bits: int, rng) -> int:
    while True:
        cand = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if sympy.isprime(cand):
            return cand


def gen_params(k1: int = DEFAULT_SIZES["k1"], k2: int = DEFAULT_SIZES["k2"],
               k3: int = DEFAULT_SIZES["k3"], k4: int = DEFAULT_SIZES["k4"],
               coord_bits: int = DEFAULT_SIZES["coord_bits"],
               rng=None) -> FineGrainParams:
    check_constraints(k1, k2, k3, k4, coord_bits)
    rng = rng if rng is not None else _secrets.SystemRandom()
    p = _random_prime(k1, rng)
    alpha = _random_prime(k2, rng)
    assert alpha * alpha < p
    return FineGrainParams(k1=k1, k2=k2, k3=k3, k4=k4, coord_bits=coord_bits,
                           p=p, alpha=alpha)


# -- fixed-point coordinates ----------------------------------------------------

@dataclass(frozen=True)
class FixedPointCodec:
    """Planar metres to non-negative integers at 1 m resolution, centred so
    the region origin sits mid-range."""
    coord_bits: int = DEFAULT_SIZES["coord_bits"]

    @property
    def offset(self) -> int:
        return 1 << (self.coord_bits - 1)

    @property
    def limit(self) -> int:
        return 1 << self.coord_bits

    def encode(self, x_m: float, y_m: float) -> tuple[int, int]:
        pt = (round(x_m) + self.offset, round(y_m) + self.offset)
        self.check(pt)
        return pt

    def check(self, pt: tuple[int, int]) -> None:
        if not (0 <= pt[0] < self.limit and 0 <= pt[1] < self.limit):
            raise CoordinateOverflow(f"{pt} outside [0, 2**{self.coord_bits})")


@dataclass(frozen=True)
class DiameterPair:
    p1: tuple[int, int]
    p2: tuple[int, int]

    @property
    def anchor_doubled(self) -> tuple[int, int]:
        return (self.p1[0] + self.p2[0], self.p1[1] + self.p2[1])


def make_diameter_pair(anchor: tuple[int, int], radius_m: float,
                       direction: tuple[float, float],
                       codec: FixedPointCodec) -> DiameterPair:
    """Two opposite circle points. The offset is rounded once and applied
    with both signs, so p1 + p2 == 2 * anchor holds exactly."""
    norm = math.hypot(*direction)
    if norm == 0:
        raise ValueError("direction must be non-zero")
    ox = round(radius_m * direction[0] / norm)
    oy = round(radius_m * direction[1] / norm)
    p1 = (anchor[0] - ox, anchor[1] - oy)
    p2 = (anchor[0] + ox, anchor[1] + oy)
    codec.check(p1)
    codec.check(p2)
    return DiameterPair(p1=p1, p2=p2)


# -- the blinded protocol --------------------------------------------------------

class AnchorSecrets:
    """Single-use blinding values. `encrypt_anchor` consumes them; a second
    encryption with the same object raises."""

    def __init__(self, s: int, noise: Sequence[int]) -> None:
        if len(noise) != 7:
            raise ValueError("need exactly 7 noise values")
        self.s = s
        self.noise = tuple(int(n) for n in noise)
        self._used = False

    def consume(self) -> None:
        if self._used:
            raise SecretsConsumed("anchor secrets already used once")
        self._used = True


def gen_secrets(params: FineGrainParams, rng=None) -> AnchorSecrets:
    rng = rng if rng is not None else _secrets.SystemRandom()
    s = rng.randrange(1 << (params.k1 // 2), params.p)
    noise = [rng.getrandbits(params.k3) for _ in range(7)]
    return AnchorSecrets(s=s, noise=noise)


@dataclass(frozen=True)
class EncryptedAnchor:
    en: tuple[int, int, int, int, int, int, int]


def encrypt_anchor(params: FineGrainParams, anchor_secrets: AnchorSecrets,
                   pair: DiameterPair) -> EncryptedAnchor:
    anchor_secrets.consume()
    p, alpha = params.p, params.alpha
    s = anchor_secrets.s
    a = anchor_secrets.noise
    (x1, y1), (x2, y2) = pair.p1, pair.p2
    en = (
        s * (x1 * alpha + a[0]) % p,
        s * (y1 * alpha + a[1]) % p,
        s * (x2 * alpha + a[2]) % p,
        s * (y2 * alpha + a[3]) % p,
        s * (x1 * x2 * alpha + a[4]) % p,
        s * (y1 * y2 * alpha + a[5]) % p,
        s * (alpha + a[6]) % p,
    )
    if (en[0] + en[2]) % p == 0 or (en[1] + en[3]) % p == 0 or en[6] == 0:
        raise SanityCheckFailed("degenerate anchor component; redraw secrets")
    return EncryptedAnchor(en=en)


@dataclass(frozen=True)
class UserResponse:
    a1: int
    a2: int


def respond(params: FineGrainParams, anchor: EncryptedAnchor,
            user: tuple[int, int], rng=None, blind: Optional[int] = None) -> UserResponse:
    """Fold the user position into the anchor. `blind` pins the multiplier r
    for unit tests; normally a fresh k4-bit value is drawn."""
    xu, yu = user
    limit = 1 << params.coord_bits
    if not (0 <= xu < limit and 0 <= yu < limit):
        raise CoordinateOverflow(f"user point {user} outside [0, 2**{params.coord_bits})")
    if blind is None:
        rng = rng if rng is not None else _secrets.SystemRandom()
        blind = 0
        while blind == 0:
            blind = rng.getrandbits(params.k4)
    if not 1 <= blind < (1 << params.k4):
        raise ValueError("blind outside its width")
    p, alpha = params.p, params.alpha
    en = anchor.en
    a1 = blind * alpha * (xu * (en[0] + en[2]) + yu * (en[1] + en[3])) % p
    a2 = blind * alpha * (en[4] + en[5] + (xu * xu + yu * yu) * en[6]) % p
    return UserResponse(a1=a1, a2=a2)


class Decision(Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"


def decision_quantity(params: FineGrainParams, anchor_secrets: AnchorSecrets,
                      response: UserResponse) -> int:
    """Strip the patient blinding and the sub-alpha^2 noise; what remains is
    r * ((u - p1) . (u - p2)), exact over the integers."""
    p, alpha = params.p, params.alpha
    k1, k2, k3, k4, b = params.k1, params.k2, params.k3, params.k4, params.coord_bits
    sinv = pow(anchor_secrets.s, -1, p)
    b1 = sinv * response.a1 % p
    b2 = sinv * response.a2 % p
    bound1 = (1 << (k4 + 2 * k2 + 2 * b + 2)) + (1 << (k4 + k2 + b + k3 + 2))
    bound2 = (1 << (k4 + 2 * k2 + 2 * b + 2)) + (1 << (k4 + k2 + 2 * b + 1 + k3))
    if b1 >= bound1 or b2 >= bound2:
        raise NoiseOverflow("decrypted response beyond guaranteed bound; "
                            "parameters are inconsistent")
    asq = alpha * alpha
    c1 = (b1 - (b1 % asq)) // asq
    c2 = (b2 - (b2 % asq)) // asq
    return c2 - c1


def decide(params: FineGrainParams, anchor_secrets: AnchorSecrets,
           response: UserResponse) -> Decision:
    return Decision.INSIDE if decision_quantity(params, anchor_secrets, response) < 0 \
        else Decision.OUTSIDE


# -- signed announcements ---------------------------------------------------------

@dataclass(frozen=True)
class SignedAnnouncement:
    p: int
    alpha: int
    anchor: EncryptedAnchor
    timestamp: int
    session_id: bytes
    signature: bytes


def _lp(value: int) -> bytes:
    blob = value.to_bytes((value.bit_length() + 7) // 8 or 1, "big")
    return len(blob).to_bytes(2, "big") + blob


def announcement_bytes(p: int, alpha: int, anchor: EncryptedAnchor,
                       timestamp: int, session_id: bytes) -> bytes:
    """Canonical signing form: p, alpha, the seven components (each
    length-prefixed big-endian), 8-byte timestamp, 16-byte session id."""
    if len(session_id) != 16:
        raise ValueError("session id must be 16 bytes")
    body = _lp(p) + _lp(alpha)
    for component in anchor.en:
        body += _lp(component)
    return body + timestamp.to_bytes(8, "big") + session_id


def make_announcement(params: FineGrainParams, anchor: EncryptedAnchor,
                      timestamp: int, session_id: bytes, suite,
                      signing_key) -> SignedAnnouncement:
    blob = announcement_bytes(params.p, params.alpha, anchor, timestamp, session_id)
    return SignedAnnouncement(p=params.p, alpha=params.alpha, anchor=anchor,
                              timestamp=timestamp, session_id=session_id,
                              signature=suite.sign(signing_key, blob))


def verify_announcement(ann: SignedAnnouncement, public_key: bytes, suite,
                        now: int, max_age: int = 3600, skew: int = 900) -> bool:
    """Signature valid over the canonical bytes, timestamp no older than one
    epoch (and not from the future beyond clock skew), components
    non-degenerate."""
    en = ann.anchor.en
    if en[6] == 0 or (en[0] + en[2]) % ann.p == 0 or (en[1] + en[3]) % ann.p == 0:
        return False
    if ann.timestamp > now + skew or now - ann.timestamp > max_age:
        return False
    blob = announcement_bytes(ann.p, ann.alpha, ann.anchor, ann.timestamp,
                              ann.session_id)
    return suite.verify(public_key, blob, ann.signature)


# -- signature suites and the session channel -------------------------------------

class Ed25519Suite:
    """Fast conforming scheme: Ed25519 signatures, X25519 key agreement."""
    name = "ed25519"

    @staticmethod
    def keygen(rng=None) -> tuple[bytes, bytes]:
        raw = rng.randbytes(32) if rng is not None else _secrets.token_bytes(32)
        sk = Ed25519PrivateKey.from_private_bytes(raw)
        return raw, sk.public_key().public_bytes_raw()

    @staticmethod
    def sign(secret: bytes, message: bytes) -> bytes:
        return Ed25519PrivateKey.from_private_bytes(secret).sign(message)

    @staticmethod
    def verify(public: bytes, message: bytes, signature: bytes) -> bool:
        try:
            Ed25519PublicKey.from_public_bytes(public).verify(signature, message)
            return True
        except (InvalidSignature, ValueError):
            return False

    @staticmethod
    def dh_keygen(rng=None) -> tuple[bytes, bytes]:
        raw = rng.randbytes(32) if rng is not None else _secrets.token_bytes(32)
        sk = X25519PrivateKey.from_private_bytes(raw)
        return raw, sk.public_key().public_bytes_raw()

    @staticmethod
    def dh_shared(secret: bytes, peer_public: bytes) -> bytes:
        sk = X25519PrivateKey.from_private_bytes(secret)
        return sk.exchange(X25519PublicKey.from_public_bytes(peer_public))


class PairingSuite:
    """Reference scheme: hash-to-group exponent signature checked with a
    bilinear pairing; Diffie-Hellman runs in the same group."""
    name = "pairing"

    @staticmethod
    def keygen(rng=None) -> tuple[int, bytes]:
        rng = rng if rng is not None else _secrets.SystemRandom()
        kp = pairing.keygen(rng)
        return kp.secret, pairing.point_to_bytes(kp.public)

    @staticmethod
    def sign(secret: int, message: bytes) -> bytes:
        return pairing.point_to_bytes(pairing.sign(secret, message))

    @staticmethod
    def verify(public: bytes, message: bytes, signature: bytes) -> bool:
        try:
            pk = pairing.point_from_bytes(public)
            sig = pairing.point_from_bytes(signature)
        except ValueError:
            return False
        return pairing.verify(pk, message, sig)

    @staticmethod
    def dh_keygen(rng=None) -> tuple[int, bytes]:
        rng = rng if rng is not None else _secrets.SystemRandom()
        e = rng.randrange(1, pairing.R)
        return e, pairing.point_to_bytes(pairing.mul(e, pairing.G))

    @staticmethod
    def dh_shared(secret: int, peer_public: bytes) -> bytes:
        shared = pairing.mul(secret, pairing.point_from_bytes(peer_public))
        return pairing.point_to_bytes(shared)


ED25519_SUITE = Ed25519Suite()
PAIRING_SUITE = PairingSuite()


def session_key(shared: bytes, session_id: bytes) -> bytes:
    return hashlib.sha256(b"coavoid-session-v1" + shared + session_id).digest()


def derive_session_id(record_line: str) -> bytes:
    """Both ends of a coarse match derive the same 16-byte session id from
    the matched record line."""
    return hashlib.sha256(b"SID:" + record_line.encode("utf-8")).digest()[:16]


class SessionChannel:
    """Authenticated byte pipe for one verification session. Nonces encode
    direction and a per-direction counter, so either role can seal or open."""

    def __init__(self, key: bytes, role: str) -> None:
        if role not in ("patient", "user"):
            raise ValueError("role must be patient or user")
        self._aead = ChaCha20Poly1305(key)
        self._role = role
        self._send_seq = 0
        self._recv_seq = 0

    def _nonce(self, direction: int, seq: int) -> bytes:
        return bytes([direction]) + seq.to_bytes(11, "big")

    def seal(self, plaintext: bytes) -> bytes:
        direction = 0 if self._role == "patient" else 1
        nonce = self._nonce(direction, self._send_seq)
        self._send_seq += 1
        return self._aead.encrypt(nonce, plaintext, None)

    def open(self, ciphertext: bytes) -> bytes:
        direction = 1 if self._role == "patient" else 0
        nonce = self._nonce(direction, self._recv_seq)
        out = self._aead.decrypt(nonce, ciphertext, None)   # InvalidTag on tamper
        self._recv_seq += 1
        return out


# -- coarse screening ---------------------------------------------------------------

@dataclass(frozen=True)
class CoarseHit:
    record: StoredRecord
    evidence: tuple[ExchangeRecord, ...]


@dataclass(frozen=True)
class WormholeSuspect:
    record: StoredRecord
    evidence: tuple[ExchangeRecord, ...]


@dataclass(frozen=True)
class ReplaySuspect:
    record: StoredRecord
    evidence: tuple[ExchangeRecord, ...]


@dataclass(frozen=True)
class CoarseResult:
    hits: tuple[CoarseHit, ...]
    wormhole_suspects: tuple[WormholeSuspect, ...]
    replay_suspects: tuple[ReplaySuspect, ...]


def coarse_match(exchanges: Sequence[ExchangeRecord],
                 downloaded: Sequence[StoredRecord],
                 log: Optional["VerificationLog"] = None) -> CoarseResult:
    """Screen heard exchanges against published patient records.

    A hit needs the identifier AND the hidden location to agree AND the
    hearing time to sit in the record's broadcast interval (one interval of
    skew allowed). Identifier-only agreement marks a wormhole suspect;
    identifier+location with a stale time marks a replay suspect.
    """
    by_rpi: dict[bytes, list[ExchangeRecord]] = {}
    for ex in exchanges:
        by_rpi.setdefault(ex.rpi, []).append(ex)
    hits: list[CoarseHit] = []
    wormholes: list[WormholeSuspect] = []
    replays: list[ReplaySuspect] = []
    for rec in downloaded:
        heard = by_rpi.get(rec.rpi)
        if not heard:
            continue
        day, interval = rec.coarse_time
        same_cell = [ex for ex in heard if ex.cell_digest.digest == rec.cell_digest]
        other_cell = [ex for ex in heard if ex.cell_digest.digest != rec.cell_digest]
        if other_cell:
            wormholes.append(WormholeSuspect(record=rec, evidence=tuple(other_cell)))
            if log is not None:
                for ex in other_cell:
                    log.coarse(rec, ex, "Wormhole Attack")
        if same_cell:
            valid = [ex for ex in same_cell
                     if interval_of(ex.timestamp)[0] == day
                     and validate_timestamp(ex, interval)]
            stale = [ex for ex in same_cell if ex not in valid]
            if log is not None:
                for ex in same_cell:
                    log.coarse(rec, ex, "Correct")
            if stale:
                replays.append(ReplaySuspect(record=rec, evidence=tuple(stale)))
            if valid:
                hits.append(CoarseHit(record=rec, evidence=tuple(valid)))
    return CoarseResult(hits=tuple(hits), wormhole_suspects=tuple(wormholes),
                        replay_suspects=tuple(replays))


class VerificationLog:
    """Collects verification trace lines in the device-log console format."""

    def __init__(self) -> None:
        self.lines: list[str] = []

    def coarse(self, record: StoredRecord, exchange: ExchangeRecord,
               verdict: str) -> None:
        p_hex = record.rpi.hex() + record.cell_digest.hex()
        u_hex = exchange.rpi.hex() + exchange.cell_digest.digest.hex()
        self.lines.append(f"Location Verification[1]: [INFO] [P] {p_hex} "
                          f"[U] {u_hex} [{verdict}]")

    def final(self, quantity: int, verdict: str) -> None:
        self.lines.append(f"Location Verification[2]: [INFO] [Final] "
                          f"{float(quantity)!r} [{verdict}]")
