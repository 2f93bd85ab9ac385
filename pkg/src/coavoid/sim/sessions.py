"""End-to-end fine verification sessions over the store relay.

Both sides speak only through mailboxes on the `ObfuscatedStore` keyed by a
session id that each derives independently from the matched record line.
The patient never learns the user position; the user learns one bit (plus
the blinded decision value the patient chooses to disclose).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from ..edgeserver import (PATIENT_TO_USER, USER_TO_PATIENT, ObfuscatedStore,
                          RelayEnvelope, StoredRecord)
from ..errors import ConstraintViolation, NoiseOverflow
from ..filtering import RecombinedRecord, to_upload_lines
from ..finematch import (Decision, EncryptedAnchor, FineGrainParams,
                         FixedPointCodec, SessionChannel, SignedAnnouncement,
                         UserResponse, VerificationLog, check_constraints,
                         decision_quantity, derive_session_id, encrypt_anchor,
                         gen_secrets, make_announcement, make_diameter_pair,
                         respond, session_key, verify_announcement)
from ..geocell import CellDigest


@dataclass
class PatientSession:
    """Patient-side state needed to answer verification requests."""
    params: FineGrainParams
    suite: object
    sign_sk: object
    sign_pk: bytes
    positions: dict            # (day, interval) -> fixed-point (x, y)
    codec: FixedPointCodec
    contact_radius_m: float
    rng: object
    log: Optional[VerificationLog] = None


@dataclass
class UserSession:
    """User-side state: own position and what announcements to trust."""
    suite: object
    position: tuple[int, int]
    sizes: tuple[int, int, int, int, int]    # k1, k2, k3, k4, coord bits
    authority_keys: set[bytes] = field(default_factory=set)
    rng: object = None


@dataclass(frozen=True)
class SessionOutcome:
    verdict: str               # "inside", "outside", or "rejected"
    quantity: Optional[int]


def record_line(record: StoredRecord) -> str:
    rec = RecombinedRecord(rpi=record.rpi,
                           cell_digest=CellDigest(record.cell_digest),
                           coarse_time=record.coarse_time,
                           multiplicity=record.multiplicity)
    return to_upload_lines([rec])[0]


def _frame(public: bytes, sealed: bytes) -> bytes:
    return len(public).to_bytes(2, "big") + public + sealed


def _unframe(blob: bytes) -> tuple[bytes, bytes]:
    n = int.from_bytes(blob[:2], "big")
    return blob[2:2 + n], blob[2 + n:]


def run_fine_session(store: ObfuscatedStore, record: StoredRecord,
                     patient: PatientSession, user: UserSession,
                     now_ts: int) -> SessionOutcome:
    """Drive one complete session for a coarse-matched record.

    This helper plays both roles in sequence for simulation; every byte
    between them still travels through the relay mailboxes.
    """
    line = record_line(record)
    sid = derive_session_id(line)
    sid_hex = sid.hex()
    store.register_session(sid_hex)

    # user opens with an ephemeral agreement key
    u_sk, u_pk = user.suite.dh_keygen(user.rng)
    store.relay(RelayEnvelope(sid_hex, USER_TO_PATIENT, u_pk))

    # patient answers with its own ephemeral key and a sealed announcement
    (u_pk_seen,) = store.fetch(sid_hex, USER_TO_PATIENT)
    p_sk, p_pk = patient.suite.dh_keygen(patient.rng)
    chan_p = SessionChannel(
        session_key(patient.suite.dh_shared(p_sk, u_pk_seen), sid), "patient")
    day, interval = record.coarse_time
    anchor = patient.positions[(day, interval)]
    pair = make_diameter_pair(anchor, patient.contact_radius_m, (1.0, 0.0),
                              patient.codec)
    secrets = gen_secrets(patient.params, patient.rng)
    enc = encrypt_anchor(patient.params, secrets, pair)
    ann = make_announcement(patient.params, enc, now_ts, sid, patient.suite,
                            patient.sign_sk)
    body = json.dumps({
        "p": str(ann.p), "alpha": str(ann.alpha),
        "en": [str(x) for x in enc.en],
        "ts": ann.timestamp, "sid": sid_hex,
        "sig": ann.signature.hex(), "pk": patient.sign_pk.hex(),
    }).encode("utf-8")
    store.relay(RelayEnvelope(sid_hex, PATIENT_TO_USER,
                              _frame(p_pk, chan_p.seal(body))))

    # user checks the announcement, then folds in its position blinded
    (blob,) = store.fetch(sid_hex, PATIENT_TO_USER)
    p_pk_seen, sealed = _unframe(blob)
    chan_u = SessionChannel(
        session_key(user.suite.dh_shared(u_sk, p_pk_seen), sid), "user")
    msg = json.loads(chan_u.open(sealed))
    claimed_pk = bytes.fromhex(msg["pk"])
    ann_seen = SignedAnnouncement(
        p=int(msg["p"]), alpha=int(msg["alpha"]),
        anchor=EncryptedAnchor(en=tuple(int(x) for x in msg["en"])),
        timestamp=int(msg["ts"]), session_id=bytes.fromhex(msg["sid"]),
        signature=bytes.fromhex(msg["sig"]))
    k1, k2, k3, k4, cbits = user.sizes
    accept = (claimed_pk in user.authority_keys
              and ann_seen.session_id == sid
              and ann_seen.p.bit_length() == k1
              and ann_seen.alpha.bit_length() == k2)
    if accept:
        try:
            check_constraints(k1, k2, k3, k4, cbits)
        except ConstraintViolation:
            accept = False
    if accept and not verify_announcement(ann_seen, claimed_pk, user.suite,
                                          now=now_ts):
        accept = False
    if not accept:
        return SessionOutcome(verdict="rejected", quantity=None)
    params_seen = FineGrainParams(k1=k1, k2=k2, k3=k3, k4=k4,
                                  coord_bits=cbits, p=ann_seen.p,
                                  alpha=ann_seen.alpha)
    resp = respond(params_seen, ann_seen.anchor, user.position, rng=user.rng)
    store.relay(RelayEnvelope(
        sid_hex, USER_TO_PATIENT,
        chan_u.seal(json.dumps({"a1": str(resp.a1),
                                "a2": str(resp.a2)}).encode("utf-8"))))

    # patient strips the blinding and announces the verdict
    (sealed2,) = store.fetch(sid_hex, USER_TO_PATIENT)
    reply = json.loads(chan_p.open(sealed2))
    response = UserResponse(a1=int(reply["a1"]), a2=int(reply["a2"]))
    try:
        quantity = decision_quantity(patient.params, secrets, response)
    except NoiseOverflow:
        return SessionOutcome(verdict="rejected", quantity=None)
    verdict = Decision.INSIDE if quantity < 0 else Decision.OUTSIDE
    if patient.log is not None:
        patient.log.final(quantity,
                          "Correct" if verdict is Decision.INSIDE
                          else "Wormhole Attack")
    store.relay(RelayEnvelope(
        sid_hex, PATIENT_TO_USER,
        chan_p.seal(json.dumps({"verdict": verdict.value,
                                "q": str(quantity)}).encode("utf-8"))))

    # user reads the verdict
    (sealed3,) = store.fetch(sid_hex, PATIENT_TO_USER)
    final = json.loads(chan_u.open(sealed3))
    return SessionOutcome(verdict=final["verdict"], quantity=int(final["q"]))
