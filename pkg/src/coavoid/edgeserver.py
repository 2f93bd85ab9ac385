"""Untrusted edge server: obfuscated record store plus blind relay.

The store holds patient upload records with no patient column and no
upload-batch boundary: on every publication the entire live set is
re-ordered by fresh random sequence keys which are immediately discarded,
so adjacency in the published order carries no grouping signal. Records
expire out of the store after the retention window.

The relay forwards opaque payloads between the two ends of a verification
session and keeps nothing after delivery.

Wire protocol: length-prefixed (4-byte big-endian) UTF-8 JSON messages over
TCP. Requests: UPLOAD, DOWNLOAD, RELAY, plus REGISTER/FETCH (session
mailboxes) and PUBLISH (epoch roll, also driven by the --epoch-seconds
timer when serving).
"""

from __future__ import annotations

import base64
import json
import secrets
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass, fields
from typing import Iterable, Sequence

from .errors import EpochFromFuture, MalformedPayload, UnknownSession
from .filtering import RecombinedRecord, parse_upload_lines, to_upload_lines
from .geocell import CellDigest
from .keysched import RETENTION_DAYS

DEFAULT_PORT = 7340
PATIENT_TO_USER = "patient_to_user"
USER_TO_PATIENT = "user_to_patient"
_DIRECTIONS = (PATIENT_TO_USER, USER_TO_PATIENT)


@dataclass(frozen=True)
class StoredRecord:
    rpi: bytes
    cell_digest: bytes
    coarse_time: tuple[int, int]
    multiplicity: int
    epoch: int


@dataclass(frozen=True)
class UploadReceipt:
    count: int


@dataclass(frozen=True)
class RelayEnvelope:
    session_id: str
    direction: str
    payload: bytes


class ObfuscatedStore:
    """In-memory published-record store with full-set re-shuffle per epoch."""

    def __init__(self, retention_days: int = RETENTION_DAYS, rng=None) -> None:
        self.retention_days = int(retention_days)
        self._rng = rng
        self._lock = threading.Lock()
        self._pending: list[RecombinedRecord] = []
        self._records: list[StoredRecord] = []
        self._epoch = 0
        self._sessions: dict[str, dict[str, list[bytes]]] = {}

    def _seq_key(self) -> bytes:
        if self._rng is not None:
            return self._rng.randbytes(16)
        return secrets.token_bytes(16)

    @property
    def epoch(self) -> int:
        return self._epoch

    def accept_upload(self, records: Sequence[RecombinedRecord] | Sequence[str]) -> UploadReceipt:
        if not records:
            raise MalformedPayload("empty upload")
        if isinstance(records[0], str):
            records = parse_upload_lines(records)  # raises MalformedPayload
        for rec in records:
            if not isinstance(rec, RecombinedRecord):
                raise MalformedPayload(f"not a record: {rec!r}")
        with self._lock:
            self._pending.extend(records)
        return UploadReceipt(count=len(records))

    def publish(self, now_day: int | None = None) -> int:
        """Roll the epoch: merge pending uploads into the live set, drop
        expired records, re-shuffle everything by fresh sequence keys and
        discard the keys."""
        with self._lock:
            self._epoch += 1
            live = self._records + [
                StoredRecord(rpi=r.rpi, cell_digest=r.cell_digest.digest,
                             coarse_time=r.coarse_time,
                             multiplicity=r.multiplicity, epoch=self._epoch)
                for r in self._pending
            ]
            self._pending = []
            if now_day is None and live:
                now_day = max(r.coarse_time[0] for r in live)
            if now_day is not None:
                floor = now_day - (self.retention_days - 1)
                live = [r for r in live if r.coarse_time[0] >= floor]
            keyed = [(self._seq_key(), r) for r in live]
            keyed.sort(key=lambda t: t[0])
            self._records = [r for _, r in keyed]   # keys dropped here
            return self._epoch

    def download(self, since_epoch: int) -> list[StoredRecord]:
        with self._lock:
            if since_epoch > self._epoch:
                raise EpochFromFuture(f"since_epoch {since_epoch} beyond "
                                      f"current epoch {self._epoch}")
            return [r for r in self._records if r.epoch > since_epoch]

    def records(self) -> tuple[StoredRecord, ...]:
        with self._lock:
            return tuple(self._records)

    # -- relay ---------------------------------------------------------------

    def register_session(self, session_id: str) -> None:
        with self._lock:
            self._sessions.setdefault(session_id, {d: [] for d in _DIRECTIONS})

    def relay(self, envelope: RelayEnvelope) -> int:
        if envelope.direction not in _DIRECTIONS:
            raise MalformedPayload(f"unknown direction {envelope.direction!r}")
        with self._lock:
            box = self._sessions.get(envelope.session_id)
            if box is None:
                raise UnknownSession(envelope.session_id)
            box[envelope.direction].append(bytes(envelope.payload))
            return 1

    def fetch(self, session_id: str, direction: str) -> list[bytes]:
        """Drain a session mailbox; the server keeps no copy."""
        if direction not in _DIRECTIONS:
            raise MalformedPayload(f"unknown direction {direction!r}")
        with self._lock:
            box = self._sessions.get(session_id)
            if box is None:
                raise UnknownSession(session_id)
            out, box[direction] = box[direction], []
            return out


assert [f.name for f in fields(StoredRecord)] == [
    "rpi", "cell_digest", "coarse_time", "multiplicity", "epoch"]


# -- wire framing -------------------------------------------------------------

def send_msg(sock: socket.socket, obj: dict) -> None:
    blob = json.dumps(obj).encode("utf-8")
    sock.sendall(struct.pack(">I", len(blob)) + blob)


def _recvall(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


def recv_msg(sock: socket.socket) -> dict | None:
    header = _recvall(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    blob = _recvall(sock, length)
    if blob is None:
        return None
    return json.loads(blob.decode("utf-8"))


def _record_lines(records: Iterable[StoredRecord]) -> list[str]:
    return to_upload_lines(
        RecombinedRecord(rpi=r.rpi, cell_digest=CellDigest(r.cell_digest),
                         coarse_time=r.coarse_time, multiplicity=r.multiplicity)
        for r in records)


class _Handler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        store: ObfuscatedStore = self.server.store  # type: ignore[attr-defined]
        while True:
            try:
                msg = recv_msg(self.request)
            except (ConnectionError, json.JSONDecodeError, struct.error):
                return
            if msg is None:
                return
            try:
                send_msg(self.request, self._dispatch(store, msg))
            except ConnectionError:
                return

    @staticmethod
    def _dispatch(store: ObfuscatedStore, msg: dict) -> dict:
        try:
            kind = msg.get("type")
            if kind == "UPLOAD":
                receipt = store.accept_upload(msg["records"])
                return {"type": "RECEIPT", "count": receipt.count}
            if kind == "DOWNLOAD":
                recs = store.download(int(msg["since_epoch"]))
                return {"type": "RECORDS", "epoch": store.epoch,
                        "records": _record_lines(recs)}
            if kind == "RELAY":
                env = RelayEnvelope(session_id=msg["session"],
                                    direction=msg["direction"],
                                    payload=base64.b64decode(msg["payload_b64"]))
                return {"type": "DELIVERED", "count": store.relay(env)}
            if kind == "REGISTER":
                store.register_session(msg["session"])
                return {"type": "REGISTERED"}
            if kind == "FETCH":
                payloads = store.fetch(msg["session"], msg["direction"])
                return {"type": "PAYLOADS",
                        "payloads_b64": [base64.b64encode(p).decode() for p in payloads]}
            if kind == "PUBLISH":
                return {"type": "EPOCH", "epoch": store.publish()}
            return {"type": "ERROR", "error": f"unknown type {kind!r}"}
        except (MalformedPayload, EpochFromFuture, UnknownSession, KeyError,
                ValueError) as exc:
            return {"type": "ERROR", "error": f"{type(exc).__name__}: {exc}"}


class EdgeServer:
    """Threaded TCP front end over one ObfuscatedStore."""

    def __init__(self, port: int = DEFAULT_PORT, epoch_seconds: float = 3600,
                 retention_days: int = RETENTION_DAYS, host: str = "127.0.0.1") -> None:
        self.store = ObfuscatedStore(retention_days=retention_days)
        self.epoch_seconds = epoch_seconds
        self._tcp = socketserver.ThreadingTCPServer((host, port), _Handler,
                                                    bind_and_activate=False)
        self._tcp.allow_reuse_address = True
        self._tcp.daemon_threads = True
        self._tcp.store = self.store  # type: ignore[attr-defined]
        self._tcp.server_bind()
        self._tcp.server_activate()
        self._timer_stop = threading.Event()
        self._threads: list[threading.Thread] = []

    @property
    def address(self) -> tuple[str, int]:
        return self._tcp.server_address  # type: ignore[return-value]

    def _timer(self) -> None:
        while not self._timer_stop.wait(self.epoch_seconds):
            self.store.publish()

    def start(self) -> None:
        t = threading.Thread(target=self._tcp.serve_forever, daemon=True)
        t.start()
        self._threads.append(t)
        if self.epoch_seconds and self.epoch_seconds > 0:
            timer = threading.Thread(target=self._timer, daemon=True)
            timer.start()
            self._threads.append(timer)

    def shutdown(self) -> None:
        self._timer_stop.set()
        self._tcp.shutdown()
        self._tcp.server_close()

    def serve_forever(self) -> None:
        if self.epoch_seconds and self.epoch_seconds > 0:
            timer = threading.Thread(target=self._timer, daemon=True)
            timer.start()
        self._tcp.serve_forever()
