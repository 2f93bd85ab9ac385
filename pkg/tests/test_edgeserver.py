"""Obfuscated store and relay: schema, shuffling, expiry, wire protocol."""

import base64
import random
import socket
from dataclasses import fields

import pytest

from coavoid.edgeserver import (
    PATIENT_TO_USER,
    USER_TO_PATIENT,
    EdgeServer,
    ObfuscatedStore,
    RelayEnvelope,
    StoredRecord,
    recv_msg,
    send_msg,
)
from coavoid.errors import EpochFromFuture, MalformedPayload, UnknownSession
from coavoid.filtering import RecombinedRecord
from coavoid.geocell import CellDigest

DAY = 18483


def make_records(n, day=DAY, seed=0, tag=0):
    rng = random.Random(seed)
    return [
        RecombinedRecord(rpi=bytes([tag]) + rng.randbytes(15),
                         cell_digest=CellDigest(rng.randbytes(32)),
                         coarse_time=(day, 1 + i % 96),
                         multiplicity=1 + i % 3)
        for i in range(n)
    ]


class TestStore:
    def test_stored_record_schema(self):
        names = [f.name for f in fields(StoredRecord)]
        assert names == ["rpi", "cell_digest", "coarse_time", "multiplicity", "epoch"]
        # no patient, upload-batch, or order column

    def test_upload_publish_download(self):
        store = ObfuscatedStore(rng=random.Random(1))
        recs = make_records(10)
        receipt = store.accept_upload(recs)
        assert receipt.count == 10
        assert store.download(0) == []          # nothing until publish
        epoch = store.publish(now_day=DAY)
        assert epoch == 1
        got = store.download(0)
        assert len(got) == 10
        assert {(r.rpi, r.cell_digest, r.coarse_time, r.multiplicity) for r in got} \
            == {(r.rpi, r.cell_digest.digest, r.coarse_time, r.multiplicity) for r in recs}

    def test_upload_accepts_text_lines(self):
        from coavoid.filtering import to_upload_lines
        store = ObfuscatedStore(rng=random.Random(2))
        recs = make_records(4)
        store.accept_upload(to_upload_lines(recs))
        store.publish(now_day=DAY)
        assert len(store.records()) == 4

    def test_empty_and_malformed_uploads_rejected(self):
        store = ObfuscatedStore()
        with pytest.raises(MalformedPayload):
            store.accept_upload([])
        with pytest.raises(MalformedPayload):
            store.accept_upload(["not a record line"])
        with pytest.raises(MalformedPayload):
            store.accept_upload([object()])

    def test_incremental_download_by_epoch(self):
        store = ObfuscatedStore(rng=random.Random(3))
        store.accept_upload(make_records(3, seed=1, tag=1))
        store.publish(now_day=DAY)
        store.accept_upload(make_records(2, seed=2, tag=2))
        store.publish(now_day=DAY)
        assert len(store.download(0)) == 5
        fresh = store.download(1)
        assert len(fresh) == 2
        assert all(r.rpi[0] == 2 for r in fresh)
        with pytest.raises(EpochFromFuture):
            store.download(99)

    def test_retention_expiry(self):
        store = ObfuscatedStore(retention_days=14, rng=random.Random(4))
        store.accept_upload(make_records(5, day=DAY, seed=1))
        store.accept_upload(make_records(5, day=DAY + 20, seed=2))
        store.publish(now_day=DAY + 20)
        kept = store.records()
        assert len(kept) == 5
        assert all(r.coarse_time[0] == DAY + 20 for r in kept)
        # day exactly on the floor survives
        store2 = ObfuscatedStore(retention_days=14, rng=random.Random(5))
        store2.accept_upload(make_records(1, day=DAY))
        store2.publish(now_day=DAY + 13)
        assert len(store2.records()) == 1


class TestObfuscation:
    def test_multiset_preserved_across_publishes(self):
        store = ObfuscatedStore(rng=random.Random(6))
        recs = make_records(50, seed=3)
        store.accept_upload(recs)
        store.publish(now_day=DAY)
        before = sorted((r.rpi, r.coarse_time) for r in store.records())
        for _ in range(5):
            store.publish(now_day=DAY)
        after = sorted((r.rpi, r.coarse_time) for r in store.records())
        assert before == after

    def test_order_reshuffled_every_publish(self):
        store = ObfuscatedStore(rng=random.Random(7))
        store.accept_upload(make_records(40, seed=4))
        store.publish(now_day=DAY)
        orders = set()
        for _ in range(6):
            store.publish(now_day=DAY)
            orders.add(tuple(r.rpi for r in store.records()))
        assert len(orders) == 6

    def test_two_batch_adjacency_matches_random_interleaving(self):
        # two uploads of 25 records each; if the shuffle really forgets batch
        # boundaries, same-batch adjacencies among 49 adjacent pairs follow the
        # two-type runs law: mean 24, per-trial sd ~3.5
        trials = 400
        total = 0.0
        for t in range(trials):
            store = ObfuscatedStore(rng=random.Random(1000 + t))
            store.accept_upload(make_records(25, seed=10 + t, tag=1))
            store.accept_upload(make_records(25, seed=20 + t, tag=2))
            store.publish(now_day=DAY)
            order = [r.rpi[0] for r in store.records()]
            total += sum(1 for a, b in zip(order, order[1:]) if a == b)
        mean = total / trials
        expected = 24.0          # 49 pairs * (24/49) same-batch probability
        sd_of_mean = 3.5 / trials ** 0.5
        assert abs(mean - expected) < 4 * sd_of_mean

    def test_no_sequence_keys_survive(self):
        store = ObfuscatedStore(rng=random.Random(9))
        store.accept_upload(make_records(5, seed=5))
        store.publish(now_day=DAY)
        for rec in store.records():
            assert set(f.name for f in fields(rec)) == {
                "rpi", "cell_digest", "coarse_time", "multiplicity", "epoch"}


class TestRelay:
    def test_roundtrip_and_drain(self):
        store = ObfuscatedStore()
        store.register_session("s1")
        store.relay(RelayEnvelope("s1", PATIENT_TO_USER, b"hello"))
        store.relay(RelayEnvelope("s1", PATIENT_TO_USER, b"again"))
        assert store.fetch("s1", PATIENT_TO_USER) == [b"hello", b"again"]
        assert store.fetch("s1", PATIENT_TO_USER) == []   # drained

    def test_directions_independent(self):
        store = ObfuscatedStore()
        store.register_session("s2")
        store.relay(RelayEnvelope("s2", USER_TO_PATIENT, b"up"))
        assert store.fetch("s2", PATIENT_TO_USER) == []
        assert store.fetch("s2", USER_TO_PATIENT) == [b"up"]

    def test_unknown_session_and_direction(self):
        store = ObfuscatedStore()
        with pytest.raises(UnknownSession):
            store.relay(RelayEnvelope("nope", PATIENT_TO_USER, b"x"))
        with pytest.raises(UnknownSession):
            store.fetch("nope", PATIENT_TO_USER)
        store.register_session("s3")
        with pytest.raises(MalformedPayload):
            store.relay(RelayEnvelope("s3", "sideways", b"x"))


class TestTcpSurface:
    @pytest.fixture()
    def server(self):
        srv = EdgeServer(port=0, epoch_seconds=0)   # port 0: ephemeral
        srv.start()
        yield srv
        srv.shutdown()

    def ask(self, addr, msg):
        with socket.create_connection(addr, timeout=5) as sock:
            send_msg(sock, msg)
            return recv_msg(sock)

    def test_upload_publish_download_over_tcp(self, server):
        from coavoid.filtering import to_upload_lines
        lines = to_upload_lines(make_records(3, seed=6))
        reply = self.ask(server.address, {"type": "UPLOAD", "records": lines})
        assert reply == {"type": "RECEIPT", "count": 3}
        reply = self.ask(server.address, {"type": "PUBLISH"})
        assert reply == {"type": "EPOCH", "epoch": 1}
        reply = self.ask(server.address, {"type": "DOWNLOAD", "since_epoch": 0})
        assert reply["type"] == "RECORDS" and reply["epoch"] == 1
        assert sorted(reply["records"]) == sorted(lines)

    def test_relay_over_tcp(self, server):
        addr = server.address
        assert self.ask(addr, {"type": "REGISTER", "session": "tcp1"})["type"] == "REGISTERED"
        payload = base64.b64encode(b"opaque").decode()
        reply = self.ask(addr, {"type": "RELAY", "session": "tcp1",
                                "direction": USER_TO_PATIENT, "payload_b64": payload})
        assert reply == {"type": "DELIVERED", "count": 1}
        reply = self.ask(addr, {"type": "FETCH", "session": "tcp1",
                                "direction": USER_TO_PATIENT})
        assert reply["payloads_b64"] == [payload]

    def test_errors_reported_not_fatal(self, server):
        addr = server.address
        assert self.ask(addr, {"type": "NOPE"})["type"] == "ERROR"
        reply = self.ask(addr, {"type": "UPLOAD", "records": []})
        assert reply["type"] == "ERROR" and "MalformedPayload" in reply["error"]
        reply = self.ask(addr, {"type": "DOWNLOAD", "since_epoch": 5})
        assert reply["type"] == "ERROR" and "EpochFromFuture" in reply["error"]
        # connection still usable for a good request afterwards
        with socket.create_connection(addr, timeout=5) as sock:
            send_msg(sock, {"type": "NOPE"})
            assert recv_msg(sock)["type"] == "ERROR"
            send_msg(sock, {"type": "PUBLISH"})
            assert recv_msg(sock)["type"] == "EPOCH"
