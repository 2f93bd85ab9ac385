"""Patient-side upload preparation: recombination, privacy, dedup, wire form."""

import random

import pytest

from coavoid.devicelog import DeviceLog
from coavoid.errors import MalformedPayload, MissingBroadcast
from coavoid.filtering import (
    RecombinedRecord,
    dedupe_policy,
    filter_and_recombine,
    parse_upload_lines,
    to_upload_lines,
)
from coavoid.geocell import CellDigest

DAY = 18483
BASE = DAY * 86400

OWN_A = b"\x0a" * 16       # own identifier, interval 10
OWN_B = b"\x0b" * 16       # own identifier, interval 11
HEARD_X = b"\xee" * 16     # neighbour identifiers: must never be uploaded
HEARD_Y = b"\xff" * 16
CELL_1 = CellDigest(b"\x11" * 32)
CELL_2 = CellDigest(b"\x22" * 32)


def build_log():
    """Two intervals; interval 10 hears X twice in cell 1 and Y once in
    cell 2; interval 11 hears X once in cell 1."""
    log = DeviceLog()
    log.record_broadcast(BASE + 9 * 900, OWN_A)           # interval 10
    log.record_broadcast(BASE + 10 * 900, OWN_B)          # interval 11
    log.record_exchange(BASE + 9 * 900 + 0, HEARD_X, CELL_1, -50)
    log.record_exchange(BASE + 9 * 900 + 120, HEARD_X, CELL_1, -52)
    log.record_exchange(BASE + 9 * 900 + 240, HEARD_Y, CELL_2, -60)
    log.record_exchange(BASE + 10 * 900 + 60, HEARD_X, CELL_1, -55)
    return log


class TestRecombination:
    def test_hand_traced_fixture(self):
        log = build_log()
        out = filter_and_recombine(log.exchanges(), log.broadcasts())
        assert [(r.rpi, r.cell_digest, r.coarse_time) for r in out] == [
            (OWN_A, CELL_1, (DAY, 10)),
            (OWN_A, CELL_1, (DAY, 10)),
            (OWN_A, CELL_2, (DAY, 10)),
            (OWN_B, CELL_1, (DAY, 11)),
        ]
        assert all(r.multiplicity == 1 for r in out)

    def test_no_heard_identifier_in_output(self):
        log = build_log()
        out = filter_and_recombine(log.exchanges(), log.broadcasts())
        uploaded_rpis = {r.rpi for r in out}
        assert HEARD_X not in uploaded_rpis
        assert HEARD_Y not in uploaded_rpis
        # and not in the text form either
        text = "\n".join(to_upload_lines(out))
        assert HEARD_X.hex() not in text
        assert HEARD_Y.hex() not in text

    def test_missing_own_broadcast_raises(self):
        log = DeviceLog()
        log.record_exchange(BASE + 9 * 900, HEARD_X, CELL_1, -50)
        with pytest.raises(MissingBroadcast):
            filter_and_recombine(log.exchanges(), log.broadcasts())

    def test_output_sorted_by_slot_then_digest(self):
        rng = random.Random(3)
        log = DeviceLog()
        for interval in (5, 3, 8):
            ts = BASE + (interval - 1) * 900
            log.record_broadcast(ts, bytes([interval]) * 16)
            for _ in range(3):
                cell = CellDigest(rng.randbytes(32))
                log.record_exchange(ts + rng.randrange(900), rng.randbytes(16),
                                    cell, -50)
        out = filter_and_recombine(log.exchanges(), log.broadcasts())
        keys = [(r.coarse_time, r.cell_digest.digest) for r in out]
        assert keys == sorted(keys)


class TestDedupe:
    def test_multiplicity_counts_sightings(self):
        log = build_log()
        out = dedupe_policy(filter_and_recombine(log.exchanges(), log.broadcasts()))
        assert [(r.rpi, r.cell_digest, r.coarse_time, r.multiplicity) for r in out] == [
            (OWN_A, CELL_1, (DAY, 10), 2),
            (OWN_A, CELL_2, (DAY, 10), 1),
            (OWN_B, CELL_1, (DAY, 11), 1),
        ]

    def test_dedupe_sums_existing_multiplicity(self):
        recs = [
            RecombinedRecord(OWN_A, CELL_1, (DAY, 10), multiplicity=2),
            RecombinedRecord(OWN_A, CELL_1, (DAY, 10), multiplicity=3),
        ]
        out = dedupe_policy(recs)
        assert len(out) == 1 and out[0].multiplicity == 5

    def test_dedupe_is_idempotent(self):
        log = build_log()
        once = dedupe_policy(filter_and_recombine(log.exchanges(), log.broadcasts()))
        assert dedupe_policy(once) == once


class TestWireForm:
    def test_line_layout(self):
        rec = RecombinedRecord(OWN_A, CELL_1, (DAY, 10), multiplicity=2)
        (line,) = to_upload_lines([rec])
        assert line == f"{'0a' * 16}\t{'11' * 32}\t{DAY}:10\t2"

    def test_roundtrip(self):
        log = build_log()
        recs = dedupe_policy(filter_and_recombine(log.exchanges(), log.broadcasts()))
        assert parse_upload_lines(to_upload_lines(recs)) == recs

    def test_trailing_newlines_and_blanks_tolerated(self):
        rec = RecombinedRecord(OWN_A, CELL_1, (DAY, 10))
        lines = [to_upload_lines([rec])[0] + "\n", "", "\n"]
        assert parse_upload_lines(lines) == [rec]

    @pytest.mark.parametrize("line", [
        "deadbeef\t" + "11" * 32 + "\t18483:10\t1",       # short rpi
        "0a" * 16 + "\t" + "11" * 16 + "\t18483:10\t1",   # short digest
        "0a" * 16 + "\t" + "11" * 32 + "\t18483:97\t1",   # interval out of range
        "0a" * 16 + "\t" + "11" * 32 + "\t18483:0\t1",
        "0a" * 16 + "\t" + "11" * 32 + "\t-1:10\t1",      # negative day
        "0a" * 16 + "\t" + "11" * 32 + "\t18483:10\t0",   # multiplicity < 1
        "0a" * 16 + "\t" + "11" * 32 + "\t18483:10",      # missing field
        "0a" * 16 + "\t" + "11" * 32 + "\t18483:10\t1\tx",
        "zz" * 16 + "\t" + "11" * 32 + "\t18483:10\t1",   # bad hex
    ])
    def test_malformed_lines_rejected(self, line):
        with pytest.raises(MalformedPayload):
            parse_upload_lines([line])
