"""Device contact log: ordering, retention, text round-trip, time checks."""

import random

import pytest

from coavoid.devicelog import (
    RETENTION_SECONDS,
    DeviceLog,
    ExchangeRecord,
    from_iso8601,
    iso8601,
    validate_timestamp,
)
from coavoid.errors import IntervalOutOfRange, MalformedPayload
from coavoid.geocell import CellDigest

DAY = 18483 * 86400


def digest(tag: bytes) -> CellDigest:
    return CellDigest((tag * 32)[:32])


def fill_log(n: int, seed: int = 7) -> DeviceLog:
    rng = random.Random(seed)
    log = DeviceLog()
    stamps = [DAY + rng.randrange(0, 5 * 86400) for _ in range(n)]
    for i, ts in enumerate(stamps):
        if i % 4 == 0:
            log.record_broadcast(ts, rng.randbytes(16))
        else:
            log.record_exchange(ts, rng.randbytes(16), digest(b"\x01"),
                                rng.randrange(-90, -40))
    return log


class TestOrdering:
    def test_chronological_after_out_of_order_appends(self):
        log = fill_log(10000)
        ex = log.exchanges()
        bc = log.broadcasts()
        assert len(ex) + len(bc) == 10000
        assert all(a.timestamp <= b.timestamp for a, b in zip(ex, ex[1:]))
        assert all(a.timestamp <= b.timestamp for a, b in zip(bc, bc[1:]))

    def test_equal_timestamps_keep_arrival_order(self):
        log = DeviceLog()
        r1 = log.record_exchange(DAY, b"\x01" * 16, digest(b"\x02"), -50)
        r2 = log.record_exchange(DAY, b"\x02" * 16, digest(b"\x02"), -51)
        assert log.exchanges() == (r1, r2)


class TestRetention:
    def test_old_records_pruned_on_append(self):
        log = DeviceLog()
        log.record_exchange(DAY, b"\x01" * 16, digest(b"\x03"), -50)
        log.record_broadcast(DAY + 10, b"\x02" * 16)
        # newest jumps 15 days forward: both earlier records fall out
        log.record_exchange(DAY + 15 * 86400, b"\x03" * 16, digest(b"\x03"), -60)
        assert len(log.exchanges()) == 1
        assert len(log.broadcasts()) == 0
        assert log.window_floor == DAY + 15 * 86400 - RETENTION_SECONDS

    def test_records_on_window_floor_survive(self):
        log = DeviceLog()
        log.record_exchange(DAY, b"\x01" * 16, digest(b"\x04"), -50)
        log.record_exchange(DAY + RETENTION_SECONDS, b"\x02" * 16,
                            digest(b"\x04"), -50)
        assert len(log.exchanges()) == 2

    def test_empty_log_has_no_floor(self):
        assert DeviceLog().window_floor is None


class TestTextForm:
    def test_roundtrip(self):
        log = fill_log(200, seed=11)
        lines = log.to_lines()
        back = DeviceLog.from_lines(lines)
        assert back.exchanges() == log.exchanges()
        assert back.broadcasts() == log.broadcasts()

    def test_line_shapes(self):
        log = DeviceLog()
        log.record_exchange(DAY + 4 * 900, b"\xab" * 16, digest(b"\x05"), -57)
        log.record_broadcast(DAY + 4 * 900, b"\xcd" * 16)
        ex_line, bc_line = None, None
        for line in log.to_lines():
            if line.startswith("EX"):
                ex_line = line.split("\t")
            else:
                bc_line = line.split("\t")
        assert ex_line is not None and bc_line is not None
        assert len(ex_line) == 5 and len(bc_line) == 3
        assert ex_line[2] == "ab" * 16 and len(ex_line[3]) == 64
        assert ex_line[4] == "-57"
        assert from_iso8601(ex_line[1]) == DAY + 4 * 900

    def test_save_load(self, tmp_path):
        log = fill_log(50, seed=12)
        path = tmp_path / "device.log"
        log.save(path)
        assert DeviceLog.load(path).to_lines() == log.to_lines()

    @pytest.mark.parametrize("line", [
        "EX\t2020-08-09T00:00:00\tzz\tdigest\t-50",
        "EX\t2020-08-09T00:00:00\t" + "ab" * 16,
        "BC\tnot-a-time\t" + "ab" * 16,
        "??\t2020-08-09T00:00:00\t" + "ab" * 16,
    ])
    def test_malformed_lines_rejected(self, line):
        with pytest.raises(MalformedPayload):
            DeviceLog.from_lines([line])

    def test_blank_lines_skipped(self):
        log = DeviceLog.from_lines(["", "BC\t2020-08-09T00:00:00\t" + "ab" * 16, ""])
        assert len(log.broadcasts()) == 1

    def test_iso8601_roundtrip(self):
        for ts in (0, DAY, DAY + 86399):
            assert from_iso8601(iso8601(ts)) == ts


class TestValidateTimestamp:
    def make(self, ts):
        return ExchangeRecord(timestamp=ts, rpi=b"\x01" * 16,
                              cell_digest=digest(b"\x06"), rssi=-50)

    def test_same_interval_accepted(self):
        rec = self.make(DAY + 9 * 900 + 30)   # interval 10
        assert validate_timestamp(rec, 10)

    def test_one_interval_skew_accepted(self):
        rec = self.make(DAY + 9 * 900)
        assert validate_timestamp(rec, 9)
        assert validate_timestamp(rec, 11)

    def test_two_intervals_rejected(self):
        rec = self.make(DAY + 9 * 900)
        assert not validate_timestamp(rec, 8)
        assert not validate_timestamp(rec, 12)

    def test_claimed_interval_bounds(self):
        rec = self.make(DAY)
        for bad in (0, 97, -3):
            with pytest.raises(IntervalOutOfRange):
                validate_timestamp(rec, bad)
