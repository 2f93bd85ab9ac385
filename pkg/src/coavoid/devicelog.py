"""On-device contact log.

Devices append two kinds of records: `ExchangeRecord` for every identifier
heard from a nearby device (together with the hearer's own hidden location
and signal strength) and `BroadcastRecord` for identifiers the device itself
sent. Both live in a rolling 14-day window anchored at the newest record.

The text form is one record per line, tab-separated:

    EX<TAB>2020-08-09T09:04:00<TAB><32 hex rpi><TAB><64 hex digest><TAB>-57
    BC<TAB>2020-08-09T09:04:00<TAB><32 hex rpi>
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Iterable

from .errors import IntervalOutOfRange, MalformedPayload
from .geocell import CellDigest
from .keysched import INTERVALS_PER_DAY, RETENTION_DAYS, SECONDS_PER_DAY, interval_of

RETENTION_SECONDS = RETENTION_DAYS * SECONDS_PER_DAY
_EPOCH = datetime(1970, 1, 1)


def iso8601(timestamp: int) -> str:
    return (_EPOCH + timedelta(seconds=int(timestamp))).isoformat()


def from_iso8601(text: str) -> int:
    return int((datetime.fromisoformat(text) - _EPOCH).total_seconds())


@dataclass(frozen=True)
class BroadcastRecord:
    timestamp: int
    rpi: bytes


@dataclass(frozen=True)
class ExchangeRecord:
    timestamp: int
    rpi: bytes
    cell_digest: CellDigest
    rssi: int


def validate_timestamp(record: ExchangeRecord, claimed_interval: int) -> bool:
    """True iff the record was heard in the claimed broadcast interval,
    tolerating one interval of clock skew either way. A wider gap means
    the identifier was replayed outside its lifetime."""
    if not 1 <= claimed_interval <= INTERVALS_PER_DAY:
        raise IntervalOutOfRange(f"claimed interval {claimed_interval} outside "
                                 f"1..{INTERVALS_PER_DAY}")
    _, actual = interval_of(record.timestamp)
    return abs(actual - claimed_interval) <= 1


class DeviceLog:
    """Single-writer append-only log with rolling retention.

    Records are kept in timestamp order (insertion keeps the order even if
    a record arrives late) and anything older than 14 days relative to the
    newest record is dropped on append.
    """

    def __init__(self) -> None:
        self._exchanges: list[ExchangeRecord] = []
        self._broadcasts: list[BroadcastRecord] = []
        self._newest: int | None = None

    def record_exchange(self, timestamp: int, rpi: bytes, cell_digest: CellDigest,
                        rssi: int) -> ExchangeRecord:
        rec = ExchangeRecord(timestamp=int(timestamp), rpi=bytes(rpi),
                             cell_digest=cell_digest, rssi=int(rssi))
        self._insert(self._exchanges, rec)
        return rec

    def record_broadcast(self, timestamp: int, rpi: bytes) -> BroadcastRecord:
        rec = BroadcastRecord(timestamp=int(timestamp), rpi=bytes(rpi))
        self._insert(self._broadcasts, rec)
        return rec

    def _insert(self, bucket: list, rec) -> None:
        keys = [r.timestamp for r in bucket]
        bucket.insert(bisect.bisect_right(keys, rec.timestamp), rec)
        self._newest = rec.timestamp if self._newest is None else max(self._newest, rec.timestamp)
        floor = self.window_floor
        if floor is not None:
            self._exchanges = [r for r in self._exchanges if r.timestamp >= floor]
            self._broadcasts = [r for r in self._broadcasts if r.timestamp >= floor]

    @property
    def window_floor(self) -> int | None:
        if self._newest is None:
            return None
        return self._newest - RETENTION_SECONDS

    def exchanges(self) -> tuple[ExchangeRecord, ...]:
        return tuple(self._exchanges)

    def broadcasts(self) -> tuple[BroadcastRecord, ...]:
        return tuple(self._broadcasts)

    # -- text form ----------------------------------------------------------

    def to_lines(self) -> list[str]:
        rows = [(r.timestamp, 1, r) for r in self._exchanges]
        rows += [(r.timestamp, 0, r) for r in self._broadcasts]
        rows.sort(key=lambda t: (t[0], t[1]))
        out = []
        for _, kind, r in rows:
            if kind == 1:
                out.append(f"EX\t{iso8601(r.timestamp)}\t{r.rpi.hex()}\t"
                           f"{r.cell_digest.hex}\t{r.rssi}")
            else:
                out.append(f"BC\t{iso8601(r.timestamp)}\t{r.rpi.hex()}")
        return out

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "DeviceLog":
        log = cls()
        for n, line in enumerate(lines, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            try:
                if parts[0] == "EX" and len(parts) == 5:
                    log.record_exchange(from_iso8601(parts[1]),
                                        bytes.fromhex(parts[2]),
                                        CellDigest(bytes.fromhex(parts[3])),
                                        int(parts[4]))
                elif parts[0] == "BC" and len(parts) == 3:
                    log.record_broadcast(from_iso8601(parts[1]),
                                         bytes.fromhex(parts[2]))
                else:
                    raise ValueError("unknown record shape")
            except (ValueError, IndexError) as exc:
                raise MalformedPayload(f"bad device log line {n}: {line!r}") from exc
        return log

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.to_lines():
                fh.write(line + "\n")

    @classmethod
    def load(cls, path) -> "DeviceLog":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_lines(fh)
