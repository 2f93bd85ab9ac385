"""Patient-side upload preparation.

A diagnosed patient never uploads identifiers heard from others. Instead,
each heard-exchange is recombined into (own broadcast identifier for that
interval, own hidden location at receipt, coarse time): exactly what a
contact needs to recognise the encounter, and nothing about third parties.

Upload text form, one record per line:

    <32 hex rpi><TAB><64 hex digest><TAB><day>:<interval><TAB><multiplicity>
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .devicelog import BroadcastRecord, ExchangeRecord
from .errors import MalformedPayload, MissingBroadcast
from .geocell import CellDigest
from .keysched import INTERVALS_PER_DAY, interval_of


@dataclass(frozen=True)
class RecombinedRecord:
    rpi: bytes
    cell_digest: CellDigest
    coarse_time: tuple[int, int]    # (day_index, interval)
    multiplicity: int = 1


def _sort_key(rec: RecombinedRecord):
    return (rec.coarse_time[0], rec.coarse_time[1], rec.cell_digest.digest, rec.rpi)


def filter_and_recombine(exchanges: Sequence[ExchangeRecord],
                         broadcasts: Sequence[BroadcastRecord]) -> list[RecombinedRecord]:
    """Pair every heard exchange with the device's own broadcast identifier
    of the same interval. Output order is the (day, interval, digest) sort;
    duplicates are kept (one output per heard exchange)."""
    own_by_slot: dict[tuple[int, int], bytes] = {}
    for b in broadcasts:
        slot = interval_of(b.timestamp)
        own_by_slot.setdefault(slot, b.rpi)
    out: list[RecombinedRecord] = []
    for ex in exchanges:
        slot = interval_of(ex.timestamp)
        own = own_by_slot.get(slot)
        if own is None:
            raise MissingBroadcast(f"no own broadcast for day {slot[0]} "
                                   f"interval {slot[1]}")
        out.append(RecombinedRecord(rpi=own, cell_digest=ex.cell_digest,
                                    coarse_time=slot))
    out.sort(key=_sort_key)
    return out


def dedupe_policy(records: Sequence[RecombinedRecord]) -> list[RecombinedRecord]:
    """Collapse identical (rpi, digest, coarse_time) rows into one row whose
    multiplicity is the sighting count."""
    counts: dict[tuple, int] = {}
    for rec in records:
        key = (rec.rpi, rec.cell_digest.digest, rec.coarse_time)
        counts[key] = counts.get(key, 0) + rec.multiplicity
    out = [RecombinedRecord(rpi=k[0], cell_digest=CellDigest(k[1]),
                            coarse_time=k[2], multiplicity=n)
           for k, n in counts.items()]
    out.sort(key=_sort_key)
    return out


def to_upload_lines(records: Iterable[RecombinedRecord]) -> list[str]:
    out = []
    for rec in records:
        day, interval = rec.coarse_time
        out.append(f"{rec.rpi.hex()}\t{rec.cell_digest.hex}\t"
                   f"{day}:{interval}\t{rec.multiplicity}")
    return out


def parse_upload_lines(lines: Iterable[str]) -> list[RecombinedRecord]:
    out = []
    for n, line in enumerate(lines, 1):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        try:
            if len(parts) != 4:
                raise ValueError("wrong field count")
            rpi = bytes.fromhex(parts[0])
            digest = bytes.fromhex(parts[1])
            day_s, _, interval_s = parts[2].partition(":")
            day, interval = int(day_s), int(interval_s)
            mult = int(parts[3])
            if len(rpi) != 16 or len(digest) != 32:
                raise ValueError("wrong identifier width")
            if not 1 <= interval <= INTERVALS_PER_DAY or mult < 1 or day < 0:
                raise ValueError("field out of range")
        except ValueError as exc:
            raise MalformedPayload(f"bad upload line {n}: {line!r}") from exc
        out.append(RecombinedRecord(rpi=rpi, cell_digest=CellDigest(digest),
                                    coarse_time=(day, interval), multiplicity=mult))
    return out
