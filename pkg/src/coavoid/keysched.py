"""Daily tracing keys and the rolling identifiers broadcast over BLE.

A device keeps one random 16-byte daily key per calendar day. Each day is
split into 96 fifteen-minute broadcast intervals, numbered 1..96. The
identifier for an interval is a single AES-128 block computed under a key
derived from the daily key, so identifiers rotate every interval and are
unlinkable without the daily key.
"""

from __future__ import annotations

import secrets
import struct
from dataclasses import dataclass, field
from typing import Optional

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
import hashlib

from .errors import IntervalOutOfRange

SECONDS_PER_DAY = 86400
INTERVAL_SECONDS = 900
INTERVALS_PER_DAY = 96
RETENTION_DAYS = 14

_RPIK_LABEL = b"EN-RPIK"
_RPI_LABEL = b"EN-RPI"


@dataclass(frozen=True)
class DailyTracingKey:
    day_index: int
    key: bytes

    def __post_init__(self) -> None:
        if len(self.key) != 16:
            raise ValueError("daily key must be 16 bytes")


@dataclass(frozen=True)
class RollingProximityIdentifier:
    rpi: bytes
    interval: int
    day_index: int


def new_dtk(day_index: int, rng=None) -> DailyTracingKey:
    """Draw a fresh daily key. `rng` (random.Random) is for simulations;
    the default draws from the OS CSPRNG."""
    key = rng.randbytes(16) if rng is not None else secrets.token_bytes(16)
    return DailyTracingKey(day_index=day_index, key=key)


def derive_rpik(dtk: DailyTracingKey) -> bytes:
    """Interval-key derivation: first 16 bytes of SHA-256(daily key || label)."""
    return hashlib.sha256(dtk.key + _RPIK_LABEL).digest()[:16]


def _padded_block(interval: int) -> bytes:
    # 6-byte label, 6 zero bytes, 4-byte big-endian interval number
    return _RPI_LABEL + b"\x00" * 6 + struct.pack(">I", interval)


def _check_interval(interval: int) -> None:
    if not 1 <= interval <= INTERVALS_PER_DAY:
        raise IntervalOutOfRange(f"interval {interval} outside 1..{INTERVALS_PER_DAY}")


def derive_rpi(rpik: bytes, interval: int, day_index: int = 0) -> RollingProximityIdentifier:
    """One broadcast identifier: AES-128-ECB over the padded interval block."""
    _check_interval(interval)
    enc = Cipher(algorithms.AES(rpik), modes.ECB()).encryptor()
    rpi = enc.update(_padded_block(interval)) + enc.finalize()
    return RollingProximityIdentifier(rpi=rpi, interval=interval, day_index=day_index)


def derive_day_rpis(rpik: bytes) -> list[bytes]:
    """All 96 identifiers of a day in one ECB pass (blocks are independent)."""
    plain = b"".join(_padded_block(i) for i in range(1, INTERVALS_PER_DAY + 1))
    enc = Cipher(algorithms.AES(rpik), modes.ECB()).encryptor()
    blob = enc.update(plain) + enc.finalize()
    return [blob[k * 16:(k + 1) * 16] for k in range(INTERVALS_PER_DAY)]


def interval_of(timestamp: int) -> tuple[int, int]:
    """Map epoch seconds to (day_index, interval in 1..96)."""
    day_index = timestamp // SECONDS_PER_DAY
    interval = 1 + (timestamp % SECONDS_PER_DAY) // INTERVAL_SECONDS
    return day_index, interval


class KeyStore:
    """Per-device daily key storage with a 14-day retention window."""

    def __init__(self, rng=None) -> None:
        self._rng = rng
        self._dtks: dict[int, DailyTracingKey] = {}
        self._current_day: Optional[int] = None

    def advance_to(self, day_index: int) -> DailyTracingKey:
        """Ensure a key exists for `day_index` and purge everything older
        than the retention window ending at that day."""
        if self._current_day is not None and day_index < self._current_day:
            raise ValueError("key store clock cannot move backwards")
        self._current_day = day_index
        if day_index not in self._dtks:
            self._dtks[day_index] = new_dtk(day_index, self._rng)
        floor = day_index - (RETENTION_DAYS - 1)
        for old in [d for d in self._dtks if d < floor]:
            del self._dtks[old]
        return self._dtks[day_index]

    def dtk_for(self, day_index: int) -> Optional[DailyTracingKey]:
        return self._dtks.get(day_index)

    def days(self) -> list[int]:
        return sorted(self._dtks)

    def rpi_at(self, timestamp: int) -> RollingProximityIdentifier:
        day_index, interval = interval_of(timestamp)
        dtk = self._dtks.get(day_index)
        if dtk is None:
            dtk = self.advance_to(day_index)
        return derive_rpi(derive_rpik(dtk), interval, day_index)
