"""Exposure risk scoring for confirmed contacts.

Four factors, each on a 0..8 scale, multiply into a 0..4096 score:
transmission level (reported with the diagnosis), cumulative duration
(5-minute buckets), days since the last contact (half-level per 2 days),
and signal attenuation (8 dB bands from 40 dB, strong signal = high risk).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import LevelOutOfRange, NoHits

MAX_LEVEL = 8
WARN_THRESHOLD = 64
BEACON_MINUTES = 2.0


def _check_level(name: str, value: int) -> None:
    if not 0 <= value <= MAX_LEVEL:
        raise LevelOutOfRange(f"{name}={value} outside 0..{MAX_LEVEL}")


@dataclass(frozen=True)
class RiskFactors:
    trv: int    # transmission
    durv: int   # duration
    darv: int   # days-ago
    arv: int    # attenuation

    def __post_init__(self) -> None:
        _check_level("trv", self.trv)
        _check_level("durv", self.durv)
        _check_level("darv", self.darv)
        _check_level("arv", self.arv)


def risk_score(factors: RiskFactors) -> int:
    return factors.trv * factors.durv * factors.darv * factors.arv


def duration_level(minutes: float) -> int:
    return max(0, min(MAX_LEVEL, int(minutes // 5)))


def recency_level(days_since: int) -> int:
    return max(0, min(MAX_LEVEL, MAX_LEVEL - int(days_since // 2)))


def attenuation_level(attenuation_db: float) -> int:
    band = int((attenuation_db - 40.0) // 8) if attenuation_db >= 40.0 else 0
    return MAX_LEVEL - min(MAX_LEVEL, max(0, band))


def derive_factors(hits: Sequence[tuple[int, int]], days_since: int,
                   trv: int, beacon_minutes: float = BEACON_MINUTES) -> RiskFactors:
    """Fold confirmed matches into factors. Each hit is (multiplicity,
    rssi dBm); multiplicity counts beacon sightings, so duration is
    multiplicity * beacon cadence, and attenuation (-rssi under the
    calibration here) is duration-weighted before banding."""
    if not hits:
        raise NoHits("no confirmed matches to score")
    _check_level("trv", trv)
    total_weight = 0
    weighted_att = 0.0
    for multiplicity, rssi in hits:
        if multiplicity < 1:
            raise ValueError(f"multiplicity {multiplicity} < 1")
        total_weight += multiplicity
        weighted_att += multiplicity * float(-rssi)
    minutes = total_weight * beacon_minutes
    return RiskFactors(trv=trv,
                       durv=duration_level(minutes),
                       darv=recency_level(days_since),
                       arv=attenuation_level(weighted_att / total_weight))


def should_warn(score: int, threshold: int = WARN_THRESHOLD) -> bool:
    return score >= threshold
