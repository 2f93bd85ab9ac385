"""Deterministic random-walk world for protocol evaluation.

Agents visit places on a minute grid; co-located agents exchange broadcast
identifiers in bursts of 2-minute beacons, recording what a real device
would log. Ground truth for "close contact" uses the same fixed-point
integer predicate the encrypted fine stage evaluates, so detection can be
compared to truth without floating-point boundary ambiguity.

All randomness derives from the master seed through labelled SHA-256
splits; equal seeds give byte-identical worlds.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..devicelog import DeviceLog
from ..errors import ConfigInvalid
from ..finematch import DEFAULT_SIZES, FixedPointCodec
from ..geocell import (DEFAULT_RESOLUTION, CellDigest, CellIndex, GeoPoint,
                       HexGrid, hide_location)
from ..keysched import (INTERVAL_SECONDS, INTERVALS_PER_DAY, SECONDS_PER_DAY,
                        KeyStore, derive_day_rpis, derive_rpik)

START_DAY_2020_08_09 = 18483


def det_rng(seed: int, label: str) -> random.Random:
    """Labelled split of the master seed, stable across processes."""
    digest = hashlib.sha256(f"{seed}/{label}".encode()).digest()
    return random.Random(int.from_bytes(digest, "big"))


@dataclass(frozen=True)
class SimConfig:
    users: int = 1000
    days: int = 14
    places: int = 50
    seed: int = 42
    infection_rate: float = 1.0
    initial_patients: Optional[int] = None
    diagnosis_lag_days: int = 1
    visits_per_day: int = 4
    partner_mean: float = 1.5
    beacon_continue_prob: float = 0.65
    max_beacons: int = 7
    place_radius_m: float = 30.0
    contact_radius_m: float = 10.0
    resolution: int = DEFAULT_RESOLUTION
    region_centroid: tuple[float, float] = (34.26, 108.94)
    region_extent_deg: float = 1.0
    city_extent_m: float = 20000.0
    start_day_index: int = START_DAY_2020_08_09
    rssi_noise_sd: float = 2.0
    transmission_level: int = 5
    warn_threshold: int = 64
    suite: str = "ed25519"
    fine_sizes: tuple[int, int, int, int, int] = (
        DEFAULT_SIZES["k1"], DEFAULT_SIZES["k2"], DEFAULT_SIZES["k3"],
        DEFAULT_SIZES["k4"], DEFAULT_SIZES["coord_bits"])

    def validate(self) -> None:
        checks = [
            (self.users >= 2, "users must be >= 2"),
            (self.days >= 1, "days must be >= 1"),
            (self.places >= 1, "places must be >= 1"),
            (0.0 <= self.infection_rate <= 1.0, "infection_rate outside [0, 1]"),
            (1 <= self.visits_per_day <= INTERVALS_PER_DAY,
             "visits_per_day outside 1..96"),
            (self.partner_mean >= 0.0, "partner_mean must be >= 0"),
            (0.0 < self.beacon_continue_prob < 1.0,
             "beacon_continue_prob outside (0, 1)"),
            (1 <= self.max_beacons <= INTERVAL_SECONDS // 120,
             "max_beacons beyond the interval"),
            (self.contact_radius_m > 0, "contact_radius_m must be > 0"),
            (self.place_radius_m >= self.contact_radius_m / 2,
             "place_radius_m too small"),
            (0 <= self.resolution <= 15, "resolution outside 0..15"),
            (self.diagnosis_lag_days >= 0, "diagnosis_lag_days must be >= 0"),
            (self.initial_patients is None
             or 0 <= self.initial_patients <= self.users,
             "initial_patients outside 0..users"),
            (self.suite in ("ed25519", "pairing"),
             f"unknown signature suite {self.suite!r}"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigInvalid(msg)

    @property
    def seed_patients(self) -> int:
        if self.initial_patients is not None:
            return self.initial_patients
        return max(1, self.users // 100)


@dataclass(frozen=True)
class Place:
    place_id: int
    x: float
    y: float
    cell: CellIndex
    digest: CellDigest


@dataclass(frozen=True)
class TruthEntry:
    day: int                      # absolute day index
    interval: int
    place_id: int
    agent_a: int
    agent_b: int
    inside: bool                  # within contact radius per the integer predicate
    beacons: int
    timestamp: int                # first beacon


@dataclass
class Agent:
    agent_id: int
    keystore: KeyStore
    log: DeviceLog = field(default_factory=DeviceLog)
    walk_rng: random.Random = None  # type: ignore[assignment]
    positions: dict[tuple[int, int], tuple[int, int]] = field(default_factory=dict)
    day_rpis: list[bytes] = field(default_factory=list)
    _bc_logged: set[tuple[int, int]] = field(default_factory=set)


@dataclass
class DayEvents:
    truth: list[TruthEntry]
    exposures: set[int]           # healthy walkers who met an infectious agent


class World:
    def __init__(self, config: SimConfig) -> None:
        config.validate()
        self.config = config
        self.grid = HexGrid(GeoPoint(*config.region_centroid),
                            config.region_extent_deg)
        self.codec = FixedPointCodec(coord_bits=config.fine_sizes[4])
        self._mix = det_rng(config.seed, "mix")
        self.places = self._make_places()
        self.agents = [
            Agent(agent_id=i,
                  keystore=KeyStore(rng=det_rng(config.seed, f"keys/{i}")),
                  walk_rng=det_rng(config.seed, f"walk/{i}"))
            for i in range(config.users)
        ]
        self.truth: list[TruthEntry] = []

    def _make_places(self) -> list[Place]:
        """Scatter places; resample anything whose disc would cross a cell
        wall so every co-located pair shares a digest."""
        cfg = self.config
        rng = det_rng(cfg.seed, "places")
        half = cfg.city_extent_m / 2.0
        out: list[Place] = []
        for pid in range(cfg.places):
            for _ in range(10000):
                x = rng.uniform(-half, half)
                y = rng.uniform(-half, half)
                if self.grid.boundary_distance_planar(
                        x, y, cfg.resolution) > cfg.place_radius_m + 1.0:
                    break
            else:
                raise ConfigInvalid("could not place a site inside one cell; "
                                    "place_radius_m too large for resolution")
            cell = self.grid.cell_index_planar(x, y, cfg.resolution)
            out.append(Place(place_id=pid, x=x, y=y, cell=cell,
                             digest=hide_location(cell)))
        return out

    # -- samplers -------------------------------------------------------------

    @staticmethod
    def _poisson(rng: random.Random, lam: float) -> int:
        if lam <= 0:
            return 0
        threshold = math.exp(-lam)
        k, acc = 0, 1.0
        while True:
            acc *= rng.random()
            if acc <= threshold:
                return k
            k += 1

    def _beacon_count(self, rng: random.Random) -> int:
        n = 1
        while n < self.config.max_beacons and rng.random() < self.config.beacon_continue_prob:
            n += 1
        return n

    def _rssi(self, rng: random.Random, distance_m: float) -> int:
        att = -40.0 - 25.0 * math.log10(max(distance_m, 0.5))
        return round(att + rng.gauss(0.0, self.config.rssi_noise_sd))

    # -- one simulated day ------------------------------------------------------

    def simulate_day(self, sim_day: int, walkers: Iterable[int],
                     infectious: set[int]) -> DayEvents:
        cfg = self.config
        day_abs = cfg.start_day_index + sim_day
        walkers = sorted(walkers)

        # fresh daily keys and the day's 96 identifiers
        for aid in walkers:
            agent = self.agents[aid]
            dtk = agent.keystore.advance_to(day_abs)
            agent.day_rpis = derive_day_rpis(derive_rpik(dtk))
            agent._bc_logged.clear()

        # visit schedule: (interval, place) -> [(agent, fx, fy, x, y)]
        schedule: dict[tuple[int, int], list] = {}
        for aid in walkers:
            agent = self.agents[aid]
            rng = agent.walk_rng
            intervals = rng.sample(range(1, INTERVALS_PER_DAY + 1), cfg.visits_per_day)
            for interval in intervals:
                place = self.places[rng.randrange(len(self.places))]
                rho = cfg.place_radius_m * math.sqrt(rng.random())
                theta = rng.uniform(0.0, 2.0 * math.pi)
                x = place.x + rho * math.cos(theta)
                y = place.y + rho * math.sin(theta)
                fx, fy = self.codec.encode(x, y)
                agent.positions[(day_abs, interval)] = (fx, fy)
                schedule.setdefault((interval, place.place_id), []).append(
                    (aid, fx, fy, x, y))

        events = DayEvents(truth=[], exposures=set())
        radius_sq = round(cfg.contact_radius_m) ** 2
        for (interval, pid) in sorted(schedule):
            group = schedule[(interval, pid)]
            if len(group) < 2:
                continue
            group.sort(key=lambda t: t[0])
            place = self.places[pid]
            base_ts = day_abs * SECONDS_PER_DAY + (interval - 1) * INTERVAL_SECONDS
            members = [g[0] for g in group]
            pos = {g[0]: g for g in group}
            seen_pairs: set[tuple[int, int]] = set()
            for aid in members:
                others = [m for m in members if m != aid]
                k = self._poisson(self._mix, cfg.partner_mean)
                if k <= 0 or not others:
                    continue
                partners = self._mix.sample(others, min(k, len(others)))
                for bid in sorted(partners):
                    pair = (min(aid, bid), max(aid, bid))
                    if pair in seen_pairs:
                        continue
                    seen_pairs.add(pair)
                    self._exchange_pair(pair[0], pair[1], place, day_abs,
                                        interval, base_ts, pos, radius_sq,
                                        infectious, events)
        self.truth.extend(events.truth)
        return events

    def _exchange_pair(self, a: int, b: int, place: Place, day_abs: int,
                       interval: int, base_ts: int, pos: dict, radius_sq: int,
                       infectious: set[int], events: DayEvents) -> None:
        cfg = self.config
        _, fxa, fya, xa, ya = pos[a]
        _, fxb, fyb, xb, yb = pos[b]
        dist = math.hypot(xa - xb, ya - yb)
        inside = (fxa - fxb) ** 2 + (fya - fyb) ** 2 < radius_sq
        beacons = self._beacon_count(self._mix)
        agent_a, agent_b = self.agents[a], self.agents[b]
        rpi_a = agent_a.day_rpis[interval - 1]
        rpi_b = agent_b.day_rpis[interval - 1]
        for j in range(beacons):
            ts = base_ts + 120 * j
            agent_a.log.record_exchange(ts, rpi_b, place.digest,
                                        self._rssi(self._mix, dist))
            agent_b.log.record_exchange(ts, rpi_a, place.digest,
                                        self._rssi(self._mix, dist))
        for agent, rpi in ((agent_a, rpi_a), (agent_b, rpi_b)):
            slot = (day_abs, interval)
            if slot not in agent._bc_logged:
                agent._bc_logged.add(slot)
                agent.log.record_broadcast(base_ts, rpi)
        events.truth.append(TruthEntry(day=day_abs, interval=interval,
                                       place_id=place.place_id, agent_a=a,
                                       agent_b=b, inside=inside,
                                       beacons=beacons, timestamp=base_ts))
        if inside:
            if a in infectious and b not in infectious:
                events.exposures.add(b)
            elif b in infectious and a not in infectious:
                events.exposures.add(a)
