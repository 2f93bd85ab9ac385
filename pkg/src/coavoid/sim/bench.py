"""Verification-speed comparison on synthesized city-scale datasets.

Builds the two download payloads a device would face after an outbreak in
a large population (default 10,000 users, 1% patients):

- filtered: one record per actual contact interval per patient, the
  protocol's own upload shape;
- upload-all: one record per broadcast interval per retained day per
  patient, contact or not.

It then measures, for a representative verifying device, the wall time to
reconstruct-and-scan the upload-all payload (identifier-only matching)
versus the full coarse-plus-fine path on the filtered payload, including
the encrypted sessions for every planted hit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from ..devicelog import DeviceLog
from ..edgeserver import ObfuscatedStore, StoredRecord
from ..errors import ConfigInvalid
from ..filtering import parse_upload_lines, to_upload_lines, RecombinedRecord
from ..finematch import DEFAULT_SIZES, FixedPointCodec, coarse_match, gen_params
from ..geocell import (DEFAULT_RESOLUTION, CellDigest, GeoPoint, HexGrid,
                       hide_location)
from ..keysched import (INTERVALS_PER_DAY, SECONDS_PER_DAY, INTERVAL_SECONDS,
                        KeyStore, derive_day_rpis, derive_rpik)
from .run import _suite_for
from .sessions import PatientSession, UserSession, run_fine_session
from .world import START_DAY_2020_08_09, det_rng


@dataclass(frozen=True)
class BenchConfig:
    users: int = 10000
    patient_fraction: float = 0.01
    days: int = 14
    contact_intervals_per_day: int = 4
    planted_matches: int = 3
    user_exchanges: int = 200
    repeats: int = 3
    seed: int = 7
    suite: str = "ed25519"
    resolution: int = DEFAULT_RESOLUTION
    start_day_index: int = START_DAY_2020_08_09

    def validate(self) -> None:
        checks = [
            (self.users >= 100, "users must be >= 100"),
            (0.0 < self.patient_fraction <= 0.5, "patient_fraction outside (0, 0.5]"),
            (1 <= self.days <= 14, "days outside 1..14"),
            (1 <= self.contact_intervals_per_day <= INTERVALS_PER_DAY,
             "contact_intervals_per_day outside 1..96"),
            (0 <= self.planted_matches <= self.user_exchanges,
             "planted_matches beyond the user log"),
            (self.user_exchanges >= 1, "user_exchanges must be >= 1"),
            (self.repeats >= 1, "repeats must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigInvalid(msg)

    @property
    def patients(self) -> int:
        return max(1, round(self.users * self.patient_fraction))


@dataclass
class BenchReport:
    users: int
    patients: int
    filtered_records: int
    baseline_records: int
    filtered_seconds: float
    baseline_seconds: float
    ratio: float
    filtered_matches: int
    baseline_matches: int
    fine_sessions: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _digest_pool(config: BenchConfig, rng) -> list:
    grid = HexGrid(GeoPoint(34.26, 108.94), 1.0)
    pool = []
    for _ in range(24):
        x = rng.uniform(-10000.0, 10000.0)
        y = rng.uniform(-10000.0, 10000.0)
        pool.append(hide_location(grid.cell_index_planar(x, y, config.resolution)))
    return pool


def build_datasets(config: BenchConfig):
    """Returns (filtered_lines, baseline_lines, planted) where planted is a
    list of (record, patient positions entry) the user log will contain."""
    config.validate()
    rng = det_rng(config.seed, "bench")
    pool = _digest_pool(config, rng)
    codec = FixedPointCodec(coord_bits=DEFAULT_SIZES["coord_bits"])

    filtered: list[RecombinedRecord] = []
    baseline_lines: list[str] = []
    planted = []
    for pid in range(config.patients):
        store = KeyStore(rng=det_rng(config.seed, f"bench-keys/{pid}"))
        for offset in range(config.days):
            day = config.start_day_index + offset
            rpik = derive_rpik(store.advance_to(day))
            rpis = derive_day_rpis(rpik)
            chosen = rng.sample(range(1, INTERVALS_PER_DAY + 1),
                                config.contact_intervals_per_day)
            for interval in sorted(chosen):
                digest = pool[rng.randrange(len(pool))]
                rec = RecombinedRecord(rpi=rpis[interval - 1],
                                       cell_digest=digest,
                                       coarse_time=(day, interval),
                                       multiplicity=1 + rng.randrange(5))
                filtered.append(rec)
                if pid == 0 and len(planted) < config.planted_matches:
                    planted.append(rec)
            baseline_lines.extend(
                f"{rpi.hex()}\t{pool[0].hex}\t{day}:{interval}\t1"
                for interval, rpi in enumerate(rpis, start=1))
    return to_upload_lines(filtered), baseline_lines, planted, codec


def _user_log(config: BenchConfig, planted, rng) -> DeviceLog:
    log = DeviceLog()
    pool = _digest_pool(config, rng)
    horizon = (config.start_day_index + config.days) * SECONDS_PER_DAY
    floor = config.start_day_index * SECONDS_PER_DAY
    for _ in range(config.user_exchanges - len(planted)):
        log.record_exchange(rng.randrange(floor, horizon), rng.randbytes(16),
                            pool[rng.randrange(len(pool))],
                            -40 - rng.randrange(40))
    for rec in planted:
        day, interval = rec.coarse_time
        ts = day * SECONDS_PER_DAY + (interval - 1) * INTERVAL_SECONDS + 60
        log.record_exchange(ts, rec.rpi, rec.cell_digest, -48)
    return log


def run_bench(config: BenchConfig = BenchConfig()) -> BenchReport:
    """Times the per-device work only: the store ingest and re-shuffle are
    server-side and happen once, so both strategies are measured from the
    text payload a device downloads."""
    filtered_lines, baseline_lines, planted, codec = build_datasets(config)
    rng = det_rng(config.seed, "bench-user")
    log = _user_log(config, planted, rng)
    exchanges = log.exchanges()
    suite = _suite_for(config.suite)
    params = gen_params(rng=det_rng(config.seed, "bench-params"))
    sk, pk = suite.keygen(det_rng(config.seed, "bench-sign"))
    user_xy = codec.encode(100.0, 100.0)
    patient_positions = {rec.coarse_time: codec.encode(102.0, 101.0)
                         for rec in planted}
    now_ts = (config.start_day_index + config.days) * SECONDS_PER_DAY - 1

    store = ObfuscatedStore(rng=det_rng(config.seed, "bench-store"))
    store.accept_upload(filtered_lines)
    epoch = store.publish(now_day=config.start_day_index + config.days - 1)
    download_lines = to_upload_lines(
        RecombinedRecord(rpi=r.rpi, cell_digest=CellDigest(r.cell_digest),
                         coarse_time=r.coarse_time,
                         multiplicity=r.multiplicity)
        for r in store.download(0))

    filtered_best = baseline_best = float("inf")
    filtered_matches = baseline_matches = fine_sessions = 0

    for _ in range(config.repeats):
        # the protocol path: parse the download, coarse screen, run one
        # encrypted session per hit
        started = time.perf_counter()
        records = [StoredRecord(rpi=r.rpi, cell_digest=r.cell_digest.digest,
                                coarse_time=r.coarse_time,
                                multiplicity=r.multiplicity, epoch=epoch)
                   for r in parse_upload_lines(download_lines)]
        result = coarse_match(exchanges, records)
        confirmed = 0
        sessions = 0
        for hit in result.hits:
            patient_session = PatientSession(
                params=params, suite=suite, sign_sk=sk, sign_pk=pk,
                positions=patient_positions, codec=codec,
                contact_radius_m=10.0,
                rng=det_rng(config.seed, "bench-patient"))
            outcome = run_fine_session(
                store, hit.record, patient_session,
                UserSession(suite=suite, position=user_xy,
                            sizes=(params.k1, params.k2, params.k3,
                                   params.k4, params.coord_bits),
                            authority_keys={pk},
                            rng=det_rng(config.seed, "bench-user-rng")),
                now_ts)
            sessions += 1
            if outcome.verdict == "inside":
                confirmed += 1
        filtered_best = min(filtered_best, time.perf_counter() - started)
        filtered_matches = confirmed
        fine_sessions = sessions

        # the upload-all path: parse the same wire format, reconstruct the
        # identifier set, scan by rpi alone
        started = time.perf_counter()
        identifier_set = {rec.rpi for rec in parse_upload_lines(baseline_lines)}
        scan_hits = sum(1 for ex in exchanges if ex.rpi in identifier_set)
        baseline_best = min(baseline_best, time.perf_counter() - started)
        baseline_matches = scan_hits

    ratio = filtered_best / baseline_best if baseline_best > 0 else 0.0
    return BenchReport(
        users=config.users, patients=config.patients,
        filtered_records=len(filtered_lines),
        baseline_records=len(baseline_lines),
        filtered_seconds=round(filtered_best, 6),
        baseline_seconds=round(baseline_best, 6),
        ratio=round(ratio, 6),
        filtered_matches=filtered_matches,
        baseline_matches=baseline_matches,
        fine_sessions=fine_sessions)
