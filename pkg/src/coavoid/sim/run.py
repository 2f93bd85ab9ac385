"""Full-pipeline simulation runs.

`run` drives the whole protocol day by day: agents walk and exchange
identifiers, newly diagnosed patients filter and upload their contact
records, the store re-shuffles and publishes, every other device downloads
and screens, coarse matches escalate to encrypted fine verification over
the relay, and confirmed contacts feed risk scores.

`run_baseline` replays the same world under an upload-everything strategy
(one record per broadcast interval over the patient's whole key window,
contact or not) to measure how much the filtering step saves.
"""

from __future__ import annotations

import statistics
import time

from ..edgeserver import ObfuscatedStore
from ..errors import ConfigInvalid
from ..filtering import dedupe_policy, filter_and_recombine, to_upload_lines
from ..finematch import ED25519_SUITE, PAIRING_SUITE, coarse_match, gen_params
from ..geocell import hide_location
from ..keysched import SECONDS_PER_DAY, INTERVALS_PER_DAY, derive_day_rpis, derive_rpik
from ..riskscore import derive_factors, risk_score, should_warn
from .metrics import DailyRow, MetricsReport, config_dict
from .sessions import PatientSession, UserSession, run_fine_session
from .world import SimConfig, World, det_rng


def _suite_for(name: str):
    if name == "pairing":
        return PAIRING_SUITE
    if name == "ed25519":
        return ED25519_SUITE
    raise ConfigInvalid(f"unknown signature suite {name!r}")


def run(config: SimConfig, measure_timing: bool = False,
        collect_logs: bool = False) -> MetricsReport:
    started = time.perf_counter()
    world = World(config)
    suite = _suite_for(config.suite)
    store = ObfuscatedStore(rng=det_rng(config.seed, "store"))
    params = gen_params(*config.fine_sizes, rng=det_rng(config.seed, "params"))
    epi_rng = det_rng(config.seed, "epidemic")

    suspected: set[int] = set()
    sick: set[int] = set()
    diagnosed: set[int] = set()
    pending: dict[int, int] = {}
    seeds = epi_rng.sample(range(config.users), config.seed_patients)
    sick.update(seeds)
    for aid in seeds:
        pending[aid] = 0          # index cases are found on day 0

    # confirmed-contact ledgers keyed by (user, patient, day, interval)
    truth_set: set[tuple[int, int, int, int]] = set()
    detected_set: set[tuple[int, int, int, int]] = set()
    contacts_of: dict[int, list] = {a: [] for a in range(config.users)}
    rpi_owner: dict[bytes, int] = {}
    patient_ctx: dict[int, PatientSession] = {}
    authority_keys: set[bytes] = set()
    user_rngs: dict[int, object] = {}
    warned: set[int] = set()
    cursor = 0
    verify_seconds = 0.0
    verify_user_days = 0

    from ..finematch import VerificationLog
    vlog = VerificationLog() if collect_logs else None
    rows: list[DailyRow] = []

    for sim_day in range(config.days):
        day_abs = config.start_day_index + sim_day
        walkers = [a for a in range(config.users) if a not in diagnosed]
        events = world.simulate_day(sim_day, walkers, infectious=sick)
        for entry in events.truth:
            if entry.inside:
                contacts_of[entry.agent_a].append(
                    (entry.agent_b, entry.day, entry.interval, entry.timestamp))
                contacts_of[entry.agent_b].append(
                    (entry.agent_a, entry.day, entry.interval, entry.timestamp))

        for aid in sorted(events.exposures):
            if aid not in sick and aid not in diagnosed:
                suspected.add(aid)
        for aid in sorted(suspected):
            if epi_rng.random() < config.infection_rate:
                suspected.discard(aid)
                sick.add(aid)
                pending.setdefault(aid, sim_day + config.diagnosis_lag_days)

        new_patients = sorted(a for a, due in pending.items()
                              if due <= sim_day and a in sick)
        batch = set(new_patients)
        upload_records = upload_bytes = truth_today = 0
        for pid in new_patients:
            sick.discard(pid)
            diagnosed.add(pid)
            agent = world.agents[pid]
            deduped = dedupe_policy(filter_and_recombine(
                agent.log.exchanges(), agent.log.broadcasts()))
            if deduped:
                lines = to_upload_lines(deduped)
                upload_bytes += sum(len(line) + 1 for line in lines)
                upload_records += len(deduped)
                store.accept_upload(deduped)
                for rec in deduped:
                    rpi_owner[rec.rpi] = pid
            sk, pk = suite.keygen(det_rng(config.seed, f"sign/{pid}"))
            authority_keys.add(pk)
            patient_ctx[pid] = PatientSession(
                params=params, suite=suite, sign_sk=sk, sign_pk=pk,
                positions=agent.positions, codec=world.codec,
                contact_radius_m=config.contact_radius_m,
                rng=det_rng(config.seed, f"patient/{pid}"), log=vlog)
            floor = agent.log.window_floor
            for other, day_i, interval, ts in contacts_of[pid]:
                # a contact who is already (or simultaneously) a patient has
                # no use for the notification: not a detection target
                if other in diagnosed or other in batch:
                    continue
                if floor is not None and ts < floor:
                    continue
                truth_set.add((other, pid, day_i, interval))
                truth_today += 1

        store.publish(now_day=day_abs)
        fresh = store.download(cursor)
        cursor = store.epoch

        detected_today = false_today = fine_sessions = warnings_today = 0
        now_ts = day_abs * SECONDS_PER_DAY + SECONDS_PER_DAY - 1
        verify_started = time.perf_counter()
        if fresh:
            for uid in range(config.users):
                if uid in diagnosed:
                    continue
                verify_user_days += 1
                agent = world.agents[uid]
                result = coarse_match(agent.log.exchanges(), fresh, log=vlog)
                for hit in result.hits:
                    rec = hit.record
                    pid = rpi_owner[rec.rpi]
                    user_pos = agent.positions.get(rec.coarse_time)
                    if user_pos is None:
                        continue
                    rng = user_rngs.setdefault(
                        uid, det_rng(config.seed, f"user/{uid}"))
                    outcome = run_fine_session(
                        store, rec, patient_ctx[pid],
                        UserSession(suite=suite, position=user_pos,
                                    sizes=config.fine_sizes,
                                    authority_keys=authority_keys, rng=rng),
                        now_ts)
                    fine_sessions += 1
                    if outcome.verdict != "inside":
                        continue
                    key = (uid, pid, rec.coarse_time[0], rec.coarse_time[1])
                    if key in detected_set:
                        continue
                    detected_set.add(key)
                    detected_today += 1
                    if key not in truth_set:
                        false_today += 1
                    rssi = round(statistics.fmean(e.rssi for e in hit.evidence))
                    factors = derive_factors(
                        [(rec.multiplicity, rssi)],
                        days_since=day_abs - rec.coarse_time[0],
                        trv=config.transmission_level)
                    if should_warn(risk_score(factors), config.warn_threshold) \
                            and uid not in warned:
                        warned.add(uid)
                        warnings_today += 1
        verify_seconds += time.perf_counter() - verify_started

        rows.append(DailyRow(
            day=day_abs, true_contacts=truth_today,
            detected_contacts=detected_today, false_contacts=false_today,
            new_patients=len(new_patients), upload_records=upload_records,
            upload_bytes=upload_bytes, server_records=len(store.records()),
            download_records=len(fresh), fine_sessions=fine_sessions,
            warnings=warnings_today))

    timing = None
    if measure_timing:
        timing = {
            "run_seconds": round(time.perf_counter() - started, 6),
            "verify_seconds_total": round(verify_seconds, 6),
            "verify_user_days": verify_user_days,
            "verify_seconds_per_user_day":
                round(verify_seconds / verify_user_days, 9)
                if verify_user_days else 0.0,
        }
    return MetricsReport(strategy="filtered", config=config_dict(config),
                         rows=rows, timing=timing,
                         log_lines=vlog.lines if vlog else [])


def baseline_upload_lines(agent, region_digest_hex: str) -> list[str]:
    """Upload-everything strategy: one line per interval for every day of
    keys the device still holds, regardless of any contact."""
    lines = []
    for day in agent.keystore.days():
        rpik = derive_rpik(agent.keystore.dtk_for(day))
        for interval, rpi in enumerate(derive_day_rpis(rpik), start=1):
            lines.append(f"{rpi.hex()}\t{region_digest_hex}\t"
                         f"{day}:{interval}\t1")
    return lines


def run_baseline(config: SimConfig) -> MetricsReport:
    """Same world, no filtering: every patient publishes all 96 identifiers
    of every retained day. Download-side screening is identifier-only, so
    no location digests, no fine stage, no risk output here; the report
    carries the upload volume this strategy would cost."""
    world = World(config)
    epi_rng = det_rng(config.seed, "epidemic")
    region_digest = hide_location(
        world.grid.cell_index_planar(0.0, 0.0, config.resolution)).hex

    suspected: set[int] = set()
    sick: set[int] = set()
    diagnosed: set[int] = set()
    pending: dict[int, int] = {}
    seeds = epi_rng.sample(range(config.users), config.seed_patients)
    sick.update(seeds)
    for aid in seeds:
        pending[aid] = 0

    rows: list[DailyRow] = []
    server_records = 0
    for sim_day in range(config.days):
        day_abs = config.start_day_index + sim_day
        walkers = [a for a in range(config.users) if a not in diagnosed]
        events = world.simulate_day(sim_day, walkers, infectious=sick)
        for aid in sorted(events.exposures):
            if aid not in sick and aid not in diagnosed:
                suspected.add(aid)
        for aid in sorted(suspected):
            if epi_rng.random() < config.infection_rate:
                suspected.discard(aid)
                sick.add(aid)
                pending.setdefault(aid, sim_day + config.diagnosis_lag_days)
        new_patients = sorted(a for a, due in pending.items()
                              if due <= sim_day and a in sick)
        upload_records = upload_bytes = 0
        for pid in new_patients:
            sick.discard(pid)
            diagnosed.add(pid)
            lines = baseline_upload_lines(world.agents[pid], region_digest)
            upload_records += len(lines)
            upload_bytes += sum(len(line) + 1 for line in lines)
        server_records += upload_records
        rows.append(DailyRow(
            day=day_abs, true_contacts=0, detected_contacts=0,
            false_contacts=0, new_patients=len(new_patients),
            upload_records=upload_records, upload_bytes=upload_bytes,
            server_records=server_records, download_records=upload_records,
            fine_sessions=0, warnings=0))
    return MetricsReport(strategy="upload-all", config=config_dict(config),
                         rows=rows)


def upload_ratio(filtered: MetricsReport, baseline: MetricsReport) -> float:
    """Records the filtering strategy uploads per record the
    upload-everything strategy would."""
    denom = baseline.totals["upload_records"]
    if denom == 0:
        return 0.0
    return filtered.totals["upload_records"] / denom
