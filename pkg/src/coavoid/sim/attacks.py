"""Staged relay and replay attacks against the verification pipeline.

Each scenario plants a patient with one honest companion at a tap site and
a set of victims somewhere else. An attacker captures the patient's
broadcast identifier at the tap and re-emits it at the victims:

- wormhole-cross: re-emitted in real time in a different cell. The hidden
  location in the published record disagrees with what victims logged, so
  coarse screening flags the records instead of matching them.
- wormhole-samecell: re-emitted in real time inside the same cell but out
  of physical range. Coarse screening passes; the encrypted fine stage
  returns a non-negative decision value, so no contact is confirmed.
- replay: re-emitted at the tap site two or more intervals later. The
  hearing-time check rejects the match.

The honest companion verifies alongside the victims, showing detection
still works while the attack runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from ..edgeserver import ObfuscatedStore
from ..errors import ScenarioInvalid
from ..filtering import dedupe_policy, filter_and_recombine
from ..finematch import VerificationLog, coarse_match, gen_params
from ..geocell import hide_location
from ..keysched import (INTERVAL_SECONDS, INTERVALS_PER_DAY, SECONDS_PER_DAY,
                        derive_day_rpis, derive_rpik)
from .run import _suite_for
from .sessions import PatientSession, UserSession, run_fine_session
from .world import SimConfig, World, det_rng

KINDS = ("wormhole-cross", "wormhole-samecell", "replay")


@dataclass(frozen=True)
class AttackScenario:
    kind: str
    victims: int = 3
    tap_place: int = 0
    emit_place: Optional[int] = None      # cross only; None picks one
    delay_intervals: int = 0              # replay only; |delay| >= 2
    intervals: tuple[int, ...] = (10, 11, 12)

    def validate(self, config: SimConfig) -> None:
        if self.kind not in KINDS:
            raise ScenarioInvalid(f"unknown attack kind {self.kind!r}; "
                                  f"expected one of {KINDS}")
        if self.victims < 1:
            raise ScenarioInvalid("need at least one victim")
        if config.users < self.victims + 2:
            raise ScenarioInvalid(f"need users >= victims + 2, have "
                                  f"{config.users}")
        if not self.intervals:
            raise ScenarioInvalid("need at least one tap interval")
        if not (0 <= self.tap_place < config.places):
            raise ScenarioInvalid(f"tap_place {self.tap_place} out of range")
        if self.emit_place is not None \
                and not (0 <= self.emit_place < config.places):
            raise ScenarioInvalid(f"emit_place {self.emit_place} out of range")
        if self.kind == "replay":
            if abs(self.delay_intervals) < 2:
                raise ScenarioInvalid(
                    "replay delay must be at least 2 intervals; one interval "
                    "of skew is tolerated by the hearing-time check")
        elif self.delay_intervals != 0:
            raise ScenarioInvalid("wormhole scenarios re-emit in real time; "
                                  "delay_intervals must be 0")
        for interval in self.intervals:
            if not 1 <= interval <= INTERVALS_PER_DAY:
                raise ScenarioInvalid(f"interval {interval} outside 1..96")
            shifted = interval + self.delay_intervals
            if not 1 <= shifted <= INTERVALS_PER_DAY:
                raise ScenarioInvalid(f"re-emit interval {shifted} "
                                      f"outside 1..96")


@dataclass
class AttackReport:
    kind: str
    true_contacts: int = 0
    detected_contacts: int = 0
    false_contacts: int = 0
    coarse_hits: int = 0
    wormhole_suspects: int = 0
    replay_suspects: int = 0
    fine_sessions: int = 0
    fine_rejections: int = 0
    fine_outside: int = 0
    log_lines: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if k != "log_lines"}


def _same_cell_emit_point(world: World, tap) -> tuple[float, float]:
    """A point in the tap's cell at least two place radii from the tap
    centre, so victims stand well outside contact range."""
    cfg = world.config
    cx, cy = world.grid.cell_center_planar(tap.cell)
    need = 2.0 * cfg.place_radius_m
    for k in range(5):
        for step in range(12):
            theta = step * math.pi / 6.0
            radius = 30.0 * k
            x = cx + radius * math.cos(theta)
            y = cy + radius * math.sin(theta)
            if math.hypot(x - tap.x, y - tap.y) < need:
                continue
            cell = world.grid.cell_index_planar(x, y, cfg.resolution)
            if cell == tap.cell:
                return x, y
    raise ScenarioInvalid("no in-cell emit point clear of the tap site; "
                          "shrink place_radius_m or coarsen the resolution")


def _pick_cross_place(world: World, scenario: AttackScenario):
    tap = world.places[scenario.tap_place]
    if scenario.emit_place is not None:
        emit = world.places[scenario.emit_place]
        if emit.cell == tap.cell:
            raise ScenarioInvalid("emit place shares the tap cell; a cross-"
                                  "cell wormhole needs distinct cells")
        return emit
    for place in world.places:
        if place.cell != tap.cell:
            return place
    raise ScenarioInvalid("all places fall in one cell; add places or use a "
                          "finer resolution")


def run_attack(config: SimConfig, scenario: AttackScenario) -> AttackReport:
    scenario.validate(config)
    world = World(config)
    cfg = world.config
    suite = _suite_for(cfg.suite)
    store = ObfuscatedStore(rng=det_rng(cfg.seed, "store"))
    params = gen_params(*cfg.fine_sizes, rng=det_rng(cfg.seed, "params"))
    rng = det_rng(cfg.seed, "attack")
    vlog = VerificationLog()
    report = AttackReport(kind=scenario.kind)

    day_abs = cfg.start_day_index
    patient, companion = world.agents[0], world.agents[1]
    victims = [world.agents[2 + i] for i in range(scenario.victims)]
    tap = world.places[scenario.tap_place]

    if scenario.kind == "wormhole-cross":
        emit = _pick_cross_place(world, scenario)
        emit_xy = (emit.x, emit.y)
    elif scenario.kind == "wormhole-samecell":
        emit_xy = _same_cell_emit_point(world, tap)
    else:
        emit_xy = (tap.x, tap.y)
    emit_cell = world.grid.cell_index_planar(*emit_xy, cfg.resolution)
    emit_digest = hide_location(emit_cell)

    for agent in (patient, companion, *victims):
        dtk = agent.keystore.advance_to(day_abs)
        agent.day_rpis = derive_day_rpis(derive_rpik(dtk))

    truth: set[tuple[int, int, int, int]] = set()
    for interval in scenario.intervals:
        base_ts = day_abs * SECONDS_PER_DAY + (interval - 1) * INTERVAL_SECONDS
        px, py = tap.x + rng.uniform(-5, 5), tap.y + rng.uniform(-5, 5)
        cx, cy = px + 2.0, py                # companion within arm's reach
        patient.positions[(day_abs, interval)] = world.codec.encode(px, py)
        companion.positions[(day_abs, interval)] = world.codec.encode(cx, cy)
        rpi_p = patient.day_rpis[interval - 1]
        rpi_c = companion.day_rpis[interval - 1]
        patient.log.record_broadcast(base_ts, rpi_p)
        companion.log.record_broadcast(base_ts, rpi_c)
        for j in range(3):
            ts = base_ts + 120 * j
            patient.log.record_exchange(ts, rpi_c, tap.digest, -44)
            companion.log.record_exchange(ts, rpi_p, tap.digest, -44)
        truth.add((companion.agent_id, patient.agent_id, day_abs, interval))

        # the attacker re-emits the captured identifier at the victims
        shifted = interval + scenario.delay_intervals
        emit_ts = day_abs * SECONDS_PER_DAY + (shifted - 1) * INTERVAL_SECONDS
        for v, victim in enumerate(victims):
            vx, vy = emit_xy[0] + 1.5 * v, emit_xy[1]
            victim.positions[(day_abs, shifted)] = world.codec.encode(vx, vy)
            if shifted != interval:
                victim.positions.setdefault(
                    (day_abs, interval), world.codec.encode(vx, vy))
            for j in range(2):
                victim.log.record_exchange(emit_ts + 120 * j, rpi_p,
                                           emit_digest, -52)

    deduped = dedupe_policy(filter_and_recombine(
        patient.log.exchanges(), patient.log.broadcasts()))
    store.accept_upload(deduped)
    store.publish(now_day=day_abs)
    published = store.download(0)

    sk, pk = suite.keygen(det_rng(cfg.seed, "sign/0"))
    patient_session = PatientSession(
        params=params, suite=suite, sign_sk=sk, sign_pk=pk,
        positions=patient.positions, codec=world.codec,
        contact_radius_m=cfg.contact_radius_m,
        rng=det_rng(cfg.seed, "patient/0"), log=vlog)
    now_ts = day_abs * SECONDS_PER_DAY + SECONDS_PER_DAY - 1

    rpi_to_patient = {rec.rpi: patient.agent_id for rec in deduped}
    for verifier in (companion, *victims):
        result = coarse_match(verifier.log.exchanges(), published, log=vlog)
        report.coarse_hits += len(result.hits)
        report.wormhole_suspects += len(result.wormhole_suspects)
        report.replay_suspects += len(result.replay_suspects)
        user_rng = det_rng(cfg.seed, f"user/{verifier.agent_id}")
        for hit in result.hits:
            rec = hit.record
            position = verifier.positions.get(rec.coarse_time)
            if position is None:
                continue
            outcome = run_fine_session(
                store, rec, patient_session,
                UserSession(suite=suite, position=position,
                            sizes=cfg.fine_sizes, authority_keys={pk},
                            rng=user_rng),
                now_ts)
            report.fine_sessions += 1
            if outcome.verdict == "rejected":
                report.fine_rejections += 1
            elif outcome.verdict == "outside":
                report.fine_outside += 1
            elif outcome.verdict == "inside":
                key = (verifier.agent_id, rpi_to_patient[rec.rpi],
                       rec.coarse_time[0], rec.coarse_time[1])
                report.detected_contacts += 1
                if key not in truth:
                    report.false_contacts += 1

    report.true_contacts = len(truth)
    report.log_lines = vlog.lines
    return report
