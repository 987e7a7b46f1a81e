"""The danger-theory engine: monitors turn event windows into grounded
danger alarms, alarms seed danger zones via a causal-proximity score,
antigen-presenting captures co-deliver signal two, and the tick loop applies
the lifecycle laws with clonal expansion, quarantine responses, and sandbox
confirmation of suspects.

Responses are engine-initiated by definition and never feed the monitors,
so the engine cannot alarm on its own actions.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence

from .core import (
    Antigen,
    Detector,
    DetectorState,
    LifecycleParams,
    Pattern,
    SourceKind,
    Topology,
    clone_and_mutate,
    matches,
    signal2_permitted,
    step_detector,
)
from .errors import ConfigError, ContractViolation
from .events import EventKind, HostEvent
from .negative_selection import SelfSet


class AlarmCause(Enum):
    MEMORY_BAND = "MEMORY_BAND"
    DISK_RATE = "DISK_RATE"
    FILE_CHANGES = "FILE_CHANGES"
    ABNORMAL_TERMINATION = "ABNORMAL_TERMINATION"
    NONSELF_PRESENT = "NONSELF_PRESENT"


@dataclass(frozen=True)
class MonitorConfig:
    """Grounded danger monitors: memory band, disk rate, file-change burst,
    abnormal termination. ``window_seconds`` is the evaluation window."""

    memory_lo: float = 100.0
    memory_hi: float = 500.0
    disk_rate_max: float = 50.0
    file_change_baseline: float = 2.0
    file_change_multiplier: float = 2.0
    window_seconds: float = 1.0

    def __post_init__(self) -> None:
        if self.memory_lo >= self.memory_hi:
            raise ConfigError("memory band requires lo < hi")
        if self.file_change_multiplier <= 1.0:
            raise ConfigError("file_change_multiplier must exceed 1")
        if self.window_seconds <= 0:
            raise ConfigError("window_seconds must be positive")
        if self.disk_rate_max <= 0:
            raise ConfigError("disk_rate_max must be positive")


@dataclass(frozen=True)
class DangerAlarm:
    """A grounded damage indication; seeds one danger zone."""

    emitter_id: str
    time: float
    strength: float
    emitter_resources: frozenset[str]
    emitter_start: float
    cause: AlarmCause

    def __post_init__(self) -> None:
        if not 0.0 < self.strength <= 1.0:
            raise ConfigError(f"alarm strength must be in (0,1], got {self.strength}")


@dataclass(frozen=True)
class ZoneConfig:
    """Causal-proximity weights (start-time, runtime overlap, shared
    resources) and the zone admission threshold."""

    w_time: float = 1.0 / 3.0
    w_overlap: float = 1.0 / 3.0
    w_resource: float = 1.0 / 3.0
    tau_start: float = 5.0
    theta: float = 0.6

    def __post_init__(self) -> None:
        if min(self.w_time, self.w_overlap, self.w_resource) < 0:
            raise ConfigError("proximity weights must be non-negative")
        if abs(self.w_time + self.w_overlap + self.w_resource - 1.0) > 1e-6:
            raise ConfigError("proximity weights must sum to 1")
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError("theta must lie in [0,1]")
        if self.tau_start <= 0:
            raise ConfigError("tau_start must be positive")


@dataclass(frozen=True)
class APCPresentation:
    """Antigens captured inside one danger zone, co-delivered with signal two."""

    alarm: DangerAlarm
    presented: tuple[Antigen, ...]
    signal_two: bool = True


@dataclass(frozen=True)
class Response:
    """Effector action: quarantine of a source. Always engine-initiated."""

    tick: int
    source_id: str
    detector_index: int
    kind: str = "QUARANTINE"
    engine_initiated: bool = True


def extract_danger(events: Sequence[HostEvent], cfg: MonitorConfig) -> list[DangerAlarm]:
    """Evaluate the monitors over one time-ordered window of events.

    Emits at most one alarm per violated monitor per emitter. Strength is
    the excess ratio over the violated threshold, clamped to 1; abnormal
    terminations always carry strength 1. Engine-initiated events are
    ignored outright, so responses can never raise new danger.
    """
    last = None
    for e in events:
        if last is not None and e.time < last:
            raise ContractViolation("extract_danger requires time-ordered events")
        last = e.time

    per_source: dict[str, list[HostEvent]] = {}
    for e in events:
        if e.engine_initiated:
            continue
        per_source.setdefault(e.source_id, []).append(e)

    alarms: list[DangerAlarm] = []
    for source_id, evs in per_source.items():
        start = min(e.time for e in evs)
        resources = frozenset().union(*(e.resources for e in evs))

        def add(cause: AlarmCause, time: float, strength: float) -> None:
            alarms.append(
                DangerAlarm(
                    emitter_id=source_id,
                    time=time,
                    strength=min(1.0, strength),
                    emitter_resources=resources,
                    emitter_start=start,
                    cause=cause,
                )
            )

        mem_excess, mem_time = 0.0, None
        disk_excess, disk_time = 0.0, None
        changes = 0
        change_time = None
        term_time = None
        for e in evs:
            if e.kind is EventKind.METRIC_MEM:
                if e.value > cfg.memory_hi:
                    excess = (e.value - cfg.memory_hi) / cfg.memory_hi
                elif e.value < cfg.memory_lo:
                    excess = (cfg.memory_lo - e.value) / cfg.memory_lo
                else:
                    continue
                if excess > mem_excess:
                    mem_excess = excess
                if mem_time is None:
                    mem_time = e.time
            elif e.kind is EventKind.METRIC_DISK:
                if e.value > cfg.disk_rate_max:
                    excess = (e.value - cfg.disk_rate_max) / cfg.disk_rate_max
                    if excess > disk_excess:
                        disk_excess = excess
                    if disk_time is None:
                        disk_time = e.time
            elif e.kind is EventKind.FILE_CHANGE:
                changes += 1
                change_time = e.time if change_time is None else change_time
            elif e.abnormal_termination and term_time is None:
                term_time = e.time

        if mem_time is not None:
            add(AlarmCause.MEMORY_BAND, mem_time, mem_excess)
        if disk_time is not None:
            add(AlarmCause.DISK_RATE, disk_time, disk_excess)
        threshold = cfg.file_change_multiplier * cfg.file_change_baseline
        if changes > threshold:
            strength = 1.0 if threshold == 0 else (changes - threshold) / threshold
            add(AlarmCause.FILE_CHANGES, change_time, strength)
        if term_time is not None:
            add(AlarmCause.ABNORMAL_TERMINATION, term_time, 1.0)
    return alarms


def _overlap_fraction(interval: tuple[float, float], window: tuple[float, float]) -> float:
    t0, t1 = interval
    w0, w1 = min(window), max(window)
    if t1 == t0:
        return 1.0 if w0 <= t0 <= w1 else 0.0
    inter = min(t1, w1) - max(t0, w0)
    return max(0.0, inter) / (t1 - t0)


def _jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    union = a | b
    if not union:
        # No resource evidence on either side counts as no similarity.
        return 0.0
    return len(a & b) / len(union)


def proximity(antigen: Antigen, alarm: DangerAlarm, cfg: ZoneConfig) -> float:
    """Causal-proximity score in [0,1]: the artificial 'near' of a danger zone.

    Weighs start-time closeness (exponential decay), runtime overlap with
    the emitter's activity window, and shared-resource similarity.
    """
    start_term = math.exp(-abs(antigen.start_time - alarm.emitter_start) / cfg.tau_start)
    overlap = _overlap_fraction(antigen.active_interval, (alarm.emitter_start, alarm.time))
    resource = _jaccard(antigen.resources, alarm.emitter_resources)
    score = cfg.w_time * start_term + cfg.w_overlap * overlap + cfg.w_resource * resource
    return min(1.0, max(0.0, score))


def build_danger_zone(
    alarm: DangerAlarm, pool: Sequence[Antigen], cfg: ZoneConfig
) -> APCPresentation:
    """Capture the pool antigens with proximity >= theta; the emitter's own
    antigen is always captured regardless of score."""
    presented = tuple(
        a
        for a in pool
        if a.source_id == alarm.emitter_id or proximity(a, alarm, cfg) >= cfg.theta
    )
    return APCPresentation(alarm=alarm, presented=presented)


def apc_present(
    apc: APCPresentation,
    repertoire: Sequence[Detector],
    r: int,
    topology: Topology,
) -> list[tuple[bool, bool]]:
    """Per-detector (s1, s2) stimuli from one presentation.

    A detector matching any presented antigen receives signal one; signal
    two rides along exactly when the topology permits APC-sourced
    co-stimulation for that detector's state.
    """
    stimuli = []
    for d in repertoire:
        if d.state is DetectorState.DEAD:
            stimuli.append((False, False))
            continue
        s1 = any(matches(d.receptor, a.pattern, r) for a in apc.presented)
        s2 = (
            s1
            and apc.signal_two
            and signal2_permitted(topology, SourceKind.APC, d.state)
        )
        stimuli.append((s1, s2))
    return stimuli


def sandbox_confirm(
    suspect_source: str, recorded_events: Iterable[HostEvent], cfg: MonitorConfig
) -> bool:
    """Replay a suspect's recorded events in isolation; True iff the
    monitors fire there. An empty history never confirms."""
    windows: dict[int, list[HostEvent]] = {}
    for e in recorded_events:
        if e.source_id != suspect_source:
            continue
        windows.setdefault(int(e.time // cfg.window_seconds), []).append(e)
    for idx in sorted(windows):
        if extract_danger(sorted(windows[idx], key=lambda e: e.time), cfg):
            return True
    return False


@dataclass(frozen=True)
class EngineConfig:
    pattern_length: int = 32
    match_threshold: int = 10
    topology: Topology = Topology.DANGER
    lifecycle: LifecycleParams = LifecycleParams()
    zone: ZoneConfig = ZoneConfig()
    monitor: MonitorConfig = MonitorConfig()
    activation_threshold: int = 3
    n_clones: int = 3
    mutation_rate: float = 0.05
    tolerization_ticks: int = 1
    influx_per_tick: int = 0
    ns_danger_source: bool = False
    training_self: SelfSet | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.match_threshold <= self.pattern_length:
            raise ConfigError("match_threshold must lie in 1..pattern_length")
        if self.tolerization_ticks < 1:
            raise ConfigError("tolerization_ticks must be >= 1")
        if self.influx_per_tick < 0 or self.n_clones < 0:
            raise ConfigError("influx_per_tick and n_clones must be >= 0")


class DangerEngine:
    """Deterministic tick loop over an ordered event stream.

    Per tick: ingest events into the antigen pool, extract danger alarms,
    build zones and presentations, merge APC and ambient stimuli (signal two
    from any capture wins), step every detector, expand newly activated
    clones, and emit quarantine responses. Quarantine removes a source's
    antigen and suppresses its further events.
    """

    def __init__(self, cfg: EngineConfig, repertoire: Iterable[Detector] = ()):
        self.cfg = cfg
        self.tick_index = 0
        self.pool: dict[str, Antigen] = {}
        self.detectors: list[Detector] = []
        self._matched: list[set[str]] = []
        self._unpaired: list[int] = []
        self._episode_confirmed: list[bool] = []
        self._ns_stim: list[int] = []
        self._ns_seen: list[set[tuple[str, str]]] = []
        self.quarantined: set[str] = set()
        self.source_events: dict[str, list[HostEvent]] = {}
        self.source_starts: dict[str, float] = {}
        self.source_resources: dict[str, frozenset[str]] = {}
        self.alarm_log: list[tuple[int, DangerAlarm]] = []
        self.response_log: list[Response] = []
        self.audit: list[tuple[int, str, str, str, str]] = []
        self._confirmed_sources: set[str] = set()
        self._rng = random.Random(cfg.seed)
        for d in repertoire:
            self._add_detector(d)

    # -- repertoire and pool upkeep -------------------------------------

    def _add_detector(self, d: Detector) -> None:
        if len(d.receptor) != self.cfg.pattern_length:
            raise ConfigError("detector receptor length differs from engine pattern length")
        r = self.cfg.match_threshold
        self.detectors.append(d)
        self._matched.append(
            {
                sid
                for sid, a in self.pool.items()
                if matches(d.receptor, a.pattern, r)
            }
        )
        self._unpaired.append(0)
        self._episode_confirmed.append(False)
        self._ns_stim.append(0)
        self._ns_seen.append(set())

    def _set_antigen(self, antigen: Antigen) -> None:
        r = self.cfg.match_threshold
        sid = antigen.source_id
        self.pool[sid] = antigen
        for i, d in enumerate(self.detectors):
            if d.state is DetectorState.DEAD:
                continue
            if matches(d.receptor, antigen.pattern, r):
                self._matched[i].add(sid)
            else:
                self._matched[i].discard(sid)

    def _ingest(self, event: HostEvent) -> None:
        sid = event.source_id
        self.source_events.setdefault(sid, []).append(event)
        if sid not in self.source_starts:
            self.source_starts[sid] = event.time
        self.source_resources[sid] = self.source_resources.get(sid, frozenset()) | event.resources
        existing = self.pool.get(sid)
        if event.pattern is not None:
            if existing is None or existing.pattern != event.pattern:
                self._set_antigen(
                    Antigen(
                        pattern=event.pattern,
                        source_id=sid,
                        start_time=event.time,
                        active_interval=(event.time, event.time),
                        resources=event.resources,
                    )
                )
                return
        if existing is not None and event.time >= existing.active_interval[0]:
            self.pool[sid] = replace(
                existing,
                active_interval=(existing.active_interval[0], event.time),
                resources=existing.resources | event.resources,
            )

    def _quarantine(self, source_id: str) -> None:
        self.quarantined.add(source_id)
        self.pool.pop(source_id, None)
        for matched in self._matched:
            matched.discard(source_id)

    # -- danger extraction ------------------------------------------------

    def _enrich(self, alarm: DangerAlarm) -> DangerAlarm:
        # Replace the window-local emitter context with what the engine has
        # accumulated for that source across the run.
        return replace(
            alarm,
            emitter_start=self.source_starts.get(alarm.emitter_id, alarm.emitter_start),
            emitter_resources=self.source_resources.get(
                alarm.emitter_id, alarm.emitter_resources
            ),
        )

    def _nonself_alarms(self, events: Sequence[HostEvent], time: float) -> list[DangerAlarm]:
        """Hybrid mode: threshold matches from the repertoire itself raise
        presence-of-nonself alarms that seed zones like any other danger."""
        alarms = []
        r = self.cfg.match_threshold
        for event in events:
            if event.pattern is None or event.engine_initiated:
                continue
            identity = (event.source_id, event.pattern.bits)
            for i, d in enumerate(self.detectors):
                if d.state in (DetectorState.DEAD, DetectorState.IMMATURE):
                    continue
                if identity in self._ns_seen[i]:
                    continue
                if not matches(d.receptor, event.pattern, r):
                    continue
                self._ns_seen[i].add(identity)
                self._ns_stim[i] += 1
                if self._ns_stim[i] >= d.activation_threshold:
                    self._ns_stim[i] = 0
                    alarms.append(
                        DangerAlarm(
                            emitter_id=event.source_id,
                            time=time,
                            strength=1.0,
                            emitter_resources=self.source_resources.get(
                                event.source_id, event.resources
                            ),
                            emitter_start=self.source_starts.get(event.source_id, time),
                            cause=AlarmCause.NONSELF_PRESENT,
                        )
                    )
        return alarms

    def _influx(self) -> None:
        """Trickle of fresh detectors, pre-censored against the training
        self set, entering service mature. Keeps coverage alive as the
        repertoire erodes under drift-driven tolerization."""
        r = self.cfg.match_threshold
        training = self.cfg.training_self.patterns if self.cfg.training_self else frozenset()
        for _ in range(self.cfg.influx_per_tick):
            receptor = Pattern.random(self.cfg.pattern_length, self._rng)
            if any(matches(receptor, s, r) for s in training):
                continue
            self._add_detector(
                Detector.mature(receptor, activation_threshold=self.cfg.activation_threshold)
            )

    # -- the tick loop ----------------------------------------------------

    def tick(self, events: Sequence[HostEvent]) -> list[Response]:
        t = self.tick_index
        live_events = [e for e in events if e.source_id not in self.quarantined]
        for e in live_events:
            self._ingest(e)

        alarms = [self._enrich(a) for a in extract_danger(live_events, self.cfg.monitor)]
        if self.cfg.ns_danger_source:
            alarms.extend(self._nonself_alarms(live_events, t * self.cfg.monitor.window_seconds))
        for a in alarms:
            self.alarm_log.append((t, a))
            self.audit.append((t, "ALARM", a.cause.name, a.emitter_id, "-"))

        pool_list = list(self.pool.values())
        presentations = [build_danger_zone(a, pool_list, self.cfg.zone) for a in alarms]
        presented_sources: set[str] = set()
        for p in presentations:
            presented_sources.update(a.source_id for a in p.presented)

        newly_activated: list[int] = []
        for i, d in enumerate(self.detectors):
            if d.state is DetectorState.DEAD:
                continue
            matched = self._matched[i]
            apc_hit = bool(matched & presented_sources)
            s2 = apc_hit and signal2_permitted(self.cfg.topology, SourceKind.APC, d.state)
            s1 = apc_hit or bool(matched - presented_sources)
            resting = d.state in (DetectorState.MATURE_RESTING, DetectorState.MEMORY_RESTING)
            if s1 and not s2 and resting:
                self._unpaired[i] += 1
                if self._unpaired[i] < self.cfg.tolerization_ticks:
                    s1 = False  # death deferred; counts as a quiet tick
            else:
                self._unpaired[i] = 0
            stepped = step_detector(
                d, s1, s2, self._episode_confirmed[i], self.cfg.lifecycle
            )
            self.detectors[i] = stepped
            if d.state is not DetectorState.ACTIVATED and stepped.state is DetectorState.ACTIVATED:
                newly_activated.append(i)
            if d.state is DetectorState.ACTIVATED and stepped.state is not DetectorState.ACTIVATED:
                self._episode_confirmed[i] = False
            if stepped.state is DetectorState.DEAD:
                self._matched[i].clear()
                self._unpaired[i] = 0

        for i in newly_activated:
            for suspect in sorted(self._matched[i] & presented_sources):
                if suspect in self._confirmed_sources or sandbox_confirm(
                    suspect, self.source_events.get(suspect, ()), self.cfg.monitor
                ):
                    self._confirmed_sources.add(suspect)
                    self._episode_confirmed[i] = True
                    break

        for i in newly_activated:
            if self.cfg.n_clones:
                seed = self._rng.randrange(2**32)
                for clone in clone_and_mutate(
                    self.detectors[i], self.cfg.n_clones, self.cfg.mutation_rate, seed
                ):
                    self._add_detector(clone)

        responses: list[Response] = []
        for i, d in enumerate(self.detectors):
            if d.state is not DetectorState.ACTIVATED:
                continue
            for sid in sorted(self._matched[i]):
                if sid not in self.pool:
                    continue
                responses.append(Response(tick=t, source_id=sid, detector_index=i))
                self.audit.append((t, "RESPONSE", "QUARANTINE", sid, str(i)))
                self._quarantine(sid)

        self._influx()
        self.response_log.extend(responses)
        self.tick_index += 1
        return responses

    def run(self, events: Sequence[HostEvent], n_ticks: int | None = None) -> list[Response]:
        """Drive the loop over a whole log, one window per tick."""
        window = self.cfg.monitor.window_seconds
        by_tick: dict[int, list[HostEvent]] = {}
        for e in events:
            by_tick.setdefault(int(e.time // window), []).append(e)
        last = max(by_tick, default=-1) + 1
        total = last if n_ticks is None else max(n_ticks, last)
        all_responses = []
        for t in range(total):
            all_responses.extend(self.tick(by_tick.get(t, [])))
        return all_responses

    def audit_lines(self) -> list[str]:
        return ["\t".join(str(f) for f in entry) for entry in self.audit]
