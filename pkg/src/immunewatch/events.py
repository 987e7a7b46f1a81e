"""Host event logs: data model, line format, and the synthetic scenario
generator that produces labeled event streams for the harness.

Log format (one record per line, tab-separated, header ``#schema=ais-events-v1``):
    time  source_id  kind  value  pattern|-  resources|-  engine_initiated(0/1)
Label tables are lines of ``source_id<TAB>SELF|NONSELF``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .core import Pattern, TruthLabel
from .errors import ConfigError, DataError

EVENT_SCHEMA = "ais-events-v1"
SIGABRT = 6.0


class EventKind(Enum):
    METRIC_MEM = "METRIC_MEM"
    METRIC_DISK = "METRIC_DISK"
    FILE_CHANGE = "FILE_CHANGE"
    PROC_TERM = "PROC_TERM"
    CONNECTION = "CONNECTION"
    HEARTBEAT = "HEARTBEAT"


@dataclass(frozen=True)
class HostEvent:
    """One timestamped observation from a host or network log."""

    time: float
    source_id: str
    kind: EventKind
    value: float = 0.0
    pattern: Pattern | None = None
    resources: frozenset[str] = frozenset()
    engine_initiated: bool = False

    def __post_init__(self) -> None:
        if self.time < 0:
            raise DataError(f"event time must be >= 0, got {self.time}")
        if self.kind is EventKind.CONNECTION and self.pattern is None:
            raise DataError("CONNECTION events must carry a pattern")

    @property
    def abnormal_termination(self) -> bool:
        return self.kind is EventKind.PROC_TERM and self.value != 0


def _check_identifier(name: str, value: str) -> str:
    if not value or "\t" in value or "\n" in value or "," in value:
        raise DataError(f"{name} must be non-empty and free of tabs/commas: {value!r}")
    return value


def serialize_events(events: Iterable[HostEvent]) -> str:
    """Canonical text form; floats use their shortest round-trip repr."""
    lines = [f"#schema={EVENT_SCHEMA}"]
    for e in events:
        pattern = e.pattern.bits if e.pattern is not None else "-"
        resources = ",".join(sorted(_check_identifier("resource", r) for r in e.resources)) or "-"
        lines.append(
            "\t".join(
                (
                    repr(e.time),
                    _check_identifier("source_id", e.source_id),
                    e.kind.value,
                    repr(e.value),
                    pattern,
                    resources,
                    "1" if e.engine_initiated else "0",
                )
            )
        )
    return "\n".join(lines) + "\n"


def _parse_float(raw: str, lineno: int, field_name: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise DataError(f"line {lineno}: bad {field_name} value {raw!r}") from None


def parse_event_log(text: str | Iterable[str]) -> list[HostEvent]:
    """Parse a line-delimited event log; validates field shape and time order."""
    lines = text.splitlines() if isinstance(text, str) else list(text)
    events: list[HostEvent] = []
    last_time = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            if line.startswith("#schema=") and line != f"#schema={EVENT_SCHEMA}":
                raise DataError(f"line {lineno}: unsupported schema {line[8:]!r}")
            continue
        parts = line.split("\t")
        if len(parts) != 7:
            raise DataError(f"line {lineno}: expected 7 fields, got {len(parts)}")
        time = _parse_float(parts[0], lineno, "time")
        if last_time is not None and time < last_time:
            raise DataError(f"line {lineno}: out-of-order timestamp {time}")
        last_time = time
        try:
            kind = EventKind(parts[2])
        except ValueError:
            raise DataError(f"line {lineno}: unknown event kind {parts[2]!r}") from None
        value = _parse_float(parts[3], lineno, "value")
        if parts[4] == "-":
            pattern = None
        else:
            try:
                pattern = Pattern(parts[4])
            except ConfigError as exc:
                raise DataError(f"line {lineno}: bad pattern field: {exc}") from None
        resources = frozenset() if parts[5] == "-" else frozenset(parts[5].split(","))
        if parts[6] not in ("0", "1"):
            raise DataError(f"line {lineno}: engine_initiated must be 0 or 1, got {parts[6]!r}")
        try:
            events.append(
                HostEvent(
                    time=time,
                    source_id=parts[1],
                    kind=kind,
                    value=value,
                    pattern=pattern,
                    resources=resources,
                    engine_initiated=parts[6] == "1",
                )
            )
        except DataError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
    return events


def serialize_labels(labels: dict[str, TruthLabel]) -> str:
    lines = [f"{sid}\t{label.value}" for sid, label in sorted(labels.items())]
    return "\n".join(lines) + ("\n" if lines else "")


def parse_labels(text: str) -> dict[str, TruthLabel]:
    labels: dict[str, TruthLabel] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or parts[1] not in ("SELF", "NONSELF"):
            raise DataError(f"label line {lineno}: expected 'source<TAB>SELF|NONSELF'")
        labels[parts[0]] = TruthLabel(parts[1])
    return labels


@dataclass(frozen=True)
class MetricProfile:
    """Per-tick metric behaviour of one source class."""

    mem_value: float
    mem_jitter: float
    disk_rate: float
    disk_jitter: float
    file_changes_per_tick: int = 0
    abnormal_term_prob: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.abnormal_term_prob <= 1.0:
            raise ConfigError("abnormal_term_prob must be in [0,1]")
        if self.file_changes_per_tick < 0:
            raise ConfigError("file_changes_per_tick must be >= 0")


# Defaults sit well inside / outside the default monitor band (100..500 mem,
# 50 ops/s disk, file threshold 2*2 per window).
SELF_PROFILE = MetricProfile(mem_value=300.0, mem_jitter=20.0, disk_rate=10.0, disk_jitter=3.0)
ATTACK_PROFILE = MetricProfile(
    mem_value=1000.0,
    mem_jitter=50.0,
    disk_rate=120.0,
    disk_jitter=10.0,
    file_changes_per_tick=6,
    abnormal_term_prob=0.25,
)


@dataclass(frozen=True)
class ScenarioSpec:
    """Deterministic synthetic stream: drifting self sources plus attackers."""

    duration_ticks: int
    n_self_sources: int
    n_attack_sources: int
    self_profile: MetricProfile = SELF_PROFILE
    attack_profile: MetricProfile = ATTACK_PROFILE
    drift: float = 0.0
    attack_correlation: bool = True
    pattern_length: int = 32
    window_seconds: float = 1.0
    attack_start_tick: int | None = None

    def __post_init__(self) -> None:
        if self.duration_ticks < 1:
            raise ConfigError("duration_ticks must be >= 1")
        if min(self.n_self_sources, self.n_attack_sources) < 0:
            raise ConfigError("source counts must be >= 0")
        if not 0.0 <= self.drift <= 1.0:
            raise ConfigError("drift must be a probability")
        if self.window_seconds <= 0:
            raise ConfigError("window_seconds must be positive")
        if self.n_attack_sources > 0 and self.n_self_sources == 0 and not self.attack_correlation:
            raise ConfigError("uncorrelated attacks need self sources to act as victims")

    @property
    def first_attack_tick(self) -> int:
        if self.attack_start_tick is not None:
            return self.attack_start_tick
        return max(1, self.duration_ticks // 5)


@dataclass
class _Source:
    source_id: str
    pattern: Pattern
    resources: frozenset[str]
    start_tick: int
    label: TruthLabel
    profile: MetricProfile
    victim: _Source | None = None
    extra: list[HostEvent] = field(default_factory=list)


def generate_scenario(spec: ScenarioSpec, seed: int) -> tuple[list[HostEvent], dict[str, TruthLabel]]:
    """Produce an event log plus ground-truth labels, deterministic per seed.

    Attack sources emit out-of-band metrics and abnormal terminations. With
    ``attack_correlation`` the attacker itself emits the damage, planting
    causal proximity between danger alarms and the attack antigen; without
    it the damage is routed through an unrelated self source (a victim),
    leaving the attack antigen causally decoupled.
    """
    rng = random.Random(seed)
    window = spec.window_seconds

    selves = [
        _Source(
            source_id=f"self-{i:03d}",
            pattern=Pattern.random(spec.pattern_length, rng),
            resources=frozenset({f"res:self-{i:03d}"}),
            start_tick=0,
            label=TruthLabel.SELF,
            profile=spec.self_profile,
        )
        for i in range(spec.n_self_sources)
    ]
    attacks = []
    for i in range(spec.n_attack_sources):
        victim = None
        if not spec.attack_correlation:
            victim = selves[rng.randrange(len(selves))]
        attacks.append(
            _Source(
                source_id=f"attack-{i:03d}",
                pattern=Pattern.random(spec.pattern_length, rng),
                resources=frozenset({f"res:attack-{i:03d}"}),
                start_tick=spec.first_attack_tick + 2 * i,
                label=TruthLabel.NONSELF,
                profile=spec.attack_profile,
                victim=victim,
            )
        )

    events: list[HostEvent] = []

    def emit_metrics(src: _Source, emitter: _Source, t: float) -> None:
        p = src.profile
        events.append(
            HostEvent(t, emitter.source_id, EventKind.METRIC_MEM,
                      value=rng.gauss(p.mem_value, p.mem_jitter), resources=emitter.resources)
        )
        events.append(
            HostEvent(t, emitter.source_id, EventKind.METRIC_DISK,
                      value=rng.gauss(p.disk_rate, p.disk_jitter), resources=emitter.resources)
        )
        for _ in range(p.file_changes_per_tick):
            events.append(
                HostEvent(t, emitter.source_id, EventKind.FILE_CHANGE,
                          value=1.0, resources=emitter.resources)
            )
        if p.abnormal_term_prob and rng.random() < p.abnormal_term_prob:
            events.append(
                HostEvent(t, emitter.source_id, EventKind.PROC_TERM,
                          value=SIGABRT, resources=emitter.resources)
            )

    for tick in range(spec.duration_ticks):
        t = tick * window
        for src in selves:
            if tick > src.start_tick and spec.drift and rng.random() < spec.drift:
                src.pattern = Pattern.random(spec.pattern_length, rng)
            events.append(
                HostEvent(t, src.source_id, EventKind.CONNECTION,
                          pattern=src.pattern, resources=src.resources)
            )
            emit_metrics(src, src, t)
        for src in attacks:
            if tick < src.start_tick:
                continue
            events.append(
                HostEvent(t, src.source_id, EventKind.CONNECTION,
                          pattern=src.pattern, resources=src.resources)
            )
            if src.victim is None:
                emit_metrics(src, src, t)
            else:
                emit_metrics(src, src.victim, t)

    labels = {s.source_id: s.label for s in selves + attacks}
    return events, labels
