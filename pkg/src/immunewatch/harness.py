"""Experiment driver: runs the negative-selection baseline against the
danger engine on labeled event streams, probes detector-count scaling,
and simulates the six historical signal topologies on a three-class
antigen scenario.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, fields, replace
from enum import Enum
from pathlib import Path

from .core import (
    Antigen,
    Detector,
    DetectorState,
    LifecycleParams,
    Pattern,
    SourceKind,
    Topology,
    TruthLabel,
    match_set,
    matches,
    signal2_permitted,
    step_detector,
)
from .engine import (
    AlarmCause,
    DangerAlarm,
    DangerEngine,
    EngineConfig,
    MonitorConfig,
    ZoneConfig,
    build_danger_zone,
)
from .errors import ConfigError, DataError
from .events import (
    EventKind,
    HostEvent,
    ScenarioSpec,
    generate_scenario,
    parse_event_log,
    parse_labels,
)
from .negative_selection import (
    ALWAYS_YES,
    SelfSet,
    censor,
    generate_detectors,
    ns_detect,
)

DETECTOR_SEED_OFFSET = 1000
ENGINE_SEED_OFFSET = 2000
SCALE_SELF_SEED_OFFSET = 3000
SCALE_DETECTOR_SEED_OFFSET = 4000


class Mode(Enum):
    NS_ONLY = "NS_ONLY"
    DANGER = "DANGER"
    HYBRID = "HYBRID"


@dataclass(frozen=True)
class RunConfig:
    """Flat run configuration; mirrors the key=value config file format."""

    mode: Mode = Mode.DANGER
    topology: Topology = Topology.DANGER
    pattern_length: int = 32
    match_threshold: int = 10
    activation_threshold: int = 3
    tau_effector: int = 3
    decay: int = 1
    maturation_ticks: int = 2
    w_time: float = 1.0 / 3.0
    w_overlap: float = 1.0 / 3.0
    w_resource: float = 1.0 / 3.0
    tau_start: float = 5.0
    theta: float = 0.6
    memory_lo: float = 100.0
    memory_hi: float = 500.0
    disk_rate_max: float = 50.0
    file_change_baseline: float = 2.0
    file_change_multiplier: float = 2.0
    window_seconds: float = 1.0
    detector_budget: int = 1024
    n_clones: int = 3
    mutation_rate: float = 0.05
    tolerization_ticks: int = 1
    influx_per_tick: int = 4
    training_ticks: int = 50
    seed: int = 0
    events_path: str | None = None
    labels_path: str | None = None
    session_path: str | None = None
    duration_ticks: int = 500
    n_self_sources: int = 90
    n_attack_sources: int = 10
    drift: float = 0.02
    attack_correlation: bool = True
    attack_start_tick: int | None = None
    self_sizes: tuple[int, ...] = (16, 64, 256)
    coverage_target: float = 0.95
    scale_max_candidates: int = 20000

    def zone_config(self) -> ZoneConfig:
        return ZoneConfig(
            w_time=self.w_time,
            w_overlap=self.w_overlap,
            w_resource=self.w_resource,
            tau_start=self.tau_start,
            theta=self.theta,
        )

    def monitor_config(self) -> MonitorConfig:
        return MonitorConfig(
            memory_lo=self.memory_lo,
            memory_hi=self.memory_hi,
            disk_rate_max=self.disk_rate_max,
            file_change_baseline=self.file_change_baseline,
            file_change_multiplier=self.file_change_multiplier,
            window_seconds=self.window_seconds,
        )

    def lifecycle_params(self) -> LifecycleParams:
        return LifecycleParams(tau_effector=self.tau_effector, decay=self.decay)

    def scenario_spec(self) -> ScenarioSpec:
        return ScenarioSpec(
            duration_ticks=self.duration_ticks,
            n_self_sources=self.n_self_sources,
            n_attack_sources=self.n_attack_sources,
            drift=self.drift,
            attack_correlation=self.attack_correlation,
            pattern_length=self.pattern_length,
            window_seconds=self.window_seconds,
            attack_start_tick=self.attack_start_tick,
        )

    def engine_config(self, training_self: SelfSet | None) -> EngineConfig:
        return EngineConfig(
            pattern_length=self.pattern_length,
            match_threshold=self.match_threshold,
            topology=self.topology,
            lifecycle=self.lifecycle_params(),
            zone=self.zone_config(),
            monitor=self.monitor_config(),
            activation_threshold=self.activation_threshold,
            n_clones=self.n_clones,
            mutation_rate=self.mutation_rate,
            tolerization_ticks=self.tolerization_ticks,
            influx_per_tick=self.influx_per_tick,
            ns_danger_source=self.mode is Mode.HYBRID,
            training_self=training_self,
            seed=self.seed + ENGINE_SEED_OFFSET,
        )


def _parse_bool(raw: str) -> bool:
    if raw.lower() in ("1", "true", "yes", "on"):
        return True
    if raw.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _parse_int_list(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in raw.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {raw!r}") from None


def parse_config_text(text: str) -> dict[str, str]:
    """Read the flat key=value config format ('#' starts a comment)."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def config_from_mapping(values: dict[str, str]) -> RunConfig:
    converters = {
        "mode": lambda v: Mode(v.upper()),
        "topology": lambda v: Topology(v.upper()),
        "attack_correlation": _parse_bool,
        "self_sizes": _parse_int_list,
        "events_path": str,
        "labels_path": str,
        "session_path": str,
        "attack_start_tick": int,
    }
    by_name = {f.name: f for f in fields(RunConfig)}
    kwargs = {}
    for key, raw in values.items():
        if key not in by_name:
            raise ConfigError(f"unknown config key {key!r}")
        if key in converters:
            converter = converters[key]
        elif by_name[key].type in ("int", int):
            converter = int
        elif by_name[key].type in ("float", float):
            converter = float
        else:
            converter = str
        try:
            kwargs[key] = converter(raw)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from None
    return RunConfig(**kwargs)


def load_config(path: str | Path) -> RunConfig:
    return config_from_mapping(parse_config_text(Path(path).read_text()))


@dataclass(frozen=True)
class Report:
    """Source-granularity outcome of one run."""

    mode: Mode
    seed: int
    sources: int
    tp: int
    fp: int
    fn: int
    tn: int
    latency_ticks: int | None
    operator_calls: int
    alarms: int
    responses: int
    detector_budget: int
    detectors_after_censor: int
    detectors_final_live: int

    def __post_init__(self) -> None:
        if self.tp + self.fp + self.fn + self.tn != self.sources:
            raise ConfigError("confusion counts must sum to the labeled source count")


def format_report(report: Report) -> str:
    latency = "-" if report.latency_ticks is None else str(report.latency_ticks)
    lines = [
        f"mode: {report.mode.value}",
        f"seed: {report.seed}",
        f"sources: {report.sources}",
        f"tp: {report.tp}",
        f"fp: {report.fp}",
        f"fn: {report.fn}",
        f"tn: {report.tn}",
        f"latency_ticks: {latency}",
        f"operator_calls: {report.operator_calls}",
        f"alarms: {report.alarms}",
        f"responses: {report.responses}",
        f"detector_budget: {report.detector_budget}",
        f"detectors_after_censor: {report.detectors_after_censor}",
        f"detectors_final_live: {report.detectors_final_live}",
    ]
    return "\n".join(lines) + "\n"


@dataclass
class RunResult:
    report: Report
    audit_lines: list[str]
    responded_sources: frozenset[str]
    response_ticks: dict[str, int]


def training_self_set(
    events: list[HostEvent],
    labels: dict[str, TruthLabel],
    training_ticks: int,
    window_seconds: float,
) -> SelfSet:
    """Collect the self patterns observed during the training window."""
    horizon = training_ticks * window_seconds
    patterns = {
        e.pattern
        for e in events
        if e.pattern is not None
        and e.time < horizon
        and labels.get(e.source_id) is TruthLabel.SELF
    }
    return SelfSet(frozenset(patterns))


def _first_attack_tick(
    events: list[HostEvent], labels: dict[str, TruthLabel], window: float
) -> int | None:
    times = [e.time for e in events if labels.get(e.source_id) is TruthLabel.NONSELF]
    if not times:
        return None
    return int(min(times) // window)


def _score(
    labels: dict[str, TruthLabel],
    responded: set[str],
    response_ticks: dict[str, int],
    first_attack: int | None,
) -> tuple[int, int, int, int, int | None]:
    tp = fp = fn = tn = 0
    for sid, label in labels.items():
        hit = sid in responded
        if label is TruthLabel.NONSELF:
            tp, fn = tp + int(hit), fn + int(not hit)
        else:
            fp, tn = fp + int(hit), tn + int(not hit)
    latency = None
    attack_ticks = [
        t
        for sid, t in response_ticks.items()
        if labels.get(sid) is TruthLabel.NONSELF
    ]
    if attack_ticks and first_attack is not None:
        latency = max(0, min(attack_ticks) - first_attack)
    return tp, fp, fn, tn, latency


def run_experiment(
    cfg: RunConfig,
    events: list[HostEvent] | None = None,
    labels: dict[str, TruthLabel] | None = None,
    out_dir: str | Path | None = None,
) -> RunResult:
    """Execute one configured mode end-to-end over a labeled event log.

    Deterministic per config and seed. When ``out_dir`` is given, writes
    ``report.txt`` and the tab-separated ``audit.tsv`` trace there.
    """
    if events is None:
        if cfg.events_path is None:
            raise ConfigError("run requires events_path (or in-memory events)")
        events = parse_event_log(Path(cfg.events_path).read_text())
    if labels is None:
        if cfg.labels_path is None:
            raise ConfigError("run requires labels_path (or in-memory labels)")
        labels = parse_labels(Path(cfg.labels_path).read_text())
    if not labels:
        raise DataError("label table is empty")

    window = cfg.window_seconds
    selfset = training_self_set(events, labels, cfg.training_ticks, window)
    candidates = generate_detectors(
        cfg.detector_budget,
        cfg.pattern_length,
        cfg.seed + DETECTOR_SEED_OFFSET,
        activation_threshold=cfg.activation_threshold,
        maturation_ticks=cfg.maturation_ticks,
    )
    repertoire = censor(candidates, selfset, cfg.match_threshold)
    first_attack = _first_attack_tick(events, labels, window)

    if cfg.mode is Mode.NS_ONLY:
        stream = [
            Antigen(
                pattern=e.pattern,
                source_id=e.source_id,
                start_time=e.time,
                active_interval=(e.time, e.time),
                resources=e.resources,
            )
            for e in events
            if e.kind is EventKind.CONNECTION
        ]
        alarms, updated = ns_detect(repertoire, stream, cfg.match_threshold, ALWAYS_YES)
        audit: list[str] = []
        responded: set[str] = set()
        response_ticks: dict[str, int] = {}
        for alarm in alarms:
            tick = int(alarm.time // window)
            trigger = alarm.antigens[-1].source_id
            audit.append(f"{tick}\tALARM\tNS_MATCH\t{trigger}\t{alarm.detector_index}")
            if not alarm.confirmed:
                continue
            for a in alarm.antigens:
                if a.source_id not in responded:
                    responded.add(a.source_id)
                    response_ticks[a.source_id] = tick
                    audit.append(
                        f"{tick}\tRESPONSE\tCONFIRM\t{a.source_id}\t{alarm.detector_index}"
                    )
        operator_calls = len(alarms)
        alarm_count = len(alarms)
        response_count = len(responded)
        final_live = sum(d.state is not DetectorState.DEAD for d in updated)
    else:
        engine = DangerEngine(cfg.engine_config(selfset), repertoire)
        engine.run(events, n_ticks=cfg.duration_ticks)
        responded = {r.source_id for r in engine.response_log}
        response_ticks = {}
        for r in engine.response_log:
            response_ticks.setdefault(r.source_id, r.tick)
        audit = engine.audit_lines()
        operator_calls = 0
        alarm_count = len(engine.alarm_log)
        response_count = len(engine.response_log)
        final_live = sum(d.state is not DetectorState.DEAD for d in engine.detectors)

    tp, fp, fn, tn, latency = _score(labels, responded, response_ticks, first_attack)
    report = Report(
        mode=cfg.mode,
        seed=cfg.seed,
        sources=len(labels),
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        latency_ticks=latency,
        operator_calls=operator_calls,
        alarms=alarm_count,
        responses=response_count,
        detector_budget=cfg.detector_budget,
        detectors_after_censor=len(repertoire),
        detectors_final_live=final_live,
    )
    result = RunResult(
        report=report,
        audit_lines=audit,
        responded_sources=frozenset(responded),
        response_ticks=response_ticks,
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(format_report(report))
        (out / "audit.tsv").write_text("\n".join(audit) + ("\n" if audit else ""))
    return result


@dataclass
class CompareResult:
    result_a: RunResult
    result_b: RunResult
    fp_delta: int
    fn_delta: int
    latency_delta: int | None

    def summary(self) -> str:
        a, b = self.result_a.report, self.result_b.report
        latency = "-" if self.latency_delta is None else str(self.latency_delta)
        lines = [f"mode_a: {a.mode.value}", f"mode_b: {b.mode.value}"]
        for tag, rep in (("a", a), ("b", b)):
            lat = "-" if rep.latency_ticks is None else str(rep.latency_ticks)
            lines += [
                f"{tag}_tp: {rep.tp}",
                f"{tag}_fp: {rep.fp}",
                f"{tag}_fn: {rep.fn}",
                f"{tag}_tn: {rep.tn}",
                f"{tag}_latency_ticks: {lat}",
                f"{tag}_operator_calls: {rep.operator_calls}",
            ]
        lines += [
            f"fp_delta: {self.fp_delta}",
            f"fn_delta: {self.fn_delta}",
            f"latency_delta: {latency}",
        ]
        return "\n".join(lines) + "\n"


def compare_modes(
    cfg_a: RunConfig,
    cfg_b: RunConfig,
    events: list[HostEvent] | None = None,
    labels: dict[str, TruthLabel] | None = None,
) -> CompareResult:
    """Side-by-side runs on the same scenario, seeds, and detector budget."""
    shared = ("events_path", "labels_path", "seed", "detector_budget")
    for name in shared:
        if getattr(cfg_a, name) != getattr(cfg_b, name):
            raise ConfigError(f"compare requires matching {name}")
    result_a = run_experiment(cfg_a, events, labels)
    result_b = run_experiment(cfg_b, events, labels)
    a, b = result_a.report, result_b.report
    latency_delta = (
        b.latency_ticks - a.latency_ticks
        if a.latency_ticks is not None and b.latency_ticks is not None
        else None
    )
    return CompareResult(
        result_a=result_a,
        result_b=result_b,
        fp_delta=b.fp - a.fp,
        fn_delta=b.fn - a.fn,
        latency_delta=latency_delta,
    )


@dataclass(frozen=True)
class ScalingRow:
    self_size: int
    nonself_count: int
    detectors_needed: int | None
    survivors: int
    coverage: float
    saturated: bool


@dataclass
class ScalingResult:
    rows: list[ScalingRow]
    monotone_nondecreasing: bool

    def table(self) -> str:
        lines = ["self_size\tnonself\tdetectors_needed\tsurvivors\tcoverage\tsaturated"]
        for row in self.rows:
            needed = "-" if row.detectors_needed is None else str(row.detectors_needed)
            lines.append(
                f"{row.self_size}\t{row.nonself_count}\t{needed}\t{row.survivors}"
                f"\t{row.coverage:.4f}\t{int(row.saturated)}"
            )
        return "\n".join(lines) + "\n"


def scaling_probe(cfg: RunConfig, self_sizes: tuple[int, ...] | None = None) -> ScalingResult:
    """How many random detectors does target coverage of non-self require
    as the self set grows? Self sets are nested prefixes of one shuffle, so
    rows differ only in |self|. Coverage is exact (brute force over 2**L).

    A size whose target is unreachable (including |self| = 2**L, where no
    non-self exists) is reported saturated and treated as needing
    unboundedly many detectors in the monotonicity verdict.
    """
    sizes = self_sizes if self_sizes is not None else cfg.self_sizes
    length, r = cfg.pattern_length, cfg.match_threshold
    if length > 16:
        raise ConfigError("scaling probe needs pattern_length <= 16 for exact coverage")
    universe = 1 << length
    if any(size < 0 or size > universe for size in sizes):
        raise ConfigError("self sizes must lie in 0..2**L")

    rng = random.Random(cfg.seed + SCALE_SELF_SEED_OFFSET)
    shuffled = rng.sample(range(universe), max(sizes) if sizes else 0)
    candidates = generate_detectors(
        cfg.scale_max_candidates, length, cfg.seed + SCALE_DETECTOR_SEED_OFFSET
    )

    rows = []
    for size in sizes:
        self_ints = shuffled[:size]
        self_patterns = [Pattern.from_int(v, length) for v in self_ints]
        nonself_count = universe - size
        if nonself_count == 0:
            rows.append(ScalingRow(size, 0, None, 0, 0.0, True))
            continue
        target = math.ceil(cfg.coverage_target * nonself_count)
        covered: set[int] = set()
        survivors = 0
        needed = None
        for index, candidate in enumerate(candidates, start=1):
            if any(matches(candidate.receptor, s, r) for s in self_patterns):
                continue
            survivors += 1
            covered |= match_set(candidate.receptor, r)
            if len(covered) >= target:
                needed = index
                break
        rows.append(
            ScalingRow(
                self_size=size,
                nonself_count=nonself_count,
                detectors_needed=needed,
                survivors=survivors,
                coverage=len(covered) / nonself_count,
                saturated=needed is None,
            )
        )

    needed_values = [math.inf if row.detectors_needed is None else row.detectors_needed for row in rows]
    monotone = all(a <= b for a, b in zip(needed_values, needed_values[1:]))
    return ScalingResult(rows=rows, monotone_nondecreasing=monotone)


class AntigenClass(Enum):
    SELF = "SELF"
    FOREIGN_HARMLESS = "FOREIGN_HARMLESS"
    FOREIGN_DANGEROUS = "FOREIGN_DANGEROUS"


@dataclass(frozen=True)
class SimSource:
    source_id: str
    pattern: Pattern
    klass: AntigenClass
    pamp: bool = False
    damage_ticks: tuple[int, ...] = ()
    start_tick: int = 0


@dataclass(frozen=True)
class ThreeClassScenario:
    """Self, foreign-harmless, foreign-dangerous antigens plus a repertoire
    recipe, used to contrast the signal topologies on equal footing."""

    duration_ticks: int
    sources: tuple[SimSource, ...]
    planted_receptors: tuple[Pattern, ...]
    match_threshold: int
    censor_detectors: bool = False
    extra_random_detectors: int = 0
    helper_count: int = 32
    activation_threshold: int = 1
    lifecycle: LifecycleParams = LifecycleParams(tau_effector=2, decay=1)
    zone: ZoneConfig = ZoneConfig()
    window_seconds: float = 1.0
    seed: int = 0


@dataclass(frozen=True)
class TopologyOutcome:
    topology: Topology
    responses_to_self: int
    responses_to_harmless: int
    responses_to_dangerous: int
    tolerization_deaths: int
    live_detectors: int


def simulate_signal_model(topology: Topology, scenario: ThreeClassScenario) -> TopologyOutcome:
    """Run the tick loop under one topology's co-stimulation rules.

    Recognition alone suffices under BURNET (co-stimulation does not exist
    there, so signal two simply mirrors signal one and tolerization cannot
    occur). TWO_SIGNAL and THREE_PARTY require recognition by a censored
    permission repertoire standing in for T help. INFECTIOUS_NONSELF primes
    co-stimulation only for PAMP-flagged antigens. DANGER grants it only
    inside danger zones seeded by damage events, and DANGER_EXTENDED widens
    each capture to the whole active pool (one presenter's signal two
    covers every antigen co-presented on it).
    """
    lengths = {len(s.pattern) for s in scenario.sources}
    if len(lengths) != 1:
        raise ConfigError("scenario sources must share one pattern length")
    length = lengths.pop()
    r = scenario.match_threshold
    if topology in (Topology.DANGER, Topology.DANGER_EXTENDED):
        for s in scenario.sources:
            if s.klass is AntigenClass.FOREIGN_DANGEROUS and not s.damage_ticks:
                raise ConfigError(
                    f"{topology.value} scenario requires damage events on dangerous"
                    f" source {s.source_id!r}"
                )

    rng = random.Random(scenario.seed)
    self_patterns = SelfSet(
        frozenset(s.pattern for s in scenario.sources if s.klass is AntigenClass.SELF)
    )
    candidates = [
        Detector.immature(p, maturation_ticks=1, activation_threshold=scenario.activation_threshold)
        for p in scenario.planted_receptors
    ]
    candidates += [
        Detector.immature(
            Pattern.random(length, rng),
            maturation_ticks=1,
            activation_threshold=scenario.activation_threshold,
        )
        for _ in range(scenario.extra_random_detectors)
    ]
    if scenario.censor_detectors:
        detectors = censor(candidates, self_patterns, r)
    else:
        detectors = [
            replace(d, state=DetectorState.MATURE_RESTING, maturation_ticks_remaining=0)
            for d in candidates
        ]

    helpers: list[Detector] = []
    if topology in (Topology.TWO_SIGNAL, Topology.THREE_PARTY):
        helper_candidates = generate_detectors(
            scenario.helper_count, length, scenario.seed + 1, maturation_ticks=1
        )
        helpers = censor(helper_candidates, self_patterns, r)

    by_id = {s.source_id: s for s in scenario.sources}
    quarantined: set[str] = set()
    responses = {klass: 0 for klass in AntigenClass}
    deaths = 0
    w = scenario.window_seconds
    helper_source = (
        SourceKind.T_HELPER if topology is Topology.TWO_SIGNAL else SourceKind.APC
    )

    for tick in range(scenario.duration_ticks):
        now = tick * w
        active = [
            s
            for s in scenario.sources
            if s.start_tick <= tick and s.source_id not in quarantined
        ]
        pool = {
            s.source_id: Antigen(
                pattern=s.pattern,
                source_id=s.source_id,
                start_time=s.start_tick * w,
                active_interval=(s.start_tick * w, now),
                resources=frozenset({f"res:{s.source_id}"}),
            )
            for s in active
        }

        presented: set[str] = set()
        if topology in (Topology.DANGER, Topology.DANGER_EXTENDED):
            zone = scenario.zone
            if topology is Topology.DANGER_EXTENDED:
                zone = replace(zone, theta=0.0)
            pool_list = list(pool.values())
            for s in active:
                if s.klass is AntigenClass.FOREIGN_DANGEROUS and tick in s.damage_ticks:
                    alarm = DangerAlarm(
                        emitter_id=s.source_id,
                        time=now,
                        strength=1.0,
                        emitter_resources=frozenset({f"res:{s.source_id}"}),
                        emitter_start=s.start_tick * w,
                        cause=AlarmCause.ABNORMAL_TERMINATION,
                    )
                    presentation = build_danger_zone(alarm, pool_list, zone)
                    presented.update(a.source_id for a in presentation.presented)
        elif topology is Topology.INFECTIOUS_NONSELF:
            presented = {s.source_id for s in active if s.pamp}
        elif topology in (Topology.TWO_SIGNAL, Topology.THREE_PARTY):
            presented = {
                s.source_id
                for s in active
                if any(matches(h.receptor, s.pattern, r) for h in helpers)
            }

        for i, d in enumerate(detectors):
            if d.state is DetectorState.DEAD:
                continue
            matched = {sid for sid, a in pool.items() if matches(d.receptor, a.pattern, r)}
            if not matched and d.state is not DetectorState.IMMATURE:
                detectors[i] = step_detector(d, False, False, False, scenario.lifecycle)
                continue
            s1 = bool(matched)
            if topology is Topology.BURNET:
                s2 = s1
            else:
                s2 = bool(matched & presented) and signal2_permitted(
                    topology, helper_source, d.state
                )
            stepped = step_detector(d, s1, s2, False, scenario.lifecycle)
            if stepped.state is DetectorState.DEAD and d.state is not DetectorState.DEAD:
                deaths += 1
            detectors[i] = stepped

        for d in detectors:
            if d.state is not DetectorState.ACTIVATED:
                continue
            for sid, antigen in list(pool.items()):
                if sid in quarantined:
                    continue
                if matches(d.receptor, antigen.pattern, r):
                    quarantined.add(sid)
                    responses[by_id[sid].klass] += 1

    return TopologyOutcome(
        topology=topology,
        responses_to_self=responses[AntigenClass.SELF],
        responses_to_harmless=responses[AntigenClass.FOREIGN_HARMLESS],
        responses_to_dangerous=responses[AntigenClass.FOREIGN_DANGEROUS],
        tolerization_deaths=deaths,
        live_detectors=sum(d.state is not DetectorState.DEAD for d in detectors),
    )


def canonical_three_class_scenario(
    pattern_length: int = 32,
    match_threshold: int = 10,
    seed: int = 0,
    harmless_pamp: bool = True,
) -> ThreeClassScenario:
    """The standing three-antigen scenario used by the topology table:
    a persistent self antigen, a harmless foreigner (optionally carrying
    the infectious marker, like gut bacteria), and a dangerous foreigner
    that starts later and emits damage from its first tick."""
    rng = random.Random(seed)
    patterns: list[Pattern] = []
    while len(patterns) < 3:
        candidate = Pattern.random(pattern_length, rng)
        # Re-draw until the three receptors cannot cross-react.
        if all(not matches(candidate, p, match_threshold) for p in patterns):
            patterns.append(candidate)
    p_self, p_harmless, p_dangerous = patterns
    sources = (
        SimSource("cell-self", p_self, AntigenClass.SELF, start_tick=0),
        SimSource(
            "gut-flora",
            p_harmless,
            AntigenClass.FOREIGN_HARMLESS,
            pamp=harmless_pamp,
            start_tick=5,
        ),
        SimSource(
            "intruder",
            p_dangerous,
            AntigenClass.FOREIGN_DANGEROUS,
            pamp=True,
            damage_ticks=(40, 43, 46),
            start_tick=40,
        ),
    )
    return ThreeClassScenario(
        duration_ticks=60,
        sources=sources,
        planted_receptors=(p_self, p_harmless, p_dangerous),
        match_threshold=match_threshold,
        seed=seed,
    )


def generate_labeled_scenario(cfg: RunConfig) -> tuple[list[HostEvent], dict[str, TruthLabel]]:
    return generate_scenario(cfg.scenario_spec(), cfg.seed)
