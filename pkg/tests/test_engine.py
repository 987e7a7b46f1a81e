import math
import random

import pytest

from immunewatch.core import (
    Antigen,
    Detector,
    DetectorState,
    LifecycleParams,
    Pattern,
    Topology,
)
from immunewatch.engine import (
    AlarmCause,
    APCPresentation,
    DangerAlarm,
    DangerEngine,
    EngineConfig,
    MonitorConfig,
    ZoneConfig,
    apc_present,
    build_danger_zone,
    extract_danger,
    proximity,
    sandbox_confirm,
)
from immunewatch.errors import ConfigError, ContractViolation
from immunewatch.events import SIGABRT, EventKind, HostEvent
from immunewatch.negative_selection import SelfSet, censor, generate_detectors

MONITOR = MonitorConfig(
    memory_lo=100.0,
    memory_hi=500.0,
    disk_rate_max=50.0,
    file_change_baseline=2.0,
    file_change_multiplier=2.0,
    window_seconds=1.0,
)


def event(kind, t=0.0, source="s", value=0.0, pattern=None, resources=frozenset(), engine=False):
    return HostEvent(
        time=t,
        source_id=source,
        kind=kind,
        value=value,
        pattern=pattern,
        resources=resources,
        engine_initiated=engine,
    )


def alarm(
    emitter="emitter",
    t=0.0,
    strength=1.0,
    resources=frozenset(),
    start=0.0,
    cause=AlarmCause.ABNORMAL_TERMINATION,
):
    return DangerAlarm(
        emitter_id=emitter,
        time=t,
        strength=strength,
        emitter_resources=resources,
        emitter_start=start,
        cause=cause,
    )


def antigen(bits, source="a", start=0.0, interval=None, resources=frozenset()):
    return Antigen(
        pattern=Pattern(bits),
        source_id=source,
        start_time=start,
        active_interval=interval if interval is not None else (start, start),
        resources=resources,
    )


class TestConfigValidation:
    def test_memory_band_order(self):
        with pytest.raises(ConfigError):
            MonitorConfig(memory_lo=500.0, memory_hi=100.0)

    def test_multiplier_above_one(self):
        with pytest.raises(ConfigError):
            MonitorConfig(file_change_multiplier=1.0)

    def test_zone_weights_sum(self):
        with pytest.raises(ConfigError):
            ZoneConfig(w_time=0.5, w_overlap=0.5, w_resource=0.5)

    def test_zone_theta_range(self):
        with pytest.raises(ConfigError):
            ZoneConfig(theta=1.5)

    def test_alarm_strength_range(self):
        with pytest.raises(ConfigError):
            alarm(strength=0.0)
        with pytest.raises(ConfigError):
            alarm(strength=1.0001)


class TestExtractDanger:
    def test_all_in_band_is_quiet(self):
        events = [
            event(EventKind.METRIC_MEM, value=300.0),
            event(EventKind.METRIC_DISK, value=10.0),
            event(EventKind.FILE_CHANGE, value=1.0),
            event(EventKind.PROC_TERM, value=0.0),
        ]
        assert extract_danger(events, MONITOR) == []

    def test_abnormal_termination_full_strength(self):
        alarms = extract_danger([event(EventKind.PROC_TERM, value=SIGABRT)], MONITOR)
        assert len(alarms) == 1
        assert alarms[0].cause is AlarmCause.ABNORMAL_TERMINATION
        assert alarms[0].strength == 1.0

    def test_memory_double_high_clamps_to_one(self):
        alarms = extract_danger([event(EventKind.METRIC_MEM, value=1000.0)], MONITOR)
        assert alarms[0].cause is AlarmCause.MEMORY_BAND
        assert alarms[0].strength == 1.0

    def test_memory_mild_excess_ratio(self):
        alarms = extract_danger([event(EventKind.METRIC_MEM, value=600.0)], MONITOR)
        assert alarms[0].strength == pytest.approx((600 - 500) / 500)

    def test_memory_below_band(self):
        alarms = extract_danger([event(EventKind.METRIC_MEM, value=50.0)], MONITOR)
        assert alarms[0].cause is AlarmCause.MEMORY_BAND
        assert alarms[0].strength == pytest.approx((100 - 50) / 100)

    def test_disk_rate(self):
        alarms = extract_danger([event(EventKind.METRIC_DISK, value=75.0)], MONITOR)
        assert alarms[0].cause is AlarmCause.DISK_RATE
        assert alarms[0].strength == pytest.approx(0.5)

    def test_file_change_burst(self):
        events = [event(EventKind.FILE_CHANGE, t=0.1 * i, value=1.0) for i in range(6)]
        alarms = extract_danger(events, MONITOR)
        assert [a.cause for a in alarms] == [AlarmCause.FILE_CHANGES]
        assert alarms[0].strength == pytest.approx((6 - 4) / 4)

    def test_one_alarm_per_cause_per_emitter(self):
        events = [
            event(EventKind.METRIC_MEM, t=0.0, value=900.0),
            event(EventKind.METRIC_MEM, t=0.5, value=800.0),
            event(EventKind.PROC_TERM, t=0.6, value=SIGABRT),
            event(EventKind.METRIC_MEM, t=0.7, source="other", value=900.0),
        ]
        alarms = extract_danger(events, MONITOR)
        assert len(alarms) == 3
        assert {(a.emitter_id, a.cause) for a in alarms} == {
            ("s", AlarmCause.MEMORY_BAND),
            ("s", AlarmCause.ABNORMAL_TERMINATION),
            ("other", AlarmCause.MEMORY_BAND),
        }

    def test_engine_initiated_events_are_invisible(self):
        events = [
            event(EventKind.PROC_TERM, value=SIGABRT, engine=True),
            event(EventKind.METRIC_MEM, t=0.1, value=2000.0, engine=True),
        ]
        assert extract_danger(events, MONITOR) == []

    def test_unsorted_input_rejected(self):
        events = [
            event(EventKind.METRIC_MEM, t=1.0, value=900.0),
            event(EventKind.METRIC_MEM, t=0.5, value=900.0),
        ]
        with pytest.raises(ContractViolation):
            extract_danger(events, MONITOR)


class TestProximity:
    def test_maximal_similarity_is_exactly_one(self):
        cfg = ZoneConfig()
        a = antigen("1010", start=5.0, interval=(5.0, 8.0), resources=frozenset({"x"}))
        al = alarm(t=10.0, start=5.0, resources=frozenset({"x"}))
        assert proximity(a, al, cfg) == 1.0

    def test_all_components_zero(self):
        cfg = ZoneConfig(tau_start=1.0)
        a = antigen("1010", start=1e9, interval=(1e9, 1e9 + 1), resources=frozenset({"x"}))
        al = alarm(t=10.0, start=0.0, resources=frozenset({"y"}))
        assert proximity(a, al, cfg) == 0.0

    def test_direct_evaluation(self):
        cfg = ZoneConfig(tau_start=10.0)
        a = antigen("1010", start=10.0, interval=(10.0, 30.0), resources=frozenset({"x", "y"}))
        al = alarm(t=20.0, start=0.0, resources=frozenset({"y"}))
        expected = (math.exp(-1.0) + 0.5 + 0.5) / 3
        assert proximity(a, al, cfg) == pytest.approx(expected)
        assert proximity(a, al, cfg) == pytest.approx(0.4559598, abs=1e-6)

    def test_bounds_on_random_inputs(self):
        rng = random.Random(0)
        cfg = ZoneConfig(tau_start=3.0)
        for _ in range(500):
            t0 = rng.uniform(0, 100)
            t1 = t0 + rng.uniform(0, 50)
            a = antigen(
                format(rng.getrandbits(8), "08b"),
                start=t0 - rng.uniform(0, 5),
                interval=(t0, t1),
                resources=frozenset(f"r{i}" for i in range(rng.randrange(4))),
            )
            al = alarm(
                t=rng.uniform(0, 100),
                start=rng.uniform(0, 100),
                resources=frozenset(f"r{i}" for i in range(rng.randrange(4))),
            )
            assert 0.0 <= proximity(a, al, cfg) <= 1.0


class TestBuildDangerZone:
    def test_zero_threshold_captures_whole_pool(self):
        cfg = ZoneConfig(theta=0.0)
        pool = [antigen("0001", source=f"s{i}", start=100.0 * i) for i in range(3)]
        pool.append(antigen("0001", source="emitter", start=500.0))
        presentation = build_danger_zone(alarm(emitter="emitter", t=0.0), pool, cfg)
        assert len(presentation.presented) == 4
        assert presentation.signal_two is True

    def test_threshold_one_keeps_emitter_only(self):
        cfg = ZoneConfig(theta=1.0, tau_start=1.0)
        pool = [
            antigen("0001", source="far", start=50.0, resources=frozenset({"q"})),
            antigen("0001", source="emitter", start=0.0, interval=(0.0, 1.0)),
        ]
        presentation = build_danger_zone(alarm(emitter="emitter", t=1.0), pool, cfg)
        assert [a.source_id for a in presentation.presented] == ["emitter"]

    def test_threshold_filter(self):
        # overlap-only weights make the scores exact: 0.9, 0.5, 0.1
        cfg = ZoneConfig(w_time=0.0, w_overlap=1.0, w_resource=0.0, theta=0.6)
        pool = [
            antigen("0001", source="near", start=0.0, interval=(0.0, 10.0)),
            antigen("0001", source="mid", start=0.0, interval=(0.0, 18.0)),
            antigen("0001", source="far", start=0.0, interval=(0.0, 90.0)),
            antigen("0001", source="emitter", start=0.0, interval=(0.0, 9.0)),
        ]
        presentation = build_danger_zone(
            alarm(emitter="emitter", t=9.0, start=0.0), pool, cfg
        )
        assert [a.source_id for a in presentation.presented] == ["near", "emitter"]


class TestApcPresent:
    def _presentation(self):
        return APCPresentation(
            alarm=alarm(),
            presented=(antigen("11110000", source="x"),),
        )

    def test_mature_match_gets_both_signals(self):
        repertoire = [Detector.mature(Pattern("11110000"))]
        assert apc_present(self._presentation(), repertoire, 8, Topology.DANGER) == [(True, True)]

    def test_immature_match_gets_signal_one_only(self):
        repertoire = [Detector.immature(Pattern("11110000"))]
        assert apc_present(self._presentation(), repertoire, 8, Topology.DANGER) == [(True, False)]

    def test_no_match_no_stimulus(self):
        repertoire = [Detector.mature(Pattern("00001111"))]
        assert apc_present(self._presentation(), repertoire, 8, Topology.DANGER) == [(False, False)]

    def test_burnet_never_delivers_signal_two(self):
        repertoire = [Detector.mature(Pattern("11110000"))]
        assert apc_present(self._presentation(), repertoire, 8, Topology.BURNET) == [(True, False)]


class TestSandboxConfirm:
    def test_empty_history_never_confirms(self):
        assert sandbox_confirm("ghost", [], MONITOR) is False

    def test_abnormal_termination_confirms(self):
        events = [
            event(EventKind.CONNECTION, t=0.0, source="bad", pattern=Pattern("1010")),
            event(EventKind.PROC_TERM, t=3.0, source="bad", value=SIGABRT),
        ]
        assert sandbox_confirm("bad", events, MONITOR) is True

    def test_in_band_history_does_not_confirm(self):
        events = [event(EventKind.METRIC_MEM, t=float(i), source="ok", value=300.0) for i in range(5)]
        assert sandbox_confirm("ok", events, MONITOR) is False

    def test_other_sources_are_ignored(self):
        events = [event(EventKind.PROC_TERM, t=0.0, source="other", value=SIGABRT)]
        assert sandbox_confirm("suspect", events, MONITOR) is False


def engine_config(**overrides) -> EngineConfig:
    defaults = dict(
        pattern_length=8,
        match_threshold=8,
        topology=Topology.DANGER,
        lifecycle=LifecycleParams(tau_effector=2, decay=1),
        zone=ZoneConfig(),
        monitor=MONITOR,
        activation_threshold=1,
        n_clones=0,
        mutation_rate=0.0,
        influx_per_tick=0,
        seed=0,
    )
    defaults.update(overrides)
    return EngineConfig(**defaults)


SELF_BITS = "00001111"
ATTACK_BITS = "11110000"


def one_shot_danger_ticks(n_ticks=6):
    """Persistent self antigen from t=0; attacker appears at t=0 with a
    single abnormal termination, then only keeps its connection open."""
    ticks = []
    for t in range(n_ticks):
        now = float(t)
        tick_events = [
            event(EventKind.CONNECTION, t=now, source="selfish", pattern=Pattern(SELF_BITS),
                  resources=frozenset({"res:selfish"})),
        ]
        tick_events.append(
            event(EventKind.CONNECTION, t=now, source="intruder", pattern=Pattern(ATTACK_BITS),
                  resources=frozenset({"res:intruder"}))
        )
        if t == 0:
            tick_events.append(
                event(EventKind.PROC_TERM, t=now, source="intruder", value=SIGABRT,
                      resources=frozenset({"res:intruder"}))
            )
        ticks.append(tick_events)
    return ticks


class TestDangerEngineTick:
    def test_quiescent_tick_changes_only_timers(self):
        engine = DangerEngine(engine_config(), [Detector.mature(Pattern(SELF_BITS))])
        responses = engine.tick([])
        assert responses == []
        assert engine.alarm_log == []
        assert engine.pool == {}
        d = engine.detectors[0]
        assert d.state is DetectorState.MATURE_RESTING
        assert d.age_ticks == 1

    def test_tolerization_and_confirmed_memory(self):
        # the self-matcher needs two paired ticks to activate, so the
        # one-shot danger stimulates it once and tolerization takes it
        # the tick after the alarm clears
        d_self = Detector.mature(Pattern(SELF_BITS), activation_threshold=2)
        d_attack = Detector.mature(Pattern(ATTACK_BITS), activation_threshold=1)
        engine = DangerEngine(engine_config(), [d_self, d_attack])
        ticks = one_shot_danger_ticks()

        engine.tick(ticks[0])
        assert engine.detectors[0].state is DetectorState.MATURE_RESTING
        assert engine.detectors[0].stimulation_count == 1  # captured in the zone
        assert engine.detectors[1].state is DetectorState.ACTIVATED
        assert [r.source_id for r in engine.response_log] == ["intruder"]
        assert "intruder" in engine.quarantined

        engine.tick(ticks[1])
        assert engine.detectors[0].state is DetectorState.DEAD
        assert len(engine.alarm_log) == 1

        for t in range(2, 6):
            engine.tick(ticks[t])
        assert engine.detectors[1].state is DetectorState.MEMORY_RESTING
        assert engine.detectors[1].activation_threshold == 1

    def test_self_antigen_is_captured_during_danger(self):
        # autoreactive stimulation inside the zone is expected while the
        # danger lasts; the zone includes the co-started self antigen
        d_self = Detector.mature(Pattern(SELF_BITS), activation_threshold=2)
        engine = DangerEngine(engine_config(), [d_self])
        engine.tick(one_shot_danger_ticks()[0])
        assert engine.detectors[0].stimulation_count == 1
        assert engine.detectors[0].state is DetectorState.MATURE_RESTING

    def test_restimulation_until_sources_removed(self):
        cfg = engine_config()
        detector = Detector.mature(Pattern(ATTACK_BITS), activation_threshold=1)
        engine = DangerEngine(cfg, [detector])
        for t in range(4):
            now = float(t)
            engine.tick(
                [
                    event(EventKind.CONNECTION, t=now, source=f"atk-{t}",
                          pattern=Pattern(ATTACK_BITS)),
                    event(EventKind.PROC_TERM, t=now, source=f"atk-{t}", value=SIGABRT),
                ]
            )
            assert engine.detectors[0].state is DetectorState.ACTIVATED
            assert engine.detectors[0].effector_ticks_remaining == cfg.lifecycle.tau_effector
            assert f"atk-{t}" in engine.quarantined
        engine.tick([])
        engine.tick([])
        assert engine.detectors[0].state is DetectorState.MEMORY_RESTING
        assert len(engine.response_log) == 4

    def test_engine_initiated_events_never_alarm(self):
        engine = DangerEngine(engine_config(), [])
        for t in range(3):
            engine.tick(
                [
                    event(EventKind.PROC_TERM, t=float(t), source="ghost", value=SIGABRT,
                          engine=True),
                    event(EventKind.METRIC_MEM, t=float(t), source="ghost", value=5000.0,
                          engine=True),
                ]
            )
        assert engine.alarm_log == []
        assert all(kind != "ALARM" for _, kind, *_ in engine.audit)

    def test_deferred_tolerization_horizon(self):
        cfg = engine_config(tolerization_ticks=3)
        engine = DangerEngine(cfg, [Detector.mature(Pattern(SELF_BITS))])
        conn = [
            event(EventKind.CONNECTION, t=0.0, source="selfish", pattern=Pattern(SELF_BITS))
        ]
        engine.tick(conn)
        assert engine.detectors[0].state is DetectorState.MATURE_RESTING
        engine.tick([])
        assert engine.detectors[0].state is DetectorState.MATURE_RESTING
        engine.tick([])
        assert engine.detectors[0].state is DetectorState.DEAD

    def test_hybrid_nonself_presence_acts_as_danger(self):
        cfg = engine_config(ns_danger_source=True)
        engine = DangerEngine(cfg, [Detector.mature(Pattern(ATTACK_BITS), activation_threshold=1)])
        engine.tick(
            [event(EventKind.CONNECTION, t=0.0, source="quiet-foe", pattern=Pattern(ATTACK_BITS))]
        )
        assert [a.cause for _, a in engine.alarm_log] == [AlarmCause.NONSELF_PRESENT]
        assert "quiet-foe" in engine.quarantined

    def test_pure_danger_mode_ignores_quiet_nonself(self):
        engine = DangerEngine(engine_config(), [Detector.mature(Pattern(ATTACK_BITS), activation_threshold=1)])
        engine.tick(
            [event(EventKind.CONNECTION, t=0.0, source="quiet-foe", pattern=Pattern(ATTACK_BITS))]
        )
        assert engine.alarm_log == []
        # without grounded danger the matcher is tolerized instead
        assert engine.detectors[0].state is DetectorState.DEAD

    def test_influx_is_censored_against_training_self(self):
        training = SelfSet(frozenset({Pattern("0000"), Pattern("1111")}))
        cfg = engine_config(
            pattern_length=4,
            match_threshold=2,
            influx_per_tick=8,
            training_self=training,
        )
        engine = DangerEngine(cfg, [])
        for _ in range(10):
            engine.tick([])
        assert engine.detectors  # some survived censoring
        from immunewatch.core import matches

        for d in engine.detectors:
            for s in training.patterns:
                assert not matches(d.receptor, s, 2)

    def test_clonal_expansion_on_activation(self):
        cfg = engine_config(n_clones=3, mutation_rate=0.0)
        engine = DangerEngine(cfg, [Detector.mature(Pattern(ATTACK_BITS), activation_threshold=1)])
        engine.tick(one_shot_danger_ticks()[0])
        assert len(engine.detectors) == 4
        clones = engine.detectors[1:]
        assert all(c.state is DetectorState.MATURE_RESTING for c in clones)
        assert all(c.receptor == Pattern(ATTACK_BITS) for c in clones)

    def test_determinism_of_full_trajectory(self):
        def run():
            cfg = engine_config(n_clones=2, mutation_rate=0.2, seed=11)
            engine = DangerEngine(
                cfg,
                [
                    Detector.mature(Pattern(ATTACK_BITS), activation_threshold=1),
                    Detector.mature(Pattern(SELF_BITS), activation_threshold=2),
                ],
            )
            for tick_events in one_shot_danger_ticks():
                engine.tick(tick_events)
            return engine.audit, engine.detectors

        audit_a, detectors_a = run()
        audit_b, detectors_b = run()
        assert audit_a == audit_b
        assert detectors_a == detectors_b

    def test_apc_self_protection(self):
        # the presenting host's own signature is in the training self set,
        # so censoring leaves nothing that could attack it even though its
        # antigen sits inside every zone it reports
        apc_bits = "01010101"
        training = SelfSet(frozenset({Pattern(apc_bits)}))
        candidates = generate_detectors(200, 8, 42)
        survivors = censor(candidates, training, 4)
        from immunewatch.core import matches

        for d in survivors:
            assert not matches(d.receptor, Pattern(apc_bits), 4)

        cfg = engine_config(match_threshold=4, activation_threshold=1)
        engine = DangerEngine(cfg, survivors)
        for t in range(4):
            now = float(t)
            engine.tick(
                [
                    event(EventKind.CONNECTION, t=now, source="apc-host",
                          pattern=Pattern(apc_bits)),
                    event(EventKind.PROC_TERM, t=now, source="apc-host", value=SIGABRT),
                ]
            )
        assert all(r.source_id != "apc-host" for r in engine.response_log)
