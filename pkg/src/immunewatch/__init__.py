"""Immune-inspired anomaly detection: detector lifecycle rules, classical
negative selection, and danger-signal zones over recorded host event logs."""

from .core import (
    Antigen,
    Detector,
    DetectorState,
    LifecycleParams,
    Pattern,
    SignalKind,
    SourceKind,
    Topology,
    TruthLabel,
    affinity,
    clone_and_mutate,
    matches,
    signal2_permitted,
    step_detector,
)
from .engine import (
    AlarmCause,
    APCPresentation,
    DangerAlarm,
    DangerEngine,
    EngineConfig,
    MonitorConfig,
    Response,
    ZoneConfig,
    apc_present,
    build_danger_zone,
    extract_danger,
    proximity,
    sandbox_confirm,
)
from .errors import ConfigError, ContractViolation, DataError, ImmuneWatchError
from .events import EventKind, HostEvent, ScenarioSpec, generate_scenario, parse_event_log
from .harness import (
    Mode,
    Report,
    RunConfig,
    compare_modes,
    run_experiment,
    scaling_probe,
    simulate_signal_model,
)
from .interest import BrowseRecord, replay_session
from .negative_selection import (
    Alarm,
    CostimOracle,
    SelfSet,
    censor,
    generate_detectors,
    ns_detect,
)

__version__ = "0.1.0"
