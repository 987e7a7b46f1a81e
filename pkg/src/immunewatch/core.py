"""Domain types and the pure rules of the immune model.

Everything here is a pure function of its inputs: bit-pattern affinity and
matching, the detector lifecycle transition (one tick), clonal expansion,
and the per-topology rules for who may deliver co-stimulation (signal two).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import ConfigError, ContractViolation

DEFAULT_ACTIVATION_THRESHOLD = 3
DEFAULT_MATURATION_TICKS = 2


class DetectorState(Enum):
    IMMATURE = "IMMATURE"
    MATURE_RESTING = "MATURE_RESTING"
    ACTIVATED = "ACTIVATED"
    MEMORY_RESTING = "MEMORY_RESTING"
    DEAD = "DEAD"


class SignalKind(Enum):
    SIGNAL0_PRIME = 0
    SIGNAL1_MATCH = 1
    SIGNAL2_COSTIM = 2
    SIGNAL3_ROUTED = 3


class Topology(Enum):
    """Historical signal models, from recognition-only to routed help."""

    BURNET = "BURNET"
    TWO_SIGNAL = "TWO_SIGNAL"
    THREE_PARTY = "THREE_PARTY"
    INFECTIOUS_NONSELF = "INFECTIOUS_NONSELF"
    DANGER = "DANGER"
    DANGER_EXTENDED = "DANGER_EXTENDED"


class SourceKind(Enum):
    APC = "APC"
    T_HELPER = "T_HELPER"
    OTHER_CELL = "OTHER_CELL"


class TruthLabel(Enum):
    """Ground truth for harness scoring only; detection logic never sees it."""

    SELF = "SELF"
    NONSELF = "NONSELF"


@dataclass(frozen=True)
class Pattern:
    """Fixed-length binary string. All patterns in one run share a length L."""

    bits: str
    value: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.bits:
            raise ConfigError("pattern must not be empty")
        if set(self.bits) - {"0", "1"}:
            raise ConfigError(f"pattern must contain only 0/1 symbols: {self.bits!r}")
        object.__setattr__(self, "value", int(self.bits, 2))

    def __len__(self) -> int:
        return len(self.bits)

    @classmethod
    def from_int(cls, value: int, length: int) -> Pattern:
        if length < 1:
            raise ConfigError("pattern length must be positive")
        return cls(format(value & ((1 << length) - 1), f"0{length}b"))

    @classmethod
    def random(cls, length: int, rng: random.Random) -> Pattern:
        return cls.from_int(rng.getrandbits(length), length)

    def hamming(self, other: Pattern) -> int:
        _require_same_length(self, other)
        return bin(self.value ^ other.value).count("1")


@dataclass(frozen=True)
class Antigen:
    """A pattern plus the provenance context used for danger-zone proximity.

    ``active_interval`` is the (t0, t1) span during which the antigen's
    source was observed active; ``start_time`` is when the source first
    appeared (start_time <= t0).
    """

    pattern: Pattern
    source_id: str
    start_time: float
    active_interval: tuple[float, float]
    resources: frozenset[str] = frozenset()
    truth_label: TruthLabel | None = None

    def __post_init__(self) -> None:
        t0, t1 = self.active_interval
        if t0 > t1:
            raise ContractViolation(f"antigen interval reversed: {self.active_interval}")
        if self.start_time > t0:
            raise ContractViolation("antigen start_time must not exceed interval start")


@dataclass(frozen=True)
class Detector:
    """A receptor pattern with lifecycle state, counters, and timers."""

    receptor: Pattern
    state: DetectorState = DetectorState.IMMATURE
    age_ticks: int = 0
    stimulation_count: int = 0
    activation_threshold: int = DEFAULT_ACTIVATION_THRESHOLD
    effector_ticks_remaining: int = 0
    maturation_ticks_remaining: int = DEFAULT_MATURATION_TICKS

    def __post_init__(self) -> None:
        if self.activation_threshold < 1:
            raise ConfigError("activation_threshold must be >= 1")
        if min(self.age_ticks, self.stimulation_count) < 0:
            raise ConfigError("detector counters must be non-negative")
        if (self.effector_ticks_remaining > 0) != (self.state is DetectorState.ACTIVATED):
            raise ConfigError("effector timer must be positive exactly when ACTIVATED")
        if (self.maturation_ticks_remaining > 0) != (self.state is DetectorState.IMMATURE):
            raise ConfigError("maturation timer must be positive exactly when IMMATURE")
        if self.state is DetectorState.MEMORY_RESTING and self.activation_threshold != 1:
            raise ConfigError("memory detectors carry the minimum activation threshold")

    @classmethod
    def immature(
        cls,
        receptor: Pattern,
        maturation_ticks: int = DEFAULT_MATURATION_TICKS,
        activation_threshold: int = DEFAULT_ACTIVATION_THRESHOLD,
    ) -> Detector:
        return cls(
            receptor=receptor,
            state=DetectorState.IMMATURE,
            activation_threshold=activation_threshold,
            maturation_ticks_remaining=maturation_ticks,
        )

    @classmethod
    def mature(
        cls,
        receptor: Pattern,
        activation_threshold: int = DEFAULT_ACTIVATION_THRESHOLD,
    ) -> Detector:
        return cls(
            receptor=receptor,
            state=DetectorState.MATURE_RESTING,
            activation_threshold=activation_threshold,
            maturation_ticks_remaining=0,
        )

    @classmethod
    def memory(cls, receptor: Pattern) -> Detector:
        return cls(
            receptor=receptor,
            state=DetectorState.MEMORY_RESTING,
            activation_threshold=1,
            maturation_ticks_remaining=0,
        )


@dataclass(frozen=True)
class LifecycleParams:
    """Knobs the lifecycle rules leave open: effector span and quiet decay."""

    tau_effector: int = 3
    decay: int = 1

    def __post_init__(self) -> None:
        if self.tau_effector < 1:
            raise ConfigError("tau_effector must be >= 1")
        if self.decay < 0:
            raise ConfigError("decay must be >= 0")


def _require_same_length(a: Pattern, b: Pattern) -> None:
    if len(a) != len(b):
        raise ConfigError(f"pattern length mismatch: {len(a)} vs {len(b)}")


def _agreement(a: Pattern, b: Pattern) -> int:
    """Bitmask with a 1 at every position where the two patterns agree."""
    mask = (1 << len(a)) - 1
    return ~(a.value ^ b.value) & mask


def _longest_run(x: int) -> int:
    n = 0
    while x:
        x &= x >> 1
        n += 1
    return n


def affinity(receptor: Pattern, antigen_pattern: Pattern) -> float:
    """Continuous match strength: longest run of agreeing positions over L.

    Symmetric; 1.0 exactly for identical patterns, 0.0 when no position
    agrees (bitwise complements).
    """
    _require_same_length(receptor, antigen_pattern)
    return _longest_run(_agreement(receptor, antigen_pattern)) / len(receptor)


def matches(receptor: Pattern, antigen_pattern: Pattern, r: int) -> bool:
    """True iff some run of at least ``r`` consecutive positions agrees."""
    _require_same_length(receptor, antigen_pattern)
    if not 1 <= r <= len(receptor):
        raise ConfigError(f"match threshold r={r} out of range 1..{len(receptor)}")
    x = _agreement(receptor, antigen_pattern)
    for _ in range(r - 1):
        x &= x >> 1
        if not x:
            return False
    return x != 0


def match_set(receptor: Pattern, r: int) -> set[int]:
    """All patterns (as ints) sharing a run of >= r agreeing positions.

    Enumerates each length-r window of forced agreement and fills the free
    positions; intended for small L where 2**(L-r) stays desk-sized. Used
    by the scaling probe; tests cross-check it against exhaustive matching.
    """
    length = len(receptor)
    if not 1 <= r <= length:
        raise ConfigError(f"match threshold r={r} out of range 1..{length}")
    out: set[int] = set()
    for start in range(length - r + 1):
        window_mask = ((1 << r) - 1) << (length - r - start)
        base = receptor.value & window_mask
        free_positions = [i for i in range(length) if not (window_mask >> i) & 1]
        for combo in range(1 << len(free_positions)):
            v = base
            for j, pos in enumerate(free_positions):
                if (combo >> j) & 1:
                    v |= 1 << pos
            out.add(v)
    return out


def step_detector(
    d: Detector,
    s1: bool,
    s2: bool,
    danger_confirmed: bool,
    params: LifecycleParams,
) -> Detector:
    """Advance one detector by one tick under the lifecycle laws.

    Mature (virgin or memory) cells: activate on paired signals once the
    stimulation counter reaches the activation threshold, die on signal one
    alone (tolerization), ignore signal two alone, and decay when quiet.
    Immature cells cannot accept signal two and die on any signal one.
    Activated effectors ignore signal two, are restimulated by signal one,
    and otherwise run down their timer; on expiry they rest as memory when
    ``danger_confirmed`` held during the episode, else as ordinary mature.
    """
    if d.state is DetectorState.DEAD:
        raise ContractViolation("step_detector called on a DEAD detector")
    age = d.age_ticks + 1

    if d.state is DetectorState.IMMATURE:
        if s1:
            return replace(
                d, state=DetectorState.DEAD, age_ticks=age, maturation_ticks_remaining=0
            )
        remaining = d.maturation_ticks_remaining - 1
        if remaining <= 0:
            return replace(
                d,
                state=DetectorState.MATURE_RESTING,
                age_ticks=age,
                maturation_ticks_remaining=0,
            )
        return replace(d, age_ticks=age, maturation_ticks_remaining=remaining)

    if d.state in (DetectorState.MATURE_RESTING, DetectorState.MEMORY_RESTING):
        if s1 and s2:
            count = d.stimulation_count + 1
            if count >= d.activation_threshold:
                return replace(
                    d,
                    state=DetectorState.ACTIVATED,
                    age_ticks=age,
                    stimulation_count=count,
                    effector_ticks_remaining=params.tau_effector,
                )
            return replace(d, age_ticks=age, stimulation_count=count)
        if s1:
            return replace(d, state=DetectorState.DEAD, age_ticks=age)
        if s2:
            return replace(d, age_ticks=age)
        return replace(
            d, age_ticks=age, stimulation_count=max(0, d.stimulation_count - params.decay)
        )

    # ACTIVATED: signal two is ignored entirely.
    if s1:
        return replace(d, age_ticks=age, effector_ticks_remaining=params.tau_effector)
    remaining = d.effector_ticks_remaining - 1
    if remaining > 0:
        return replace(d, age_ticks=age, effector_ticks_remaining=remaining)
    if danger_confirmed:
        return replace(
            d,
            state=DetectorState.MEMORY_RESTING,
            age_ticks=age,
            stimulation_count=0,
            activation_threshold=1,
            effector_ticks_remaining=0,
        )
    return replace(
        d,
        state=DetectorState.MATURE_RESTING,
        age_ticks=age,
        stimulation_count=0,
        effector_ticks_remaining=0,
    )


def clone_and_mutate(
    d: Detector, n_clones: int, mutation_rate: float, rng_seed: int
) -> list[Detector]:
    """Produce hypermutated copies of an activated detector.

    Clones enter MATURE_RESTING with fresh counters; they must earn
    activation themselves. Each receptor bit flips independently with
    probability ``mutation_rate``; output is deterministic per seed.
    """
    if d.state is not DetectorState.ACTIVATED:
        raise ContractViolation("only ACTIVATED detectors undergo clonal expansion")
    if not 0.0 <= mutation_rate <= 1.0:
        raise ConfigError(f"mutation_rate must be in [0,1], got {mutation_rate}")
    if n_clones < 0:
        raise ConfigError("n_clones must be non-negative")
    rng = random.Random(rng_seed)
    clones = []
    for _ in range(n_clones):
        bits = "".join(
            ("1" if c == "0" else "0") if rng.random() < mutation_rate else c
            for c in d.receptor.bits
        )
        clones.append(
            Detector.mature(Pattern(bits), activation_threshold=d.activation_threshold)
        )
    return clones


def signal2_permitted(topology: Topology, source_kind: SourceKind, state: DetectorState) -> bool:
    """May ``source_kind`` deliver signal two to a detector in ``state``?

    Immature cells accept signal two from no source. Under BURNET there is
    no signal two at all; TWO_SIGNAL accepts it from T helper cells only;
    every later topology folds helper mediation into the APC.
    """
    if state is DetectorState.IMMATURE:
        return False
    if topology is Topology.BURNET:
        return False
    if topology is Topology.TWO_SIGNAL:
        return source_kind is SourceKind.T_HELPER
    return source_kind is SourceKind.APC


def signal_legal(kind: SignalKind, topology: Topology) -> bool:
    """Whether a signal kind exists at all under a topology."""
    if kind is SignalKind.SIGNAL1_MATCH:
        return True
    if kind is SignalKind.SIGNAL2_COSTIM:
        return topology is not Topology.BURNET
    if kind is SignalKind.SIGNAL0_PRIME:
        return topology in (
            Topology.INFECTIOUS_NONSELF,
            Topology.DANGER,
            Topology.DANGER_EXTENDED,
        )
    return topology is Topology.DANGER_EXTENDED
