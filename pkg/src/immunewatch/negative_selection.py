"""Classical negative selection: random detectors censored against self,
threshold activation with operator co-stimulation, memory promotion.

This is the baseline regime the danger engine is compared against. Note
that tolerization is deliberately absent here: in this mode a detector
that matches without confirmation merely resets.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Callable, Iterable

from .core import (
    Antigen,
    Detector,
    DetectorState,
    Pattern,
    TruthLabel,
    matches,
)
from .errors import ConfigError, ContractViolation


@dataclass(frozen=True)
class SelfSet:
    """Training-time self observations; all patterns share one length."""

    patterns: frozenset[Pattern]

    def __post_init__(self) -> None:
        lengths = {len(p) for p in self.patterns}
        if len(lengths) > 1:
            raise ConfigError(f"self set mixes pattern lengths: {sorted(lengths)}")

    @classmethod
    def from_iterable(cls, patterns: Iterable[Pattern]) -> SelfSet:
        return cls(frozenset(patterns))

    def __len__(self) -> int:
        return len(self.patterns)


@dataclass(frozen=True)
class Alarm:
    """One activation event: a detector crossed its threshold on a stream."""

    detector_index: int
    time: float
    antigens: tuple[Antigen, ...]
    confirmed: bool


@dataclass(frozen=True)
class CostimOracle:
    """Stands in for the human operator who confirms or dismisses alarms."""

    name: str
    decide: Callable[[Alarm], bool]


ALWAYS_YES = CostimOracle("always-yes", lambda alarm: True)
ALWAYS_NO = CostimOracle("always-no", lambda alarm: False)


def ground_truth_oracle(labels: dict[str, TruthLabel]) -> CostimOracle:
    """Operator with perfect knowledge: confirms iff a NONSELF source matched."""

    def decide(alarm: Alarm) -> bool:
        return any(labels.get(a.source_id) is TruthLabel.NONSELF for a in alarm.antigens)

    return CostimOracle("ground-truth", decide)


def generate_detectors(
    count: int,
    length: int,
    rng_seed: int,
    *,
    activation_threshold: int = 3,
    maturation_ticks: int = 2,
) -> list[Detector]:
    """Create ``count`` immature detectors with uniform random receptors.

    Deterministic per seed, and prefix-stable: the first n detectors of a
    larger request equal the n detectors of a smaller one (the scaling
    probe relies on this).
    """
    if count < 0:
        raise ConfigError("detector count must be non-negative")
    rng = random.Random(rng_seed)
    return [
        Detector.immature(
            Pattern.random(length, rng),
            maturation_ticks=maturation_ticks,
            activation_threshold=activation_threshold,
        )
        for _ in range(count)
    ]


def censor(candidates: list[Detector], self_set: SelfSet, r: int) -> list[Detector]:
    """Maturation screening: drop candidates matching any self pattern.

    Survivors are promoted to MATURE_RESTING (mature but not activated);
    eliminated candidates are dead and not returned.
    """
    for d in candidates:
        if d.state is not DetectorState.IMMATURE:
            raise ContractViolation("censor expects IMMATURE candidates")
    survivors = []
    for d in candidates:
        if any(matches(d.receptor, s, r) for s in self_set.patterns):
            continue
        survivors.append(
            replace(d, state=DetectorState.MATURE_RESTING, maturation_ticks_remaining=0)
        )
    return survivors


def _antigen_identity(a: Antigen) -> tuple[str, str]:
    return (a.source_id, a.pattern.bits)


def ns_detect(
    repertoire: list[Detector],
    antigens: Iterable[Antigen],
    r: int,
    oracle: CostimOracle,
) -> tuple[list[Alarm], list[Detector]]:
    """Run the censored repertoire over an ordered antigen stream.

    Every presentation is shown to every resting detector; each match
    increments that detector's stimulation counter. At the activation
    threshold the detector raises an Alarm carrying the antigens it
    accumulated; a confirmed alarm promotes it to a memory detector
    (threshold 1), a dismissed one resets its counter. A detector never
    re-alarms on an antigen it already had confirmed.
    """
    detectors = list(repertoire)
    pending: dict[int, list[Antigen]] = {i: [] for i in range(len(detectors))}
    suppressed: dict[int, set[tuple[str, str]]] = {i: set() for i in range(len(detectors))}
    # Receptors never change during a run, so match lists per distinct
    # pattern are computed once.
    matched_by_pattern: dict[str, list[int]] = {}
    alarms: list[Alarm] = []

    for antigen in antigens:
        key = antigen.pattern.bits
        if key not in matched_by_pattern:
            matched_by_pattern[key] = [
                i
                for i, d in enumerate(detectors)
                if matches(d.receptor, antigen.pattern, r)
            ]
        for i in matched_by_pattern[key]:
            d = detectors[i]
            if d.state not in (DetectorState.MATURE_RESTING, DetectorState.MEMORY_RESTING):
                continue
            if _antigen_identity(antigen) in suppressed[i]:
                continue
            count = d.stimulation_count + 1
            pending[i].append(antigen)
            if count < d.activation_threshold:
                detectors[i] = replace(d, stimulation_count=count)
                continue
            matched = tuple(pending[i])
            confirmed = bool(oracle.decide(Alarm(i, antigen.start_time, matched, False)))
            alarms.append(Alarm(i, antigen.start_time, matched, confirmed))
            pending[i] = []
            if confirmed:
                suppressed[i].update(_antigen_identity(a) for a in matched)
                detectors[i] = replace(
                    d,
                    state=DetectorState.MEMORY_RESTING,
                    stimulation_count=0,
                    activation_threshold=1,
                )
            else:
                detectors[i] = replace(d, stimulation_count=0)
    return alarms, detectors


def detectable_set(repertoire: Iterable[Detector], length: int, r: int) -> set[int]:
    """Union of the survivors' match sets: every pattern the repertoire covers."""
    from .core import match_set

    covered: set[int] = set()
    for d in repertoire:
        if d.state is DetectorState.DEAD:
            continue
        if len(d.receptor) != length:
            raise ConfigError("repertoire pattern length differs from requested length")
        covered |= match_set(d.receptor, r)
    return covered
