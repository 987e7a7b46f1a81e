"""Interest-as-danger document filtering, replayed offline.

Document features are the antigens, a recorded user-interest signal is the
danger signal, and the danger zone is simply the current document: every
feature of an interesting document is co-presented with signal two, while
features of uninteresting documents deliver signal one alone and tolerize
their matchers. Zone proximity configuration is deliberately bypassed here.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from .core import (
    DEFAULT_ACTIVATION_THRESHOLD,
    Detector,
    DetectorState,
    LifecycleParams,
    Pattern,
    matches,
    step_detector,
)
from .errors import ConfigError, DataError

BROWSE_SCHEMA = "ais-browse-v1"
FEATURE_HASH_VERSION = "sha256-mod-v1"


def token_pattern(token: str, length: int) -> Pattern:
    """Stable token-to-pattern encoding (versioned; see FEATURE_HASH_VERSION)."""
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return Pattern.from_int(int.from_bytes(digest[:8], "big"), length)


@dataclass(frozen=True)
class BrowseRecord:
    """One browsed document: feature patterns plus the recorded interest flag."""

    doc_id: str
    features: frozenset[Pattern]
    interest: bool
    time: float
    tokens: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.features:
            raise DataError(f"document {self.doc_id!r} has an empty feature set")


def parse_browse_log(text: str, pattern_length: int) -> list[BrowseRecord]:
    """Parse a session log: ``time<TAB>doc_id<TAB>interest<TAB>token,token,...``."""
    records: list[BrowseRecord] = []
    last_time = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith("#schema=") and line != f"#schema={BROWSE_SCHEMA}":
                raise DataError(f"line {lineno}: unsupported schema {line[8:]!r}")
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise DataError(f"line {lineno}: expected 4 fields, got {len(parts)}")
        try:
            time = float(parts[0])
        except ValueError:
            raise DataError(f"line {lineno}: bad time {parts[0]!r}") from None
        if last_time is not None and time < last_time:
            raise DataError(f"line {lineno}: session times must be nondecreasing")
        last_time = time
        if parts[2] not in ("0", "1"):
            raise DataError(f"line {lineno}: interest must be 0 or 1")
        tokens = tuple(tok for tok in parts[3].split(",") if tok)
        if not tokens:
            raise DataError(f"line {lineno}: document has no feature tokens")
        records.append(
            BrowseRecord(
                doc_id=parts[1],
                features=frozenset(token_pattern(t, pattern_length) for t in tokens),
                interest=parts[2] == "1",
                time=time,
                tokens=tokens,
            )
        )
    return records


def serialize_browse_log(records: list[BrowseRecord]) -> str:
    lines = [f"#schema={BROWSE_SCHEMA}"]
    for rec in records:
        if not rec.tokens:
            raise DataError(f"document {rec.doc_id!r} has no tokens to serialize")
        lines.append(
            "\t".join((repr(rec.time), rec.doc_id, "1" if rec.interest else "0", ",".join(rec.tokens)))
        )
    return "\n".join(lines) + "\n"


@dataclass
class ReplayMetrics:
    doc_scores: list[tuple[str, int, bool]]
    prequential_auc: float | None
    tolerization_deaths: int
    influx_added: int
    survivors_by_state: dict[str, int]


def document_score(repertoire: list[Detector], features: frozenset[Pattern], r: int) -> int:
    """How strongly the current repertoire flags a document: the number of
    activated or memory detectors matching any of its features."""
    score = 0
    for d in repertoire:
        if d.state not in (DetectorState.ACTIVATED, DetectorState.MEMORY_RESTING):
            continue
        if any(matches(d.receptor, f, r) for f in features):
            score += 1
    return score


def auc(scores: list[float], labels: list[bool]) -> float | None:
    """Rank-based AUC of scores against binary labels; ties get half credit.
    None when only one class is present."""
    positives = [s for s, flag in zip(scores, labels) if flag]
    negatives = [s for s, flag in zip(scores, labels) if not flag]
    if not positives or not negatives:
        return None
    wins = 0.0
    for p in positives:
        for n in negatives:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(positives) * len(negatives))


def replay_session(
    log: list[BrowseRecord],
    repertoire: list[Detector],
    r: int,
    params: LifecycleParams,
    *,
    influx_every: int = 10,
    influx_count: int = 1,
    rng_seed: int = 0,
) -> tuple[list[Detector], ReplayMetrics]:
    """Replay a browse session over the repertoire, one record per tick.

    Detectors matching any feature of the current document receive signal
    one; signal two rides along exactly when the record carries interest.
    Because an activation here can only ever be caused by a recorded
    interest signal, the danger behind it counts as confirmed and retiring
    effectors become memory detectors. Every ``influx_every`` records,
    ``influx_count`` fresh random matured detectors join to keep coverage
    as interests drift (0 disables the trickle).

    Documents are scored before their own record is applied, so the
    prequential AUC reflects out-of-sample ranking.
    """
    if influx_every < 1:
        raise ConfigError("influx_every must be >= 1")
    detectors = list(repertoire)
    rng = random.Random(rng_seed)
    deaths = 0
    influx_added = 0
    doc_scores: list[tuple[str, int, bool]] = []
    length = len(detectors[0].receptor) if detectors else None

    for seen, record in enumerate(log, start=1):
        doc_scores.append((record.doc_id, document_score(detectors, record.features, r), record.interest))
        for i, d in enumerate(detectors):
            if d.state is DetectorState.DEAD:
                continue
            s1 = any(matches(d.receptor, f, r) for f in record.features)
            s2 = s1 and record.interest and d.state is not DetectorState.IMMATURE
            stepped = step_detector(d, s1, s2, danger_confirmed=True, params=params)
            if stepped.state is DetectorState.DEAD:
                deaths += 1
            detectors[i] = stepped
        if influx_count and seen % influx_every == 0:
            if length is None:
                length = len(next(iter(record.features)))
            for _ in range(influx_count):
                detectors.append(
                    Detector.mature(
                        Pattern.random(length, rng),
                        activation_threshold=DEFAULT_ACTIVATION_THRESHOLD,
                    )
                )
                influx_added += 1

    preq_auc = auc(
        [float(score) for _, score, _ in doc_scores],
        [interest for _, _, interest in doc_scores],
    )
    tallies: dict[str, int] = {}
    for d in detectors:
        tallies[d.state.value] = tallies.get(d.state.value, 0) + 1
    metrics = ReplayMetrics(
        doc_scores=doc_scores,
        prequential_auc=preq_auc,
        tolerization_deaths=deaths,
        influx_added=influx_added,
        survivors_by_state=tallies,
    )
    return detectors, metrics
