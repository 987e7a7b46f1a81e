"""Command-line harness.

Subcommands: gen (synthesize a labeled scenario), run (one mode end to
end), compare (baseline vs danger engine), scale (detector-count scaling
probe), topo (signal-topology table), replay (interest-filter session).
Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .core import Topology
from .errors import ConfigError, DataError
from .events import parse_event_log, parse_labels, serialize_events, serialize_labels
from .harness import (
    Mode,
    RunConfig,
    canonical_three_class_scenario,
    compare_modes,
    format_report,
    generate_labeled_scenario,
    load_config,
    run_experiment,
    scaling_probe,
    simulate_signal_model,
)
from .interest import parse_browse_log, replay_session
from .negative_selection import censor, generate_detectors

log = logging.getLogger("immunewatch")


def _load(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    log.info("wrote %s", path)


def _cmd_gen(args: argparse.Namespace) -> int:
    cfg = _load(args)
    events, labels = generate_labeled_scenario(cfg)
    out = _out_dir(args)
    _write(out / "events.tsv", serialize_events(events))
    _write(out / "labels.tsv", serialize_labels(labels))
    print(f"events: {len(events)}")
    print(f"sources: {len(labels)}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load(args)
    result = run_experiment(cfg, out_dir=_out_dir(args))
    print(format_report(result.report), end="")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    cfg = _load(args)
    cfg_ns = replace(cfg, mode=Mode.NS_ONLY)
    cfg_danger = replace(cfg, mode=Mode.DANGER)
    comparison = compare_modes(cfg_ns, cfg_danger)
    out = _out_dir(args)
    _write(out / "report_ns.txt", format_report(comparison.result_a.report))
    _write(out / "report_danger.txt", format_report(comparison.result_b.report))
    audit_a = comparison.result_a.audit_lines
    audit_b = comparison.result_b.audit_lines
    _write(out / "audit_ns.tsv", "\n".join(audit_a) + ("\n" if audit_a else ""))
    _write(out / "audit_danger.tsv", "\n".join(audit_b) + ("\n" if audit_b else ""))
    _write(out / "compare.txt", comparison.summary())
    print(comparison.summary(), end="")
    return 0


def _cmd_scale(args: argparse.Namespace) -> int:
    cfg = _load(args)
    result = scaling_probe(cfg)
    out = _out_dir(args)
    _write(out / "scale.tsv", result.table())
    verdict = f"monotone_nondecreasing: {str(result.monotone_nondecreasing).lower()}\n"
    _write(out / "scale.txt", verdict)
    print(result.table(), end="")
    print(verdict, end="")
    return 0


def _cmd_topo(args: argparse.Namespace) -> int:
    cfg = _load(args)
    scenario = canonical_three_class_scenario(
        pattern_length=cfg.pattern_length,
        match_threshold=cfg.match_threshold,
        seed=cfg.seed,
    )
    lines = ["topology\tself\tharmless\tdangerous\tdeaths\tlive_detectors"]
    for topology in Topology:
        outcome = simulate_signal_model(topology, scenario)
        lines.append(
            f"{topology.value}\t{outcome.responses_to_self}"
            f"\t{outcome.responses_to_harmless}\t{outcome.responses_to_dangerous}"
            f"\t{outcome.tolerization_deaths}\t{outcome.live_detectors}"
        )
    table = "\n".join(lines) + "\n"
    _write(_out_dir(args) / "topo.tsv", table)
    print(table, end="")
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    cfg = _load(args)
    if cfg.session_path is None:
        raise ConfigError("replay requires session_path in the config")
    records = parse_browse_log(Path(cfg.session_path).read_text(), cfg.pattern_length)
    candidates = generate_detectors(
        cfg.detector_budget,
        cfg.pattern_length,
        cfg.seed,
        activation_threshold=cfg.activation_threshold,
        maturation_ticks=cfg.maturation_ticks,
    )
    from .negative_selection import SelfSet

    repertoire = censor(candidates, SelfSet(frozenset()), cfg.match_threshold)
    survivors, metrics = replay_session(
        records,
        repertoire,
        cfg.match_threshold,
        cfg.lifecycle_params(),
        rng_seed=cfg.seed,
    )
    out = _out_dir(args)
    score_lines = ["doc_id\tscore\tinterest"]
    score_lines += [
        f"{doc_id}\t{score}\t{int(interest)}" for doc_id, score, interest in metrics.doc_scores
    ]
    _write(out / "scores.tsv", "\n".join(score_lines) + "\n")
    auc_text = "-" if metrics.prequential_auc is None else f"{metrics.prequential_auc:.4f}"
    state_tallies = ",".join(
        f"{state}={count}" for state, count in sorted(metrics.survivors_by_state.items())
    )
    summary = (
        f"documents: {len(records)}\n"
        f"prequential_auc: {auc_text}\n"
        f"tolerization_deaths: {metrics.tolerization_deaths}\n"
        f"influx_added: {metrics.influx_added}\n"
        f"states: {state_tallies}\n"
    )
    _write(out / "replay.txt", summary)
    print(summary, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="immunewatch",
        description="Immune-inspired anomaly detection over host event logs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "gen": (_cmd_gen, "generate a labeled synthetic scenario"),
        "run": (_cmd_run, "run one mode over an event log"),
        "compare": (_cmd_compare, "baseline negative selection vs danger engine"),
        "scale": (_cmd_scale, "detector-count scaling probe"),
        "topo": (_cmd_topo, "signal-topology outcome table"),
        "replay": (_cmd_replay, "interest-filter session replay"),
    }
    for name, (func, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, default=None, help="key=value config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument(
            "--log-level",
            choices=("quiet", "info", "debug"),
            default="quiet",
            help="stderr logging verbosity",
        )
        p.set_defaults(func=func)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(stream=sys.stderr, level=level[args.log_level], format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
