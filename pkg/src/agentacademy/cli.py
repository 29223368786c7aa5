"""Command-line entry point: run / mine / inspect / replay."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .mining import EmptyDataset, format_tree, induce_tree, tree_to_rules
from .o3rtaa.config import ConfigError, ScenarioConfig, load_config
from .o3rtaa.simulation import replay_transcript, run_simulation
from .repository import Repository, RepositoryError


def _cmd_run(args) -> int:
    config = load_config(args.config) if args.config else ScenarioConfig()
    overrides = {k: v for k, v in (("seed", args.seed), ("ticks", args.ticks)) if v is not None}
    if args.log is not None:
        overrides["log"] = args.log
    config = config.with_overrides(**overrides)
    transcript = open(args.transcript, "w", encoding="utf-8") if args.transcript else None
    try:
        report = run_simulation(config, transcript=transcript, overwrite=args.overwrite)
    finally:
        if transcript is not None:
            transcript.close()
    text = report.to_text()
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _open_log(path: str) -> Repository:
    if not Path(path).exists():
        raise FileNotFoundError(f"no repository log at {path}")
    return Repository(path)


def _cmd_mine(args) -> int:
    with _open_log(args.log) as repo:
        ds = repo.query_examples(args.location)
    try:
        tree = induce_tree(ds)
    except EmptyDataset:
        print(f"no labeled examples for location {args.location}", file=sys.stderr)
        return 1
    print(f"; {len(ds)} labeled examples for {args.location}")
    print(format_tree(tree))
    for rule in tree_to_rules(tree):
        print(rule.to_defrule())
    return 0


def _cmd_inspect(args) -> int:
    with _open_log(args.log) as repo:
        s = repo.summary()
    print(f"observations {s['observations']}")
    print(f"labeled      {s['labeled']} (institutional {s['institutional']}, individual {s['individual']})")
    for loc, (n, labeled) in s["by_location"].items():
        print(f"  {loc:<12} {n:>6} observations  {labeled:>6} labeled")
    return 0


def _cmd_replay(args) -> int:
    ok, message = replay_transcript(Path(args.transcript).read_text(encoding="utf-8"))
    print(message)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agentacademy", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the O3RTAA closed loop and print the report")
    run.add_argument("--config", help="scenario config file (built-in defaults if omitted)")
    run.add_argument("--seed", type=int)
    run.add_argument("--ticks", type=int)
    run.add_argument("--transcript", help="write the message transcript here")
    run.add_argument("--report", help="write the report here instead of stdout")
    run.add_argument("--log", help="repository log path (overrides the config)")
    run.add_argument("--overwrite", action="store_true", help="replace an existing repository log")
    run.set_defaults(func=_cmd_run)

    mine = sub.add_parser("mine", help="induce a tree from a repository log and print its rules")
    mine.add_argument("--log", required=True)
    mine.add_argument("--location", required=True)
    mine.set_defaults(func=_cmd_mine)

    inspect = sub.add_parser("inspect", help="summary counts of a repository log")
    inspect.add_argument("--log", required=True)
    inspect.set_defaults(func=_cmd_inspect)

    replay = sub.add_parser("replay", help="verify a transcript by recomputation")
    replay.add_argument("--transcript", required=True)
    replay.set_defaults(func=_cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, RepositoryError, FileNotFoundError, FileExistsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
