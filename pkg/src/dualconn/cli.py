"""Command-line entry point: run, sweep-delay, validate, replay."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import re
import sys
from fractions import Fraction
from pathlib import Path

from . import harness
from .channel import BfArchitecture, BfKind
from .rl.checkpoint import CheckpointError
from .scenario import ScenarioError, load_scenario

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

_UNITS = {"s": 1, "ms": Fraction(1, 1000), "us": Fraction(1, 10**6), "µs": Fraction(1, 10**6)}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_duration(text: str) -> float:
    """'200us', '0.2ms', '2e-4s' or a bare number of seconds."""
    m = re.fullmatch(r"\s*([0-9.eE+-]+)\s*(s|ms|us|µs)?\s*", text)
    if m is None:
        raise argparse.ArgumentTypeError(f"cannot parse duration {text!r}")
    try:
        value = Fraction(m.group(1))
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse duration {text!r}") from None
    seconds = float(value * _UNITS[m.group(2) or "s"])
    if seconds <= 0:
        raise argparse.ArgumentTypeError("duration must be positive")
    return seconds


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dualconn", description="LTE-NR dual-connectivity handover simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="execute an experiment plan")
    run.add_argument("--plan", required=True, type=Path)
    run.add_argument("--seed", type=int, action="append", help="override the plan's seeds (repeatable)")
    run.add_argument("--episodes", type=_positive_int)
    run.add_argument("--output-dir", type=Path)
    run.add_argument("--workers", type=_positive_int)

    sd = sub.add_parser("sweep-delay", help="print the sweep delay of every BF architecture")
    sd.add_argument("--tper", type=parse_duration, default=200e-6)
    sd.add_argument("--ngnb", type=_positive_int, default=16)
    sd.add_argument("--nue", type=_positive_int, default=8)
    sd.add_argument("--table1-compat", action="store_true",
                    help="use the tabulated hybrid value instead of the L=2 formula")

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("file", type=Path)

    rep = sub.add_parser("replay", help="re-run one episode from a checkpoint")
    rep.add_argument("--checkpoint", required=True, type=Path)
    rep.add_argument("--episode", type=int)
    rep.add_argument("--output", type=Path)
    return p


def _cmd_run(args) -> int:
    plan = harness.load_plan(args.plan)
    changes = {}
    if args.seed:
        changes["seeds"] = tuple(args.seed)
    if args.episodes is not None:
        changes["episodes"] = args.episodes
    if args.output_dir is not None:
        changes["output_dir"] = str(args.output_dir)
    if args.workers is not None:
        changes["workers"] = args.workers
    if changes:
        try:
            plan = dataclasses.replace(plan, **changes)
        except ValueError as exc:
            raise harness.PlanError(str(exc)) from None
    results = harness.run_experiment(plan)
    print(f"{len(results)} cells written to {plan.resolved_output_dir()}")
    return EXIT_OK


def _cmd_sweep_delay(args) -> int:
    print("architecture,L,delay_s,delay_ms")
    for kind in BfKind:
        arch = BfArchitecture(kind, args.ngnb, args.nue, args.tper, args.table1_compat)
        d = arch.sweep_delay()
        print(f"{kind.value},{min(arch.l_factor, args.ngnb * args.nue)},{d!r},{d * 1e3:.6g}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    sc = load_scenario(args.file)
    print(f"ok: {args.file} ({sc.n_gnbs} gNBs, {len(sc.buildings)} buildings)")
    return EXIT_OK


def _cmd_replay(args) -> int:
    rows = harness.replay(args.checkpoint, args.episode, args.output)
    if args.output is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(harness.REPLAY_COLUMNS)
        for r in rows:
            w.writerow([harness._fmt(v) for v in r])
    return EXIT_OK


_COMMANDS = {"run": _cmd_run, "sweep-delay": _cmd_sweep_delay, "validate": _cmd_validate, "replay": _cmd_replay}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (ScenarioError, harness.PlanError, CheckpointError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
