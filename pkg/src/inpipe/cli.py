"""Headless entry points: run missions, serve teleoperation, replay logs.

Exit codes are a stable contract:

* 0 — mission DONE / clean shutdown / replay matched
* 1 — usage, configuration, or scenario errors
* 2 — mission ended in FAULT
* 3 — replay divergence
"""

from __future__ import annotations

import argparse
import signal
import sys
from importlib import resources

from . import mission
from .errors import ScenarioError
from .pipe_world import Scenario, load_scenario
from .replay import ReplayFormatError, ReplayWriter, replay_log

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAULT = 2
EXIT_DIVERGED = 3

#: Hard tick budget for headless runs (11+ hours of simulated time).
MAX_TICKS = 2_000_000


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inpipe-sim",
        description=(
            "Deterministic digital twin of an in-pipe joint rehabilitation "
            "robot: drive, wall-press, clean, seal, finish."
        ),
    )
    parser.add_argument(
        "--scenario",
        metavar="PATH",
        help="scenario JSON (default: the packaged 100 m scenario)",
    )
    parser.add_argument(
        "--seed", type=int, default=None, help="override the scenario seed"
    )
    parser.add_argument(
        "--autopilot",
        action="store_true",
        help="run the full mission autonomously",
    )
    parser.add_argument(
        "--serve",
        action="store_true",
        help="serve teleoperation until interrupted",
    )
    parser.add_argument(
        "--replay",
        metavar="PATH",
        help="re-execute a replay log and verify state hashes",
    )
    parser.add_argument(
        "--report",
        metavar="PATH",
        help="write the mission report JSON here",
    )
    parser.add_argument(
        "--log", metavar="PATH", help="write a replay log here"
    )
    parser.add_argument(
        "--port", type=int, default=4857, help="raw protocol port (serve mode)"
    )
    parser.add_argument(
        "--bridge-port",
        type=int,
        default=4858,
        help="browser socket bridge port (serve mode)",
    )
    parser.add_argument(
        "--tps",
        type=float,
        default=50.0,
        help="serve-mode tick rate override, ticks/second; 0 = unpaced "
        "(testing only; 50 = real time)",
    )
    return parser


def _load_scenario(args) -> Scenario:
    if args.scenario is not None:
        try:
            with open(args.scenario, "r", encoding="utf-8") as fp:
                text = fp.read()
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario: {exc}") from None
    else:
        text = (
            resources.files("inpipe")
            .joinpath("scenarios/default_100m.json")
            .read_text(encoding="utf-8")
        )
    scenario = load_scenario(text)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ScenarioError("--seed must be an unsigned 64-bit integer")
        scenario.seed = args.seed
    return scenario


def _cmd_simulate(args, scenario: Scenario) -> int:
    """Run the autopilot mission to DONE or FAULT; write report and log."""
    world = mission.World(scenario, autopilot=True)
    writer = None
    log_fp = None
    if args.log:
        log_fp = open(args.log, "w", encoding="utf-8")
        writer = ReplayWriter(log_fp, scenario, autopilot=True)
        writer.checkpoint_if_due(world)
    try:
        while (
            world.state.mission
            not in (mission.MissionState.DONE, mission.MissionState.FAULT)
            and world.state.tick_index < MAX_TICKS
        ):
            world.tick([])
            if writer is not None:
                writer.checkpoint_if_due(world)
        if world.state.mission not in (
            mission.MissionState.DONE,
            mission.MissionState.FAULT,
        ):
            world.fault("mission exceeded the tick budget")
    finally:
        if writer is not None:
            writer.close(world)
            log_fp.close()

    report = mission.build_report(world)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fp:
            fp.write(report.to_json() + "\n")
    print(report.table())
    if world.state.mission is mission.MissionState.FAULT:
        for cause in world.state.faults:
            print(f"FAULT: {cause}", file=sys.stderr)
        return EXIT_FAULT
    return EXIT_OK


def _cmd_serve(args, scenario: Scenario) -> int:
    """Serve both transports until SIGINT/SIGTERM; clean shutdown."""
    from .server import SimServer  # imported lazily: needs websockets

    world = mission.World(scenario, autopilot=args.autopilot)
    writer = None
    log_fp = None
    if args.log:
        log_fp = open(args.log, "w", encoding="utf-8")
        writer = ReplayWriter(log_fp, scenario, autopilot=args.autopilot)
    server = SimServer(world, tps=args.tps, replay_writer=writer)
    try:
        server.start(port=args.port, bridge_port=args.bridge_port)
    except OSError as exc:
        print(f"error: cannot bind: {exc}", file=sys.stderr)
        if log_fp is not None:
            log_fp.close()
        return EXIT_USAGE

    stopping = []

    def _on_signal(_signum, _frame):
        stopping.append(True)

    old_int = signal.signal(signal.SIGINT, _on_signal)
    old_term = signal.signal(signal.SIGTERM, _on_signal)
    print(
        f"serving on tcp://127.0.0.1:{args.port} and "
        f"ws://127.0.0.1:{args.bridge_port} (interrupt to stop)",
        flush=True,
    )
    try:
        while not stopping:
            if server.wait(0.2):
                break
    finally:
        signal.signal(signal.SIGINT, old_int)
        signal.signal(signal.SIGTERM, old_term)
        server.stop()
        if log_fp is not None:
            log_fp.close()
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fp:
            fp.write(mission.build_report(world).to_json() + "\n")
    print("shut down cleanly", flush=True)
    return EXIT_OK


def _cmd_replay(args, scenario: Scenario) -> int:
    """Re-execute a recorded trace; exit 3 on any hash divergence."""
    try:
        with open(args.replay, "r", encoding="utf-8") as fp:
            result = replay_log(scenario, fp)
    except OSError as exc:
        print(f"error: cannot read log: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ReplayFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not result.ok:
        print(f"replay diverged: {result.message}", file=sys.stderr)
        return EXIT_DIVERGED
    print(result.message)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.serve and args.replay:
        print("error: --serve and --replay are mutually exclusive", file=sys.stderr)
        return EXIT_USAGE
    try:
        scenario = _load_scenario(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.replay:
        return _cmd_replay(args, scenario)
    if args.serve:
        return _cmd_serve(args, scenario)
    if args.autopilot:
        return _cmd_simulate(args, scenario)
    print(
        "error: nothing to do — pass --autopilot, --serve, or --replay",
        file=sys.stderr,
    )
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
