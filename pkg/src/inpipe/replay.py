"""Deterministic replay logs: record command traces, re-run, compare.

A replay log is newline-delimited JSON.  Line one is a header::

    {"format": "inpipe-replay", "version": 1, "scenario_sha256": ...,
     "seed": ..., "autopilot": true, "checkpoint_every": 500}

followed by any number of records, each tagged with the tick index it
applies *before*:

    {"tick": N, "session": S, "frame": "<hex-encoded command frame>"}
    {"tick": N, "override": true}      operator lock taken / released
    {"tick": N, "safe_stop": true}     dead-man stop on session loss
    {"checkpoint": N, "hash": "..."}   state hash with tick_index == N

and a mandatory footer::

    {"final": true, "ticks": N, "hash": "...", "state": "DONE"}

Because the simulation is a pure function of (scenario, seed, command
trace), re-executing the trace must reproduce every checkpoint hash and
the final hash; the first mismatching checkpoint bounds the divergence.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import IO

from . import mission, protocol
from .errors import ScenarioError
from .pipe_world import Scenario, save_scenario

FORMAT_NAME = "inpipe-replay"
FORMAT_VERSION = 1

#: Default spacing between recorded state-hash checkpoints, ticks.
CHECKPOINT_EVERY = 500


class ReplayFormatError(ScenarioError):
    """The log file is not a valid replay log for this scenario."""


def scenario_digest(scenario: Scenario) -> str:
    """SHA-256 of the canonical scenario serialization."""
    return hashlib.sha256(save_scenario(scenario).encode("utf-8")).hexdigest()


class ReplayWriter:
    """Streams a replay log while a mission or teleoperation session runs.

    The caller invokes :meth:`checkpoint_if_due` once per tick boundary
    (including tick 0) and records every command frame it actually
    passes to :meth:`World.tick`, plus session-layer override and
    safe-stop transitions.  :meth:`close` writes the footer; a log
    without a footer is treated as truncated by the replayer.
    """

    def __init__(
        self,
        fp: IO[str],
        scenario: Scenario,
        autopilot: bool,
        checkpoint_every: int = CHECKPOINT_EVERY,
    ) -> None:
        self._fp = fp
        self.checkpoint_every = checkpoint_every
        self._last_checkpoint = -1
        self._closed = False
        self._write(
            {
                "format": FORMAT_NAME,
                "version": FORMAT_VERSION,
                "scenario_sha256": scenario_digest(scenario),
                "seed": scenario.seed,
                "autopilot": autopilot,
                "checkpoint_every": checkpoint_every,
            }
        )

    def _write(self, doc: dict) -> None:
        self._fp.write(json.dumps(doc, sort_keys=True) + "\n")

    def record_frame(self, tick: int, session: int, frame: bytes) -> None:
        """Record one command frame applied at the given tick."""
        self._write({"tick": tick, "session": session, "frame": frame.hex()})

    def record_override(self, tick: int, active: bool) -> None:
        self._write({"tick": tick, "override": active})

    def record_safe_stop(self, tick: int) -> None:
        self._write({"tick": tick, "safe_stop": True})

    def checkpoint_if_due(self, world: mission.World) -> None:
        tick = world.state.tick_index
        if tick % self.checkpoint_every == 0 and tick != self._last_checkpoint:
            self._last_checkpoint = tick
            self._write({"checkpoint": tick, "hash": mission.state_hash(world)})

    def close(self, world: mission.World) -> None:
        if self._closed:
            return
        self._closed = True
        self._write(
            {
                "final": True,
                "ticks": world.state.tick_index,
                "hash": mission.state_hash(world),
                "state": world.state.mission.name,
            }
        )
        self._fp.flush()


@dataclass
class ReplayResult:
    """Outcome of re-executing a log against a scenario."""

    ok: bool
    ticks: int
    divergent_tick: int | None
    message: str


def _decode_frame_record(record: dict, line_no: int) -> tuple[int, object]:
    try:
        raw = bytes.fromhex(record["frame"])
    except ValueError as exc:
        raise ReplayFormatError(f"line {line_no}: bad frame hex: {exc}") from None
    frames = protocol.Decoder().feed(raw)
    if len(frames) != 1:
        raise ReplayFormatError(f"line {line_no}: record is not one valid frame")
    frame = frames[0]
    if isinstance(frame.msg, (protocol.UnknownMessage, protocol.MalformedMessage)):
        raise ReplayFormatError(f"line {line_no}: undecodable command frame")
    return frame.seq, frame.msg


def _parse_log(fp: IO[str], scenario: Scenario):
    header = None
    records: dict[int, list[dict]] = {}
    checkpoints: list[tuple[int, str]] = []
    footer = None
    for line_no, line in enumerate(fp, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ReplayFormatError(f"line {line_no}: invalid JSON: {exc}") from None
        if header is None:
            if doc.get("format") != FORMAT_NAME:
                raise ReplayFormatError("not a replay log (missing format header)")
            if doc.get("version") != FORMAT_VERSION:
                raise ReplayFormatError(
                    f"unsupported log version {doc.get('version')!r}"
                )
            if doc.get("scenario_sha256") != scenario_digest(scenario):
                raise ReplayFormatError("log was recorded against a different scenario")
            if doc.get("seed") != scenario.seed:
                raise ReplayFormatError(
                    f"log seed {doc.get('seed')} does not match scenario seed "
                    f"{scenario.seed}"
                )
            header = doc
            continue
        if "checkpoint" in doc:
            checkpoints.append((int(doc["checkpoint"]), str(doc["hash"])))
        elif "final" in doc:
            footer = doc
        elif "tick" in doc:
            doc["_line"] = line_no
            records.setdefault(int(doc["tick"]), []).append(doc)
        else:
            raise ReplayFormatError(f"line {line_no}: unrecognized record")
    if header is None:
        raise ReplayFormatError("empty log file")
    if footer is None:
        raise ReplayFormatError("log is truncated (no footer)")
    return header, records, dict(checkpoints), footer


def replay_log(scenario: Scenario, fp: IO[str]) -> ReplayResult:
    """Re-execute a recorded command trace and verify state hashes.

    Args:
        scenario: The same validated scenario (and seed) the log was
            recorded against.
        fp: Open text handle on the log.

    Returns:
        A :class:`ReplayResult`; ``ok`` is False on any hash divergence,
        with ``divergent_tick`` naming the first checkpoint (or the
        final tick) where the recomputed state no longer matches.

    Raises:
        ReplayFormatError: the file is not a wellformed log for this
            scenario (a usage error, distinct from divergence).
    """
    header, records, checkpoints, footer = _parse_log(fp, scenario)
    total_ticks = int(footer["ticks"])
    world = mission.World(scenario, autopilot=bool(header["autopilot"]))

    def check(tick: int) -> ReplayResult | None:
        want = checkpoints.get(tick)
        if want is not None and mission.state_hash(world) != want:
            return ReplayResult(
                ok=False,
                ticks=tick,
                divergent_tick=tick,
                message=f"state hash diverged at tick {tick}",
            )
        return None

    while world.state.tick_index < total_ticks:
        tick = world.state.tick_index
        diverged = check(tick)
        if diverged:
            return diverged
        commands = []
        for record in records.pop(tick, []):
            if "frame" in record:
                seq, msg = _decode_frame_record(record, record["_line"])
                commands.append((int(record.get("session", 0)), seq, msg))
            elif "override" in record:
                world.manual_override = bool(record["override"])
            elif "safe_stop" in record:
                world.safe_stop()
        world.tick(commands)

    if records:
        stray = min(records)
        return ReplayResult(
            ok=False,
            ticks=total_ticks,
            divergent_tick=stray,
            message=(
                f"log contains commands at tick {stray}, beyond the recorded "
                f"run of {total_ticks} ticks"
            ),
        )

    final_hash = mission.state_hash(world)
    if final_hash != footer["hash"] or world.state.mission.name != footer["state"]:
        return ReplayResult(
            ok=False,
            ticks=total_ticks,
            divergent_tick=total_ticks,
            message=f"final state diverged (at or before tick {total_ticks})",
        )
    return ReplayResult(
        ok=True,
        ticks=total_ticks,
        divergent_tick=None,
        message=f"replay of {total_ticks} ticks matched all recorded hashes",
    )
