"""Mission state machine and the deterministic simulation tick.

One fixed-timestep tick (50 Hz) advances the whole world: queued
commands are drained FIFO and validated against the current state (bad
commands turn into NACKs, never corrupt state), the optional autopilot
issues its own commands through the same path, then drive, legs, tool
and process advance one step.  Everything is a pure function of
(scenario, seed, command trace), which is what makes replay logs and
byte-identical reruns possible.

Per joint the autopilot mirrors the rehabilitation sequence: drive to
the joint, sensor-guided stop, wall-press to the extended mode, brush
passes (straight then tapered) until the removal gate is met, deploy
the drive-wheel arm and nozzle, inject a full bead around the
circumference, spatula finish, stow and compress, move on.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum

from . import kernels, protocol
from .errors import InterlockError, WorkspaceError
from .kinematics import (
    LegGeometry,
    LegState,
    brush_transmissibility,
    make_legs,
    required_extension,
    wall_press_step,
)
from .mobile_base import (
    BasePose,
    DriveCommand,
    DriveConfig,
    centering_controller,
    joint_proximity_sensor,
    make_tick_rng,
    step_drive,
)
from .pipe_world import (
    UMM3_PER_MM3,
    JointSpec,
    Scenario,
    joint_near,
    removal_fraction,
    seal_coverage,
)
from . import tool_system
from .tool_system import (
    AXIAL_REACH_MM,
    BRUSH_FORCING_HZ,
    FINISH_GATE,
    R_MAX_MM,
    R_MIN_MM,
    REMOVAL_GATE,
    Cartridge,
    DriveWheelArm,
    ToolConfig,
    ToolKind,
    ToolPose,
    check_axial_reach,
    move_tool,
    sector_width_rad,
    wrap_theta,
)

#: Fixed simulation timestep, s (50 Hz).
DT = 0.02

#: ALIGNING stop tolerance on the estimated remaining distance, mm.
ALIGN_TOLERANCE_MM = 2.0

#: Sensor samples averaged before the aligner trusts its estimate.
ALIGN_WINDOW = 25

#: Fixed settle time between nozzle placement and injection start, ticks.
SEAL_PREP_SETTLE_TICKS = 25

#: Spatula finishing sweep duration, ticks (2 s).
FINISH_SWEEP_TICKS = 100


class Mode(IntEnum):
    COMPRESSED = 0
    EXTENDED = 1


class MissionState(IntEnum):
    DRIVING = 0
    ALIGNING = 1
    EXTENDING = 2
    EXTENDED_IDLE = 3
    CLEANING = 4
    SEAL_PREP = 5
    SEALING = 6
    FINISHING = 7
    COMPRESSING = 8
    FAULT = 9
    DONE = 10


_ALLOWED_TRANSITIONS: dict[MissionState, set[MissionState]] = {
    # EXTENDING directly from DRIVING covers the teleoperated press:
    # a human stops wherever they like, without the sensor-guided
    # ALIGNING phase the autopilot uses.
    MissionState.DRIVING: {
        MissionState.ALIGNING,
        MissionState.EXTENDING,
        MissionState.DONE,
    },
    MissionState.ALIGNING: {MissionState.DRIVING, MissionState.EXTENDING},
    MissionState.EXTENDING: {MissionState.EXTENDED_IDLE},
    MissionState.EXTENDED_IDLE: {
        MissionState.CLEANING,
        MissionState.SEAL_PREP,
        MissionState.SEALING,
        MissionState.FINISHING,
        MissionState.COMPRESSING,
    },
    MissionState.CLEANING: {MissionState.EXTENDED_IDLE},
    MissionState.SEAL_PREP: {MissionState.SEALING, MissionState.EXTENDED_IDLE},
    MissionState.SEALING: {MissionState.FINISHING, MissionState.EXTENDED_IDLE},
    MissionState.FINISHING: {MissionState.EXTENDED_IDLE, MissionState.COMPRESSING},
    MissionState.COMPRESSING: {MissionState.DRIVING, MissionState.DONE},
    MissionState.FAULT: set(),
    MissionState.DONE: set(),
}


def validate_transition(from_state: MissionState, to_state: MissionState) -> bool:
    """Pure predicate over the legal mission-state graph.

    Any state may escape to FAULT; self-transitions are no-ops and
    always legal.  The power-tool states are reachable only from the
    wall-pressed configuration.

    >>> validate_transition(MissionState.DRIVING, MissionState.CLEANING)
    False
    >>> validate_transition(MissionState.EXTENDED_IDLE, MissionState.SEALING)
    True
    """
    if to_state == MissionState.FAULT or from_state == to_state:
        return True
    return to_state in _ALLOWED_TRANSITIONS[from_state]


@dataclass
class RobotState:
    """The single source of truth advanced by the tick."""

    pose: BasePose
    mode: Mode
    legs: list[LegState]
    tool: ToolPose
    tool_kind: ToolKind | None
    cartridge: Cartridge
    arm: DriveWheelArm
    mission: MissionState
    tick_index: int = 0
    v_left: float = 0.0
    v_right: float = 0.0
    faults: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class MissionPlan:
    """Autopilot parameters: brush schedule and the abort policy."""

    passes_straight: int = 2
    passes_tapered: int = 2
    max_total_passes: int = 8
    auto_reload: bool = False

    @classmethod
    def from_config(cls, config: dict) -> "MissionPlan":
        return cls(
            passes_straight=int(config.get("passes_straight", 2)),
            passes_tapered=int(config.get("passes_tapered", 2)),
            max_total_passes=int(config.get("max_total_passes", 8)),
            auto_reload=bool(config.get("auto_reload", False)),
        )


# ---------------------------------------------------------------------------
# Tick events (consumed by the server / report)

ACK = 0
EVENT_FAULT = 0
EVENT_PHASE = 1
EVENT_JOINT_DONE = 2
EVENT_CARTRIDGE = 3


@dataclass
class CommandResult:
    """Outcome of one queued command: ACK (status 0) or NACK."""

    session_id: object
    seq: int
    status: int
    detail: int = 0


@dataclass
class SimEvent:
    code: int
    detail: int


class _Autopilot:
    """Per-run controller memory; all contents derive deterministically."""

    def __init__(self) -> None:
        self.joint_idx = 0
        self.window: deque[float] = deque(maxlen=ALIGN_WINDOW)
        self.straight_left = 0
        self.tapered_left = 0
        self.total_passes = 0
        self.loaded_once = False
        self.stow_requested = False


class World:
    """Scenario + robot state + controllers; owns all mutation via tick()."""

    def __init__(self, scenario: Scenario, autopilot: bool = False) -> None:
        self.scenario = scenario
        self.pipe = scenario.pipe
        self.geom = LegGeometry(**scenario.leg_geometry)
        self.drive_cfg = DriveConfig(**scenario.drive)
        self.tool_cfg = ToolConfig(**scenario.tool)
        self.plan = MissionPlan.from_config(scenario.plan)
        self.autopilot_enabled = autopilot
        self.manual_override = False  # set while a session holds the operator lock
        self.dt = DT

        self.state = RobotState(
            pose=BasePose(),
            mode=Mode.COMPRESSED,
            legs=make_legs(self.geom.extension_min_mm),
            tool=ToolPose(),
            tool_kind=None,
            cartridge=Cartridge.from_config(scenario.cartridge),
            arm=DriveWheelArm(),
            mission=MissionState.DRIVING,
        )
        self.ap = _Autopilot()
        self.ap.straight_left = self.plan.passes_straight
        self.ap.tapered_left = self.plan.passes_tapered

        # Work-in-progress sub-state of the current phase.
        self.active_joint: JointSpec | None = None
        self.active_joint_idx: int | None = None
        self.press_target_mm: float | None = None
        self.tool_target: ToolPose | None = None
        self.clean_run: dict | None = None
        self.prep_run: dict | None = None
        self.seal_run: dict | None = None
        self.finish_ticks = 0
        self.stow_run: dict | None = None

        # Accounting.
        self.deposited_umm3 = 0
        self.loaded_umm3 = 0
        self.reloads = 0
        self.distance_mm = 0.0
        n = len(self.pipe.joints)
        self.joint_phase_ticks: list[dict[str, int]] = [{} for _ in range(n)]
        self.pending_events: list[SimEvent] = []
        self.pending_map_update = False

    # -- helpers ----------------------------------------------------------

    def fault(self, cause: str) -> None:
        """Enter FAULT: record the cause and zero every actuator rate."""
        state = self.state
        if state.mission == MissionState.FAULT:
            return
        state.faults.append(cause)
        state.mission = MissionState.FAULT
        state.v_left = 0.0
        state.v_right = 0.0
        self.tool_target = None
        self.clean_run = None
        self.prep_run = None
        self.seal_run = None
        self.stow_run = None
        self.pending_events.append(SimEvent(EVENT_FAULT, len(state.faults) - 1))

    def safe_stop(self) -> None:
        """Dead-man stop: zero the drive and halt manual injection.

        Invoked when the operator-lock holder disconnects; takes effect
        within the tick it is queued on.
        """
        state = self.state
        state.v_left = 0.0
        state.v_right = 0.0
        self.tool_target = None
        if (
            state.mission == MissionState.SEALING
            and self.seal_run is not None
            and self.seal_run.get("manual")
        ):
            self.seal_run = None
            self._transition(MissionState.EXTENDED_IDLE)

    def _transition(self, to_state: MissionState) -> None:
        if not validate_transition(self.state.mission, to_state):
            self.fault(
                f"illegal transition {self.state.mission.name} -> {to_state.name}"
            )
            return
        if self.state.mission != to_state:
            self.state.mission = to_state
            self.pending_events.append(SimEvent(EVENT_PHASE, int(to_state)))

    def tool_busy(self) -> bool:
        return (
            self.tool_target is not None
            or self.clean_run is not None
            or self.prep_run is not None
            or self.stow_run is not None
        )

    def sensor_reading(self) -> float:
        """Noisy joint distance for the current tick (pure per tick)."""
        rng = make_tick_rng(self.scenario.seed, self.state.tick_index)
        return joint_proximity_sensor(
            self.pipe, self.state.pose, self.scenario.sensor_noise_mm, rng
        )

    def wall_radius(self) -> float:
        return self.pipe.diameter_at(self.state.pose.axial_mm) / 2.0

    def _wall_r_target(self) -> float:
        return min(R_MAX_MM, self.wall_radius())

    def autopilot_active(self) -> bool:
        return self.autopilot_enabled and not self.manual_override

    # -- command application ----------------------------------------------

    def apply_command(self, msg) -> tuple[int, int]:
        """Validate and apply one command message.

        Returns ``(status, detail)`` — status 0 is ACK, anything else is
        the NACK status code.  Commands never corrupt state: a refused
        command leaves the world untouched.
        """
        state = self.state
        if isinstance(msg, protocol.Estop):
            self.fault("emergency stop")
            return ACK, 0
        if isinstance(msg, protocol.Heartbeat):
            return ACK, 0
        if state.mission == MissionState.FAULT:
            return protocol.NACK_BAD_STATE, protocol.DETAIL_FAULTED
        if state.mission == MissionState.DONE and not isinstance(
            msg, protocol.CartridgeLoad
        ):
            return protocol.NACK_BAD_STATE, 0

        if isinstance(msg, protocol.Drive):
            return self._cmd_drive(msg)
        if isinstance(msg, protocol.ModeCommand):
            return self._cmd_mode(msg)
        if isinstance(msg, protocol.ToolSelect):
            return self._cmd_tool_select(msg)
        if isinstance(msg, protocol.ToolMove):
            return self._cmd_tool_move(msg)
        if isinstance(msg, protocol.Clean):
            return self._cmd_clean(msg)
        if isinstance(msg, protocol.Inject):
            return self._cmd_inject(msg)
        if isinstance(msg, protocol.Spatula):
            return self._cmd_spatula()
        if isinstance(msg, protocol.CartridgeLoad):
            return self._cmd_cartridge_load()
        if isinstance(msg, protocol.Lock):
            # Lock arbitration happens at the session layer; reaching the
            # world it is a harmless no-op.
            return ACK, 0
        return protocol.NACK_UNKNOWN_TYPE, 0

    def _cmd_drive(self, msg: protocol.Drive) -> tuple[int, int]:
        state = self.state
        if state.mode != Mode.COMPRESSED or state.mission not in (
            MissionState.DRIVING,
            MissionState.ALIGNING,
        ):
            return protocol.NACK_INTERLOCK, protocol.DETAIL_BAD_STATE
        limit = self.drive_cfg.speed_limit_mm_s
        if abs(msg.v_left_mm_s) > limit or abs(msg.v_right_mm_s) > limit:
            return protocol.NACK_RANGE, 0
        state.v_left = float(msg.v_left_mm_s)
        state.v_right = float(msg.v_right_mm_s)
        return ACK, 0

    def _cmd_mode(self, msg: protocol.ModeCommand) -> tuple[int, int]:
        state = self.state
        if msg.extend:
            if state.mode != Mode.COMPRESSED or state.mission not in (
                MissionState.DRIVING,
                MissionState.ALIGNING,
            ):
                return protocol.NACK_INTERLOCK, protocol.DETAIL_BAD_STATE
            if state.v_left != 0.0 or state.v_right != 0.0:
                return protocol.NACK_INTERLOCK, protocol.DETAIL_NOT_STANDSTILL
            try:
                target = required_extension(
                    self.pipe.diameter_at(state.pose.axial_mm), self.geom
                )
            except ValueError:
                return protocol.NACK_INTERLOCK, protocol.DETAIL_BAD_STATE
            self.press_target_mm = target
            self._transition(MissionState.EXTENDING)
            return ACK, 0
        # compress
        if state.mode != Mode.EXTENDED or state.mission != MissionState.EXTENDED_IDLE:
            return protocol.NACK_INTERLOCK, protocol.DETAIL_BAD_STATE
        if state.tool_kind is not None or state.arm.deployed or self.tool_busy():
            return protocol.NACK_INTERLOCK, protocol.DETAIL_TOOL_DEPLOYED
        self.press_target_mm = self.geom.extension_min_mm
        # Contact is surrendered the moment the legs start retracting.
        state.mode = Mode.COMPRESSED
        self._transition(MissionState.COMPRESSING)
        return ACK, 0

    def _cmd_tool_select(self, msg: protocol.ToolSelect) -> tuple[int, int]:
        state = self.state
        if state.mission != MissionState.EXTENDED_IDLE:
            return protocol.NACK_INTERLOCK, protocol.DETAIL_BAD_STATE
        if self.tool_busy():
            return protocol.NACK_INTERLOCK, protocol.DETAIL_BUSY
        if msg.kind == protocol.TOOL_STOW:
            if state.tool_kind is None and not state.arm.deployed:
                return ACK, 0
            self.stow_run = {"stage": "move"}
            self.tool_target = None
            return ACK, 0
        if msg.kind not in (0, 1, 2, 3):
            return protocol.NACK_RANGE, 0
        self.prep_run = {"stage": "deploy", "kind": ToolKind(msg.kind), "settle": 0}
        return ACK, 0

    def _cmd_tool_move(self, msg: protocol.ToolMove) -> tuple[int, int]:
        state = self.state
        if state.mission not in (MissionState.EXTENDED_IDLE, MissionState.SEALING):
            return protocol.NACK_INTERLOCK, protocol.DETAIL_BAD_STATE
        if not state.arm.deployed:
            return protocol.NACK_INTERLOCK, protocol.DETAIL_ARM_NOT_DEPLOYED
        if self.clean_run or self.prep_run or self.stow_run:
            return protocol.NACK_INTERLOCK, protocol.DETAIL_BUSY
        r = float(msg.r_mm)
        z = float(msg.z_mm)
        theta = math.radians(msg.theta_centideg / 100.0)
        try:
            tool_system.check_workspace(r, z)
        except WorkspaceError:
            return protocol.NACK_WORKSPACE, 0
        self.tool_target = ToolPose(r_mm=r, theta_rad=theta, z_mm=z)
        return ACK, 0

    def _require_active_joint(self) -> JointSpec | None:
        if self.active_joint is None:
            return None
        return self.active_joint

    def _cmd_clean(self, msg: protocol.Clean) -> tuple[int, int]:
        state = self.state
        if state.mission != MissionState.EXTENDED_IDLE or self.tool_busy():
            return protocol.NACK_INTERLOCK, protocol.DETAIL_BAD_STATE
        if msg.brush not in (0, 1):
            return protocol.NACK_RANGE, 0
        joint = self._require_active_joint()
        if joint is None:
            return protocol.NACK_INTERLOCK, protocol.DETAIL_NO_JOINT
        try:
            check_axial_reach(joint)
        except InterlockError:
            return protocol.NACK_INTERLOCK, protocol.DETAIL_UNREACHABLE
        if msg.passes == 0:
            return ACK, 0
        transmissibility = brush_transmissibility(BRUSH_FORCING_HZ, self.geom)
        if transmissibility >= 1.0:
            return protocol.NACK_INTERLOCK, protocol.DETAIL_VIBRATION
        self.clean_run = {
            "stage": "deploy",
            "kind": ToolKind(msg.brush),
            "passes_left": int(msg.passes),
            "ticks_in_pass": 0,
            "hits": 0,
        }
        self.ap.total_passes += int(msg.passes)
        self._transition(MissionState.CLEANING)
        return ACK, 0

    def _cmd_inject(self, msg: protocol.Inject) -> tuple[int, int]:
        state = self.state
        if not msg.start:
            if state.mission == MissionState.SEALING:
                self.seal_run = None
                self._transition(MissionState.EXTENDED_IDLE)
            return ACK, 0
        if state.mission not in (MissionState.EXTENDED_IDLE, MissionState.SEAL_PREP):
            return protocol.NACK_INTERLOCK, protocol.DETAIL_BAD_STATE
        if state.tool_kind != ToolKind.NOZZLE:
            return protocol.NACK_INTERLOCK, protocol.DETAIL_WRONG_TOOL
        joint = self._require_active_joint()
        if joint is None:
            return protocol.NACK_INTERLOCK, protocol.DETAIL_NO_JOINT
        try:
            check_axial_reach(joint)
        except InterlockError:
            return protocol.NACK_INTERLOCK, protocol.DETAIL_UNREACHABLE
        if not tool_system.z_in_groove(joint, state.tool.z_mm):
            return protocol.NACK_INTERLOCK, protocol.DETAIL_NOT_IN_GROOVE
        if removal_fraction(joint) < REMOVAL_GATE:
            return protocol.NACK_GATE_NOT_MET, 0
        if state.cartridge.fill_umm3 <= 0:
            return protocol.NACK_CARTRIDGE_EMPTY, 0
        manual = state.mission == MissionState.EXTENDED_IDLE
        self.seal_run = {"manual": manual, "front": 0}
        self._transition(MissionState.SEALING)
        return ACK, 0

    def _cmd_spatula(self) -> tuple[int, int]:
        state = self.state
        if state.mission != MissionState.EXTENDED_IDLE or self.tool_busy():
            return protocol.NACK_INTERLOCK, protocol.DETAIL_BAD_STATE
        joint = self._require_active_joint()
        if joint is None:
            return protocol.NACK_INTERLOCK, protocol.DETAIL_NO_JOINT
        if joint.finished:
            return ACK, 0
        if seal_coverage(joint) < FINISH_GATE:
            return protocol.NACK_INTERLOCK, protocol.DETAIL_COVERAGE
        self.finish_ticks = 0
        self._transition(MissionState.FINISHING)
        return ACK, 0

    def _cmd_cartridge_load(self) -> tuple[int, int]:
        if self.state.mission == MissionState.SEALING:
            return protocol.NACK_INTERLOCK, protocol.DETAIL_BUSY
        self.loaded_umm3 += self.state.cartridge.load_full()
        return ACK, 0

    # -- autopilot ----------------------------------------------------------

    def _issue(self, msg) -> None:
        """Apply an autopilot-generated command; a NACK is a controller bug."""
        status, detail = self.apply_command(msg)
        if status != ACK:
            self.fault(
                f"autopilot command {type(msg).__name__} rejected "
                f"(status {status}, detail {detail})"
            )

    def _autopilot_step(self) -> None:
        state = self.state
        joints = self.pipe.joints
        mission = state.mission

        if mission == MissionState.DRIVING:
            if not self.ap.loaded_once:
                self.ap.loaded_once = True
                self._issue(protocol.CartridgeLoad())
            if self.ap.joint_idx >= len(joints):
                state.v_left = 0.0
                state.v_right = 0.0
                self._transition(MissionState.DONE)
                return
            target = joints[self.ap.joint_idx].axial_pos_mm
            if state.pose.axial_mm >= target - 600.0:
                self.ap.window.clear()
                self._transition(MissionState.ALIGNING)
                return
            cmd = centering_controller(
                state.pose, self.drive_cfg.cruise_mm_s, self.drive_cfg
            )
            state.v_left = cmd.v_left_mm_s
            state.v_right = cmd.v_right_mm_s
            return

        if mission == MissionState.ALIGNING:
            joint = joints[self.ap.joint_idx]
            reading = self.sensor_reading()
            if math.isfinite(reading):
                estimate = state.pose.axial_mm + reading
                if abs(estimate - joint.axial_pos_mm) <= 500.0:
                    self.ap.window.append(estimate)
            if not self.ap.window:
                remaining = joint.axial_pos_mm - state.pose.axial_mm
            else:
                remaining = (
                    sum(self.ap.window) / len(self.ap.window) - state.pose.axial_mm
                )
            settled = len(self.ap.window) >= min(ALIGN_WINDOW, 10)
            if abs(remaining) <= ALIGN_TOLERANCE_MM and settled:
                state.v_left = 0.0
                state.v_right = 0.0
                if abs(joint.axial_offset_mm) > AXIAL_REACH_MM:
                    self.fault("joint unreachable")
                    return
                self.press_target_mm = required_extension(
                    self.pipe.diameter_at(state.pose.axial_mm), self.geom
                )
                self._transition(MissionState.EXTENDING)
                return
            if remaining > 500.0:
                speed = self.drive_cfg.cruise_mm_s
            elif remaining > 50.0:
                speed = 100.0
            elif remaining > ALIGN_TOLERANCE_MM:
                speed = 25.0
            elif remaining < -ALIGN_TOLERANCE_MM:
                speed = -25.0
            else:
                speed = 0.0
            cmd = centering_controller(state.pose, speed, self.drive_cfg)
            state.v_left = cmd.v_left_mm_s
            state.v_right = cmd.v_right_mm_s
            return

        if mission == MissionState.EXTENDED_IDLE and not self.tool_busy():
            joint = self.active_joint
            if joint is None:
                self.fault("no joint under the extended robot")
                return
            removal = removal_fraction(joint)
            if self.ap.straight_left > 0:
                passes = self.ap.straight_left
                self.ap.straight_left = 0
                self._issue(protocol.Clean(passes=passes, brush=0))
                return
            if self.ap.tapered_left > 0:
                passes = self.ap.tapered_left
                self.ap.tapered_left = 0
                self._issue(protocol.Clean(passes=passes, brush=1))
                return
            if removal < REMOVAL_GATE:
                if self.ap.total_passes >= self.plan.max_total_passes:
                    self.fault(
                        f"cleaning gate unreachable after "
                        f"{self.ap.total_passes} passes"
                    )
                    return
                self._issue(protocol.Clean(passes=1, brush=1))
                return
            seal = joint.seal
            bead_complete = seal is not None and all(
                d >= r for d, r in zip(seal.deposits_umm3, seal.required_umm3)
            )
            if not bead_complete:
                self.prep_run = {"stage": "deploy", "kind": ToolKind.NOZZLE, "settle": 0}
                self._transition(MissionState.SEAL_PREP)
                return
            if not joint.finished:
                self._issue(protocol.Spatula())
                return
            if self.ap.stow_requested:
                return  # stow still in progress handled via tool_busy
            if state.tool_kind is not None or state.arm.deployed:
                self.ap.stow_requested = True
                self._issue(protocol.ToolSelect(kind=protocol.TOOL_STOW))
                return
            self.ap.stow_requested = False
            self._issue(protocol.ModeCommand(extend=False))
            return

    # -- per-phase physics/process steps ------------------------------------

    def _step_tool_motion(self) -> None:
        """Progress a pending manual tool-move target."""
        if self.tool_target is None:
            return
        try:
            pose, busy = move_tool(
                self.state.tool,
                self.tool_target,
                self.dt,
                self.tool_cfg,
                self.state.arm.deployed,
            )
        except (WorkspaceError, InterlockError) as exc:
            self.tool_target = None
            self.fault(f"tool motion fault: {exc}")
            return
        self.state.tool = pose
        if not busy:
            self.tool_target = None

    def _step_prep(self) -> None:
        """Progress tool selection: arm deploy, then (for the nozzle after
        SEAL_PREP entry) move into the groove and settle."""
        run = self.prep_run
        if run is None:
            return
        state = self.state
        if run["stage"] == "deploy":
            if state.arm.step_deploy(self.dt):
                state.tool_kind = run["kind"]
                if state.mission == MissionState.SEAL_PREP:
                    run["stage"] = "move"
                else:
                    self.prep_run = None
                    return
            else:
                return
        if run["stage"] == "move":
            joint = self.active_joint
            assert joint is not None
            target = ToolPose(
                r_mm=self._wall_r_target(),
                theta_rad=0.0,
                z_mm=joint.axial_offset_mm,
            )
            pose, busy = move_tool(state.tool, target, self.dt, self.tool_cfg, True)
            state.tool = pose
            if not busy:
                run["stage"] = "settle"
            return
        if run["stage"] == "settle":
            run["settle"] += 1
            if run["settle"] >= SEAL_PREP_SETTLE_TICKS:
                self.prep_run = None
                if state.mission == MissionState.SEAL_PREP:
                    self._issue(protocol.Inject(start=True))

    def _step_stow(self) -> None:
        run = self.stow_run
        if run is None:
            return
        state = self.state
        if run["stage"] == "move":
            target = ToolPose(
                r_mm=R_MIN_MM, theta_rad=state.tool.theta_rad, z_mm=0.0
            )
            pose, busy = move_tool(state.tool, target, self.dt, self.tool_cfg, True)
            state.tool = pose
            if not busy:
                run["stage"] = "retract"
            return
        if run["stage"] == "retract":
            state.arm.retract()
            state.tool_kind = None
            self.stow_run = None
            self.ap.stow_requested = False

    def _step_drive_phase(self) -> None:
        state = self.state
        if state.mode != Mode.COMPRESSED:
            return
        before = state.pose.axial_mm
        cmd = DriveCommand(state.v_left, state.v_right)
        state.pose = step_drive(state.pose, cmd, self.drive_cfg.track_width_mm, self.dt)
        self.distance_mm += abs(state.pose.axial_mm - before)
        total = self.pipe.total_length_mm
        if state.pose.axial_mm < 0.0:
            state.pose.axial_mm = 0.0
            self.fault("overran pipe start")
        elif state.pose.axial_mm > total:
            state.pose.axial_mm = total
            self.fault("overran pipe end")
        clearance = self.wall_radius() - self.geom.body_radius_mm
        if abs(state.pose.lateral_mm) >= clearance:
            self.fault("body contacted the pipe wall")
        elif abs(state.pose.yaw_rad) >= math.pi / 2.0:
            self.fault("yaw out of range")

    def _step_extending(self) -> None:
        state = self.state
        assert self.press_target_mm is not None
        done = wall_press_step(
            state.legs,
            self.press_target_mm,
            self.pipe.diameter_at(state.pose.axial_mm),
            self.dt,
            self.geom,
        )
        if done:
            if not all(leg.in_contact for leg in state.legs):
                self.fault("wall press finished without full contact")
                return
            state.mode = Mode.EXTENDED
            # The press mechanically centers the body in the bore.
            state.pose.lateral_mm = 0.0
            state.pose.yaw_rad = 0.0
            self.press_target_mm = None
            self.active_joint = joint_near(
                self.pipe, state.pose.axial_mm, 500.0
            )
            self.active_joint_idx = (
                self.pipe.joints.index(self.active_joint)
                if self.active_joint is not None
                else None
            )
            self._transition(MissionState.EXTENDED_IDLE)
            self.pending_map_update = True

    def _step_compressing(self) -> None:
        state = self.state
        assert self.press_target_mm is not None
        done = wall_press_step(
            state.legs,
            self.press_target_mm,
            self.pipe.diameter_at(state.pose.axial_mm),
            self.dt,
            self.geom,
        )
        if done:
            state.mode = Mode.COMPRESSED
            self.press_target_mm = None
            self.active_joint = None
            self.active_joint_idx = None
            if self.autopilot_active():
                self.pending_events.append(
                    SimEvent(EVENT_JOINT_DONE, self.ap.joint_idx)
                )
                self.ap.joint_idx += 1
                self.ap.total_passes = 0
                self.ap.straight_left = self.plan.passes_straight
                self.ap.tapered_left = self.plan.passes_tapered
                if self.ap.joint_idx >= len(self.pipe.joints):
                    self._transition(MissionState.DONE)
                    return
            self._transition(MissionState.DRIVING)

    def _step_cleaning(self) -> None:
        run = self.clean_run
        state = self.state
        if run is None:
            self._transition(MissionState.EXTENDED_IDLE)
            return
        joint = self.active_joint
        assert joint is not None
        if run["stage"] == "deploy":
            if state.arm.step_deploy(self.dt):
                state.tool_kind = run["kind"]
                run["stage"] = "approach"
            return
        if state.tool_kind != run["kind"]:
            state.tool_kind = run["kind"]  # brush change between passes
        if run["stage"] == "approach":
            target = ToolPose(
                r_mm=self._wall_r_target(),
                theta_rad=0.0,
                z_mm=joint.axial_offset_mm,
            )
            pose, busy = move_tool(state.tool, target, self.dt, self.tool_cfg, True)
            state.tool = pose
            if not busy:
                run["stage"] = "sweep"
                run["ticks_in_pass"] = 0
                run["hits"] = 0
            return
        # sweep
        levels = joint.corrosion.levels
        n = len(levels)
        width = sector_width_rad(n)
        factor = tool_system.brush_factor(run["kind"])
        run["ticks_in_pass"] += 1
        swept = run["ticks_in_pass"] * self.tool_cfg.theta_rate_rad_s * self.dt
        state.tool.theta_rad = wrap_theta(swept)
        target_hits = min(n, int(swept / width) + 1)
        if target_hits > run["hits"]:
            kernels.clean_decay(levels, run["hits"], target_hits, factor)
            run["hits"] = target_hits
        if swept >= 2.0 * math.pi:
            if run["hits"] < n:
                kernels.clean_decay(levels, run["hits"], n, factor)
                run["hits"] = n
            run["passes_left"] -= 1
            run["ticks_in_pass"] = 0
            run["hits"] = 0
            self.pending_map_update = True
            if run["passes_left"] <= 0:
                self.clean_run = None
                self._transition(MissionState.EXTENDED_IDLE)

    def _step_sealing(self) -> None:
        run = self.seal_run
        state = self.state
        if run is None:
            self._transition(MissionState.EXTENDED_IDLE)
            return
        joint = self.active_joint
        assert joint is not None and joint.seal is not None
        # Safety: the gate must hold on every tick that deposits.
        if removal_fraction(joint) < REMOVAL_GATE:
            self.fault("safety: injection attempted below the removal gate")
            return
        if state.cartridge.fill_umm3 <= 0:
            if self.plan.auto_reload and self.autopilot_active():
                self.loaded_umm3 += state.cartridge.load_full()
                self.reloads += 1
                self.pending_events.append(SimEvent(EVENT_CARTRIDGE, self.reloads))
            else:
                self.pending_events.append(SimEvent(EVENT_CARTRIDGE, 0))
                if self.autopilot_active():
                    self.fault("cartridge empty")
                else:
                    self.seal_run = None
                    self._transition(MissionState.EXTENDED_IDLE)
                return
        if run["manual"]:
            self._step_tool_motion()
            deposited = tool_system.inject_at_theta(
                joint, state.cartridge, state.tool.theta_rad, self.dt
            )
            self.deposited_umm3 += deposited
            if deposited:
                self.pending_map_update = True
            return
        deposited, front = tool_system.inject_spread_tick(
            joint, state.cartridge, run["front"], self.dt
        )
        self.deposited_umm3 += deposited
        run["front"] = front
        n = joint.seal.sector_count
        state.tool.theta_rad = wrap_theta(front * sector_width_rad(n))
        if deposited:
            self.pending_map_update = True
        if front >= n:
            self.seal_run = None
            self.finish_ticks = 0
            if self.autopilot_active():
                self._issue(protocol.Inject(start=False))

    def _step_finishing(self) -> None:
        state = self.state
        joint = self.active_joint
        assert joint is not None
        if state.tool_kind != ToolKind.SPATULA:
            state.tool_kind = ToolKind.SPATULA
        self.finish_ticks += 1
        state.tool.theta_rad = wrap_theta(
            self.finish_ticks * (2.0 * math.pi / FINISH_SWEEP_TICKS)
        )
        if self.finish_ticks >= FINISH_SWEEP_TICKS:
            try:
                tool_system.spatula_finish(joint)
            except InterlockError as exc:
                self.fault(f"finish fault: {exc}")
                return
            self.pending_map_update = True
            self._transition(MissionState.EXTENDED_IDLE)

    def _check_safety(self) -> None:
        """Hard runtime invariants; violations fault immediately.

        These are plain ``if``/``fault`` checks (not assert statements)
        so they stay active regardless of interpreter optimization.
        """
        state = self.state
        if state.mission in (
            MissionState.CLEANING,
            MissionState.SEALING,
            MissionState.FINISHING,
        ):
            if state.mode != Mode.EXTENDED:
                self.fault("safety: power tool active while not wall-pressed")
                return
            if not all(leg.in_contact for leg in state.legs):
                self.fault("safety: power tool active without full wall contact")
                return
        if state.mode == Mode.EXTENDED and not all(
            leg.in_contact for leg in state.legs
        ):
            self.fault("safety: extended mode lost wall contact")
            return
        cart = state.cartridge
        if cart.fill_umm3 < 0 or cart.fill_umm3 > cart.capacity_umm3:
            self.fault("safety: cartridge fill out of bounds")
            return
        if self.loaded_umm3 - self.deposited_umm3 != cart.fill_umm3:
            self.fault("safety: sealant conservation violated")

    # -- the tick ------------------------------------------------------------

    def tick(self, commands: list[tuple[object, int, object]]) -> list[CommandResult]:
        """Advance the world by one fixed timestep.

        Args:
            commands: FIFO of ``(session_id, seq, message)`` drained this
                tick.  Invalid commands become NACK results; state is
                never corrupted.

        Returns:
            One :class:`CommandResult` per drained command, in order.
        """
        results = []
        for session_id, seq, msg in commands:
            status, detail = self.apply_command(msg)
            results.append(CommandResult(session_id, seq, status, detail))

        state = self.state
        if self.autopilot_active() and state.mission not in (
            MissionState.FAULT,
            MissionState.DONE,
        ):
            self._autopilot_step()

        phase = state.mission
        if phase in (MissionState.DRIVING, MissionState.ALIGNING):
            self._step_drive_phase()
        elif phase == MissionState.EXTENDING:
            self._step_extending()
        elif phase == MissionState.EXTENDED_IDLE:
            self._step_prep()
            self._step_stow()
            self._step_tool_motion()
        elif phase == MissionState.CLEANING:
            self._step_cleaning()
        elif phase == MissionState.SEAL_PREP:
            self._step_prep()
        elif phase == MissionState.SEALING:
            self._step_sealing()
        elif phase == MissionState.FINISHING:
            self._step_finishing()
        elif phase == MissionState.COMPRESSING:
            self._step_compressing()

        self._check_safety()

        if phase not in (MissionState.FAULT, MissionState.DONE):
            idx = self.active_joint_idx
            if idx is None:
                idx = self.ap.joint_idx
            if 0 <= idx < len(self.joint_phase_ticks):
                bucket = self.joint_phase_ticks[idx]
                bucket[phase.name] = bucket.get(phase.name, 0) + 1

        state.tick_index += 1
        return results


# ---------------------------------------------------------------------------
# State hashing (replay + determinism)


def state_hash(world: World) -> str:
    """SHA-256 over a canonical byte encoding of all mutable state."""
    h = hashlib.sha256()
    state = world.state
    h.update(
        struct.pack(
            ">QBBddddd",
            state.tick_index,
            int(state.mission),
            int(state.mode),
            state.pose.axial_mm,
            state.pose.lateral_mm,
            state.pose.yaw_rad,
            state.v_left,
            state.v_right,
        )
    )
    for leg in state.legs:
        h.update(
            struct.pack(
                ">dddB",
                leg.extension_mm,
                leg.spring_compression_mm,
                leg.contact_force_n,
                leg.in_contact,
            )
        )
    kind = -1 if state.tool_kind is None else int(state.tool_kind)
    h.update(
        struct.pack(
            ">dddhBd",
            state.tool.r_mm,
            state.tool.theta_rad,
            state.tool.z_mm,
            kind,
            state.arm.deployed,
            state.arm.spring_partial_compression_mm,
        )
    )
    h.update(
        struct.pack(
            ">qqqq",
            state.cartridge.fill_umm3,
            state.cartridge.capacity_umm3,
            world.loaded_umm3,
            world.deposited_umm3,
        )
    )
    for joint in world.pipe.joints:
        for level in joint.corrosion.levels:
            h.update(struct.pack(">d", level))
        if joint.seal is not None:
            for dep in joint.seal.deposits_umm3:
                h.update(struct.pack(">q", dep))
        h.update(struct.pack(">B", joint.finished))
    h.update(struct.pack(">H", len(state.faults)))
    for fault in state.faults:
        encoded = fault.encode("utf-8")
        h.update(struct.pack(">H", len(encoded)))
        h.update(encoded)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Mission reports


@dataclass
class JointReport:
    joint_index: int
    axial_pos_mm: float
    removal_fraction: float
    seal_coverage: float
    finished: bool
    phase_seconds: dict[str, float]


@dataclass
class MissionReport:
    """Per-joint outcomes plus mission totals; serializes deterministically."""

    joints: list[JointReport]
    ticks: int
    sim_seconds: float
    distance_mm: float
    sealant_used_mm3: float
    sealant_used_umm3: int
    loaded_umm3: int
    final_fill_umm3: int
    reloads: int
    faults: list[str]
    final_state: str
    seed: int
    final_state_hash: str

    def to_json(self) -> str:
        doc = {
            "joints": [
                {
                    "joint_index": j.joint_index,
                    "axial_pos_mm": j.axial_pos_mm,
                    "removal_fraction": j.removal_fraction,
                    "seal_coverage": j.seal_coverage,
                    "finished": j.finished,
                    "phase_seconds": j.phase_seconds,
                }
                for j in self.joints
            ],
            "totals": {
                "ticks": self.ticks,
                "sim_seconds": self.sim_seconds,
                "distance_mm": self.distance_mm,
                "sealant_used_mm3": self.sealant_used_mm3,
                "sealant_used_umm3": self.sealant_used_umm3,
                "sealant_loaded_umm3": self.loaded_umm3,
                "cartridge_final_umm3": self.final_fill_umm3,
                "reloads": self.reloads,
                "faults": self.faults,
            },
            "final_state": self.final_state,
            "seed": self.seed,
            "final_state_hash": self.final_state_hash,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    def table(self) -> str:
        lines = [
            f"{'joint':>5} {'pos mm':>9} {'removal':>8} {'coverage':>9} {'finished':>8}",
        ]
        for j in self.joints:
            lines.append(
                f"{j.joint_index:>5} {j.axial_pos_mm:>9.0f} "
                f"{j.removal_fraction:>8.4f} {j.seal_coverage:>9.4f} "
                f"{'yes' if j.finished else 'no':>8}"
            )
        lines.append(
            f"final={self.final_state} ticks={self.ticks} "
            f"sim={self.sim_seconds:.2f}s distance={self.distance_mm:.0f}mm "
            f"sealant={self.sealant_used_mm3:.1f}mm3 faults={len(self.faults)}"
        )
        return "\n".join(lines)


def build_report(world: World) -> MissionReport:
    joints = []
    for i, joint in enumerate(world.pipe.joints):
        phase_ticks = world.joint_phase_ticks[i] if i < len(world.joint_phase_ticks) else {}
        joints.append(
            JointReport(
                joint_index=i,
                axial_pos_mm=joint.axial_pos_mm,
                removal_fraction=removal_fraction(joint),
                seal_coverage=seal_coverage(joint),
                finished=joint.finished,
                phase_seconds={k: v * world.dt for k, v in sorted(phase_ticks.items())},
            )
        )
    state = world.state
    return MissionReport(
        joints=joints,
        ticks=state.tick_index,
        sim_seconds=state.tick_index * world.dt,
        distance_mm=world.distance_mm,
        sealant_used_mm3=world.deposited_umm3 / UMM3_PER_MM3,
        sealant_used_umm3=world.deposited_umm3,
        loaded_umm3=world.loaded_umm3,
        final_fill_umm3=state.cartridge.fill_umm3,
        reloads=world.reloads,
        faults=list(state.faults),
        final_state=state.mission.name,
        seed=world.scenario.seed,
        final_state_hash=state_hash(world),
    )


def run_mission(
    scenario: Scenario,
    max_ticks: int = 2_000_000,
    on_tick=None,
) -> tuple[MissionReport, World]:
    """Run the autopilot to DONE or FAULT and return the report.

    Args:
        scenario: Validated scenario.
        max_ticks: Hard stop to bound runaway scenarios.
        on_tick: Optional callback ``f(world)`` invoked after every tick
            (used by the replay logger).

    Returns:
        ``(report, world)``.
    """
    world = World(scenario, autopilot=True)
    while (
        world.state.mission not in (MissionState.DONE, MissionState.FAULT)
        and world.state.tick_index < max_ticks
    ):
        world.tick([])
        if on_tick is not None:
            on_tick(world)
    if world.state.mission not in (MissionState.DONE, MissionState.FAULT):
        world.fault("mission exceeded the tick budget")
    return build_report(world), world
