"""Cylindrical-workspace tool arm: brushes, sealant nozzle, spatula.

The tool tip moves in (r, theta, z) — radial reach from the robot axis,
angle around the axis, and axial offset from the robot reference plane.
Work on a joint mutates its sector maps: wire-brush passes decay
corrosion geometrically, the nozzle deposits sealant volume, and the
spatula marks the bead finished once coverage is complete.

Sealant accounting is integer micro-mm^3 end to end, so the conservation
invariant (deposited + remaining fill == loaded) is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

from . import kernels
from .errors import GateNotMetError, InterlockError, WorkspaceError
from .pipe_world import UMM3_PER_MM3, JointSpec, removal_fraction, seal_coverage

# Cylindrical workspace bounds, mm.  r_max reaches the wall of the
# largest pipe (600 mm) with margin; z covers the +/-100 mm axial
# displacement claim with margin.
R_MIN_MM = 350.0
R_MAX_MM = 620.0
Z_MIN_MM = -150.0
Z_MAX_MM = 150.0

#: Hard limit on socket axial displacement the tool can rehabilitate, mm.
AXIAL_REACH_MM = 100.0

#: Corrosion removal required before sealant may be injected.
REMOVAL_GATE = 0.80

#: Seal coverage required before the spatula finish.
FINISH_GATE = 0.99

#: Per-pass corrosion retention factors (level *= factor each pass).
BRUSH_FACTOR_STRAIGHT = 0.65
BRUSH_FACTOR_TAPERED = 0.45

#: Brush forcing frequency while cleaning, Hz (checked against the
#: suspension transmissibility threshold at cleaning start).
BRUSH_FORCING_HZ = 50.0

_TWO_PI = 2.0 * math.pi


class ToolKind(IntEnum):
    """Selectable end effectors; values match the wire encoding."""

    BRUSH_STRAIGHT = 0
    BRUSH_TAPERED = 1
    NOZZLE = 2
    SPATULA = 3


@dataclass
class ToolPose:
    """Tool tip position in cylinder coordinates (r mm, theta rad, z mm)."""

    r_mm: float = R_MIN_MM
    theta_rad: float = 0.0
    z_mm: float = 0.0


@dataclass(frozen=True)
class ToolConfig:
    """Per-axis ramp rates of the tool arm."""

    r_rate_mm_s: float = 20.0
    theta_rate_rad_s: float = 0.2
    z_rate_mm_s: float = 20.0


@dataclass
class Cartridge:
    """Sealant cartridge: integer micro-mm^3 fill, fixed piston constants.

    The piston drives the material at 6 mm/s with up to 1000 N; with the
    default 100 mm bore (area 7853.98 mm^2) the volumetric flow is
    47 123.9 mm^3/s.  Force is a capacity constant, not a dynamics
    input.
    """

    capacity_umm3: int = 2_000_000 * UMM3_PER_MM3
    fill_umm3: int = 0
    piston_area_mm2: float = 7853.98

    PISTON_SPEED_MM_S = 6.0
    MAX_FORCE_N = 1000.0

    @classmethod
    def from_config(cls, config: dict) -> "Cartridge":
        capacity_mm3 = config.get("capacity_mm3", 2.0e6)
        area = config.get("piston_area_mm2", 7853.98)
        if capacity_mm3 <= 0 or area <= 0:
            raise ValueError("cartridge capacity and piston area must be > 0")
        return cls(capacity_umm3=round(capacity_mm3 * UMM3_PER_MM3), piston_area_mm2=area)

    @property
    def fill_mm3(self) -> float:
        return self.fill_umm3 / UMM3_PER_MM3

    @property
    def capacity_mm3(self) -> float:
        return self.capacity_umm3 / UMM3_PER_MM3

    def flow_mm3_s(self) -> float:
        """Volumetric flow while injecting."""
        return self.PISTON_SPEED_MM_S * self.piston_area_mm2

    def budget_umm3_per_tick(self, dt: float) -> int:
        """Integer volume pushed per tick at the fixed piston speed."""
        return round(self.flow_mm3_s() * dt * UMM3_PER_MM3)

    def load_full(self) -> int:
        """Fill to capacity; returns the volume added (for load accounting)."""
        added = self.capacity_umm3 - self.fill_umm3
        self.fill_umm3 = self.capacity_umm3
        return added


@dataclass
class DriveWheelArm:
    """The drive-wheel arm that must press the wall before tool motion.

    Deploying takes :data:`DEPLOY_SECONDS`; when deployed its spring is
    partially compressed to hold wall contact.
    """

    deployed: bool = False
    spring_partial_compression_mm: float = 0.0
    progress_s: float = 0.0

    DEPLOY_SECONDS = 2.0
    PARTIAL_COMPRESSION_MM = 5.0

    def step_deploy(self, dt: float) -> bool:
        """Advance deployment; returns True when contact is established."""
        if self.deployed:
            return True
        self.progress_s += dt
        if self.progress_s >= self.DEPLOY_SECONDS - 1e-9:
            self.deployed = True
            self.spring_partial_compression_mm = self.PARTIAL_COMPRESSION_MM
        return self.deployed

    def retract(self) -> None:
        self.deployed = False
        self.spring_partial_compression_mm = 0.0
        self.progress_s = 0.0


def check_workspace(r_mm: float, z_mm: float) -> None:
    """Reject targets outside the cylindrical workspace."""
    if not R_MIN_MM <= r_mm <= R_MAX_MM:
        raise WorkspaceError(f"r {r_mm:g} outside workspace [{R_MIN_MM:g},{R_MAX_MM:g}]")
    if not Z_MIN_MM <= z_mm <= Z_MAX_MM:
        raise WorkspaceError(f"z {z_mm:g} outside workspace [{Z_MIN_MM:g},{Z_MAX_MM:g}]")


def wrap_theta(theta: float) -> float:
    """Normalize an angle into [0, 2*pi) without float modulo."""
    while theta >= _TWO_PI:
        theta -= _TWO_PI
    while theta < 0.0:
        theta += _TWO_PI
    return theta


def move_tool(
    current: ToolPose,
    target: ToolPose,
    dt: float,
    config: ToolConfig | None = None,
    arm_deployed: bool = True,
) -> tuple[ToolPose, bool]:
    """Ramp the tool one step toward a target pose.

    Each axis moves at its fixed rate; theta takes the shorter way
    around.  Returns ``(new_pose, busy)`` where ``busy`` is True until
    every axis has arrived.

    Raises:
        WorkspaceError: target outside the workspace.
        InterlockError: tool arm moved before the drive-wheel arm is
            deployed against the wall.
    """
    cfg = config or ToolConfig()
    if not arm_deployed:
        raise InterlockError("tool arm requires the drive-wheel arm deployed")
    check_workspace(target.r_mm, target.z_mm)

    def ramp(value: float, goal: float, rate: float) -> float:
        step = rate * dt
        delta = goal - value
        if delta > step:
            return value + step
        if delta < -step:
            return value - step
        return goal

    r = ramp(current.r_mm, target.r_mm, cfg.r_rate_mm_s)
    z = ramp(current.z_mm, target.z_mm, cfg.z_rate_mm_s)

    goal_theta = wrap_theta(target.theta_rad)
    theta = current.theta_rad
    diff = goal_theta - theta
    if diff > math.pi:
        diff -= _TWO_PI
    elif diff < -math.pi:
        diff += _TWO_PI
    step = cfg.theta_rate_rad_s * dt
    if diff > step:
        theta = wrap_theta(theta + step)
    elif diff < -step:
        theta = wrap_theta(theta - step)
    else:
        theta = goal_theta

    pose = ToolPose(r_mm=r, theta_rad=theta, z_mm=z)
    busy = not (r == target.r_mm and z == target.z_mm and theta == goal_theta)
    return pose, busy


def sector_width_rad(sector_count: int) -> float:
    return _TWO_PI / sector_count


def sector_of_theta(theta_rad: float, sector_count: int) -> int:
    """Index of the sector containing an angle."""
    idx = int(wrap_theta(theta_rad) / sector_width_rad(sector_count))
    return min(idx, sector_count - 1)


def brush_factor(kind: ToolKind) -> float:
    if kind == ToolKind.BRUSH_STRAIGHT:
        return BRUSH_FACTOR_STRAIGHT
    if kind == ToolKind.BRUSH_TAPERED:
        return BRUSH_FACTOR_TAPERED
    raise InterlockError(f"{kind.name} is not a brush")


def clean_pass(
    joint: JointSpec,
    sector_range: tuple[int, int],
    kind: ToolKind,
    passes: int,
) -> None:
    """Apply whole brush passes to a sector range ``[start, stop)``.

    Each pass multiplies the corrosion level by the brush's retention
    factor once (repeated multiplication, exactly matching what the
    incremental per-tick sweep produces).  Zero passes is the identity.
    """
    if passes < 0:
        raise ValueError("passes must be >= 0")
    factor = brush_factor(kind)
    start, stop = sector_range
    levels = joint.corrosion.levels
    if not 0 <= start <= stop <= len(levels):
        raise ValueError(f"sector range [{start},{stop}) out of bounds")
    for _ in range(passes):
        kernels.clean_decay(levels, start, stop, factor)


def check_axial_reach(joint: JointSpec) -> None:
    """Interlock: the tool cannot rehabilitate sockets displaced > 100 mm."""
    if abs(joint.axial_offset_mm) > AXIAL_REACH_MM:
        raise InterlockError(
            f"joint unreachable: axial offset {joint.axial_offset_mm:g} mm "
            f"exceeds tool reach {AXIAL_REACH_MM:g} mm"
        )


def check_injection_gate(joint: JointSpec) -> None:
    """The hard >=80% corrosion-removal gate before sealant injection."""
    removal = removal_fraction(joint)
    if removal < REMOVAL_GATE:
        raise GateNotMetError(
            f"removal {removal:.4f} below required {REMOVAL_GATE:g}"
        )


def z_in_groove(joint: JointSpec, z_mm: float) -> bool:
    """Whether a tool z position sits inside the joint's groove."""
    return abs(z_mm - joint.axial_offset_mm) <= joint.groove_width_mm / 2.0


def inject_at_theta(
    joint: JointSpec,
    cartridge: Cartridge,
    theta_rad: float,
    dt: float,
) -> int:
    """Deposit one tick's flow into the sector under the nozzle.

    Used for manual (teleoperated) injection: the operator sweeps theta
    while the piston runs.  The sector simply accumulates volume (it may
    exceed its requirement; coverage caps at 1).  Deposits are limited
    by the remaining cartridge fill.

    Returns the volume deposited in micro-mm^3 (decremented from the
    cartridge, conservation exact).
    """
    seal = joint.seal
    assert seal is not None
    budget = min(cartridge.budget_umm3_per_tick(dt), cartridge.fill_umm3)
    if budget <= 0:
        return 0
    idx = sector_of_theta(theta_rad, seal.sector_count)
    seal.deposits_umm3[idx] += budget
    cartridge.fill_umm3 -= budget
    return budget


def inject_spread_tick(
    joint: JointSpec,
    cartridge: Cartridge,
    front: int,
    dt: float,
) -> tuple[int, int]:
    """Deposit one tick's flow along the bead front (autopilot sealing).

    The bead grows contiguously: each sector fills to its requirement
    before the front advances, so a joint finishes in exactly
    total-required / flow seconds of injection.

    Returns ``(deposited_umm3, new_front)``; ``new_front == sector_count``
    means the bead is complete.
    """
    seal = joint.seal
    assert seal is not None
    budget = min(cartridge.budget_umm3_per_tick(dt), cartridge.fill_umm3)
    if budget <= 0:
        return 0, front
    deposited, front = kernels.inject_spread(
        seal.deposits_umm3, seal.required_umm3, front, budget
    )
    cartridge.fill_umm3 -= deposited
    return deposited, front


def spatula_finish(joint: JointSpec) -> None:
    """Mark the bead finished; requires near-complete coverage. Idempotent.

    Raises:
        InterlockError: coverage below :data:`FINISH_GATE`.
    """
    if joint.finished:
        return
    coverage = seal_coverage(joint)
    if coverage < FINISH_GATE:
        raise InterlockError(
            f"finish requires full bead: coverage {coverage:.4f} < {FINISH_GATE:g}"
        )
    joint.finished = True
