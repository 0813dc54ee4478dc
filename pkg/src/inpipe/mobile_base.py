"""Differential-drive motion along the pipe and mid-pipe centering.

The pose is 2-D: axial position, signed lateral offset from the pipe
axis, and yaw.  The robot rides the pipe invert, so lateral is the only
centering degree of freedom the differential drive can correct; a
proportional controller steers the body back to the middle while
cruising.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from . import kernels
from .pipe_world import PipeSpec, next_joint_ahead


@dataclass
class BasePose:
    """Robot body pose relative to the pipe: axial, lateral, yaw."""

    axial_mm: float = 0.0
    lateral_mm: float = 0.0
    yaw_rad: float = 0.0


@dataclass(frozen=True)
class DriveConfig:
    """Drive geometry, speed limits, and centering-controller gains."""

    track_width_mm: float = 400.0
    cruise_mm_s: float = 200.0
    k_lat: float = 0.002  # rad/(s*mm)
    k_yaw: float = 1.5  # 1/s
    speed_limit_mm_s: float = 300.0


@dataclass
class DriveCommand:
    """Signed wheel speeds, mm/s."""

    v_left_mm_s: float = 0.0
    v_right_mm_s: float = 0.0

    def validate(self, limit: float = 300.0) -> None:
        if abs(self.v_left_mm_s) > limit or abs(self.v_right_mm_s) > limit:
            raise ValueError(f"wheel speed exceeds +/-{limit:g} mm/s")


def step_drive(
    pose: BasePose,
    cmd: DriveCommand,
    track_width_mm: float,
    dt: float,
) -> BasePose:
    """Integrate the differential-drive kinematics one step.

    ``v = (vl+vr)/2`` and ``omega = (vr-vl)/track``; the translation uses
    the pre-step yaw.  Pipe-end clamping and wall-contact faulting are
    the tick loop's responsibility.

    >>> p = step_drive(BasePose(), DriveCommand(100.0, 100.0), 400.0, 1.0)
    >>> (p.axial_mm, p.lateral_mm, p.yaw_rad)
    (100.0, 0.0, 0.0)
    """
    axial, lateral, yaw = kernels.step_pose(
        pose.axial_mm,
        pose.lateral_mm,
        pose.yaw_rad,
        cmd.v_left_mm_s,
        cmd.v_right_mm_s,
        track_width_mm,
        dt,
    )
    return BasePose(axial_mm=axial, lateral_mm=lateral, yaw_rad=yaw)


def centering_controller(
    pose: BasePose,
    cruise_mm_s: float,
    config: DriveConfig | None = None,
) -> DriveCommand:
    """Proportional mid-pipe centering law.

    ``omega_cmd = -(k_lat * lateral + k_yaw * yaw)`` converted to wheel
    speeds about the cruise speed and saturated at the drive limits.
    """
    cfg = config or DriveConfig()
    omega = -(cfg.k_lat * pose.lateral_mm + cfg.k_yaw * pose.yaw_rad)
    half_track = cfg.track_width_mm / 2.0
    v_left = cruise_mm_s - omega * half_track
    v_right = cruise_mm_s + omega * half_track
    lim = cfg.speed_limit_mm_s
    v_left = max(-lim, min(lim, v_left))
    v_right = max(-lim, min(lim, v_right))
    return DriveCommand(v_left, v_right)


def make_tick_rng(seed: int, tick_index: int) -> random.Random:
    """Deterministic per-tick RNG: pure function of (scenario seed, tick)."""
    return random.Random((seed << 32) ^ tick_index)


def joint_proximity_sensor(
    spec: PipeSpec,
    pose: BasePose,
    sigma_mm: float,
    rng: random.Random,
) -> float:
    """Noisy distance to the nearest joint ahead of the robot.

    Returns the signed axial distance plus zero-mean Gaussian noise, or
    ``+inf`` (no noise added) once the robot is past the last joint.
    Determinism: the caller supplies an ``rng`` derived from the
    scenario seed and tick index (:func:`make_tick_rng`), so replays see
    identical readings.
    """
    joint = next_joint_ahead(spec, pose.axial_mm)
    if joint is None:
        return math.inf
    distance = joint.axial_pos_mm - pose.axial_mm
    if sigma_mm > 0.0:
        distance += rng.gauss(0.0, sigma_mm)
    return distance
