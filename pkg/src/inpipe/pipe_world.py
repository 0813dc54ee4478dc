"""Pipe environment model: segments, joints, corrosion/seal maps, scenario I/O.

A *scenario* is a JSON document describing the pipe (segments and
joints), the random seed, and optional overrides for robot geometry,
drive gains, tool rates, cartridge size and the mission plan.  The
format is documented in ``docs/scenario.md``.  Unknown keys are rejected
at every level so typos fail loudly instead of silently using defaults.

Sealant volumes are tracked as integers in micro-mm^3 (1e-3 mm^3) so
that volumetric conservation holds exactly, tick by tick, with no
floating-point drift.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import ScenarioError

#: Integer sealant volume unit: 1 mm^3 = 1000 micro-mm^3.
UMM3_PER_MM3 = 1000

_DIAMETER_MIN = 800.0
_DIAMETER_MAX = 1200.0

_SCENARIO_KEYS = {
    "segments",
    "joints",
    "seed",
    "sensor_noise_mm",
    "leg_geometry",
    "ring_spacing_mm",
    "drive",
    "tool",
    "cartridge",
    "plan",
}
_SEGMENT_KEYS = {"inner_diameter_mm", "length_mm"}
_JOINT_KEYS = {
    "axial_pos_mm",
    "socket_width_mm",
    "groove_width_mm",
    "groove_depth_mm",
    "axial_offset_mm",
    "sector_count",
    "corrosion",
}
_JOINT_GENERATOR_KEYS = {"spacing_mm", "corrosion", "sector_count", "axial_offset_mm"}
_LEG_GEOMETRY_KEYS = {
    "body_radius_mm",
    "wheel_radius_mm",
    "extension_min_mm",
    "extension_max_mm",
    "spring_rate_n_per_mm",
    "damping_ratio",
    "equivalent_mass_kg",
}
_DRIVE_KEYS = {"track_width_mm", "cruise_mm_s", "k_lat", "k_yaw", "speed_limit_mm_s"}
_TOOL_KEYS = {"r_rate_mm_s", "theta_rate_rad_s", "z_rate_mm_s"}
_CARTRIDGE_KEYS = {"capacity_mm3", "piston_area_mm2"}
_PLAN_KEYS = {"passes_straight", "passes_tapered", "max_total_passes", "auto_reload"}


@dataclass
class PipeSegment:
    """One straight pipe run of constant inner diameter."""

    inner_diameter_mm: float
    length_mm: float

    def validate(self) -> None:
        if not _DIAMETER_MIN <= self.inner_diameter_mm <= _DIAMETER_MAX:
            raise ScenarioError(
                f"segment diameter {self.inner_diameter_mm:g} out of [800,1200]"
            )
        if self.length_mm <= 0:
            raise ScenarioError(f"segment length {self.length_mm:g} must be > 0")


@dataclass
class CorrosionMap:
    """Per-sector corrosion levels in [0,1]; the initial map is retained.

    ``removal_fraction`` is measured against the initial levels so that
    scenarios starting from partial corrosion behave sensibly.
    """

    levels: list[float]
    initial: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.initial:
            self.initial = list(self.levels)

    @property
    def sector_count(self) -> int:
        return len(self.levels)

    def validate(self) -> None:
        if self.sector_count < 8:
            raise ScenarioError(f"sector_count {self.sector_count} must be >= 8")
        for lv in self.levels:
            if not 0.0 <= lv <= 1.0:
                raise ScenarioError(f"corrosion level {lv:g} out of [0,1]")


@dataclass
class SealMap:
    """Per-sector deposited bead volume, integer micro-mm^3.

    ``required_umm3`` is derived from groove cross-section times the
    sector's share of the local circumference.
    """

    deposits_umm3: list[int]
    required_umm3: list[int]

    @property
    def sector_count(self) -> int:
        return len(self.deposits_umm3)

    def coverage(self) -> float:
        """Mean over sectors of min(1, deposited/required)."""
        total = 0.0
        for dep, req in zip(self.deposits_umm3, self.required_umm3):
            total += min(1.0, dep / req) if req > 0 else 1.0
        return total / len(self.deposits_umm3)


@dataclass
class JointSpec:
    """One bell-and-spigot joint socket with its corrosion and seal state.

    ``axial_offset_mm`` is the axial displacement of the socket relative
    to the nominal joint plane.  Values beyond +/-100 mm load fine but
    the robot cannot reach them and will fault at that joint.
    """

    axial_pos_mm: float
    socket_width_mm: float = 120.0
    groove_width_mm: float = 30.0
    groove_depth_mm: float = 15.0
    axial_offset_mm: float = 0.0
    corrosion: CorrosionMap = field(default_factory=lambda: CorrosionMap([1.0] * 72))
    seal: SealMap | None = None
    finished: bool = False

    def validate(self) -> None:
        if self.socket_width_mm <= 0 or self.groove_width_mm <= 0 or self.groove_depth_mm <= 0:
            raise ScenarioError("joint socket/groove dimensions must be > 0")
        if not math.isfinite(self.axial_offset_mm):
            raise ScenarioError("axial_offset_mm must be finite")
        self.corrosion.validate()
        if self.seal is not None and self.seal.sector_count != self.corrosion.sector_count:
            raise ScenarioError("corrosion and seal maps must have the same sector count")


@dataclass
class PipeSpec:
    """The whole pipe: ordered segments plus the joints along them."""

    segments: list[PipeSegment]
    joints: list[JointSpec]

    @property
    def total_length_mm(self) -> float:
        return sum(seg.length_mm for seg in self.segments)

    def diameter_at(self, axial_mm: float) -> float:
        """Inner diameter of the segment containing ``axial_mm``.

        Segments are half-open ``[start, end)``: a position exactly on a
        boundary belongs to the next segment (a joint there sits in the
        bell of the downstream pipe). Positions at or past the end of the
        pipe report the last segment.
        """
        pos = 0.0
        for seg in self.segments:
            pos += seg.length_mm
            if axial_mm < pos:
                return seg.inner_diameter_mm
        return self.segments[-1].inner_diameter_mm

    def validate(self) -> None:
        if not self.segments:
            raise ScenarioError("at least one segment is required")
        for seg in self.segments:
            seg.validate()
        total = self.total_length_mm
        if total <= 0:
            raise ScenarioError("total pipe length must be > 0")
        prev = -math.inf
        for joint in self.joints:
            joint.validate()
            if not 0 < joint.axial_pos_mm < total:
                raise ScenarioError(
                    f"joint at {joint.axial_pos_mm:g} outside pipe (0, {total:g})"
                )
            if joint.axial_pos_mm <= prev:
                raise ScenarioError(
                    f"joint positions must be strictly increasing (at {joint.axial_pos_mm:g})"
                )
            prev = joint.axial_pos_mm


@dataclass
class Scenario:
    """A validated scenario: the pipe plus simulation configuration.

    The ``leg_geometry``/``drive``/``tool``/``cartridge``/``plan`` dicts
    hold only keys known to the respective consumers; values are plain
    numbers/bools ready for the dataclass constructors downstream.
    """

    pipe: PipeSpec
    seed: int = 0
    sensor_noise_mm: float = 5.0
    ring_spacing_mm: float = 800.0
    leg_geometry: dict = field(default_factory=dict)
    drive: dict = field(default_factory=dict)
    tool: dict = field(default_factory=dict)
    cartridge: dict = field(default_factory=dict)
    plan: dict = field(default_factory=dict)


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _num(obj: dict, key: str, where: str, default=None):
    if key not in obj:
        if default is None:
            raise ScenarioError(f"missing required key '{key}' in {where}")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}.{key} must be a number, got {value!r}")
    return float(value)


def required_seal_umm3(joint: JointSpec, diameter_mm: float) -> int:
    """Per-sector required bead volume for a joint in a pipe of ``diameter_mm``.

    Groove cross-section (width x depth) times the sector's arc length,
    rounded to integer micro-mm^3.
    """
    n = joint.corrosion.sector_count
    per_sector_mm3 = (
        joint.groove_width_mm * joint.groove_depth_mm * math.pi * diameter_mm / n
    )
    return round(per_sector_mm3 * UMM3_PER_MM3)


def _build_corrosion(raw, sector_count: int, where: str) -> CorrosionMap:
    if isinstance(raw, list):
        levels = []
        for lv in raw:
            if isinstance(lv, bool) or not isinstance(lv, (int, float)):
                raise ScenarioError(f"{where}.corrosion entries must be numbers")
            levels.append(float(lv))
        if len(levels) != sector_count:
            raise ScenarioError(
                f"{where}.corrosion has {len(levels)} entries, expected {sector_count}"
            )
    else:
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ScenarioError(f"{where}.corrosion must be a number or list")
        levels = [float(raw)] * sector_count
    cmap = CorrosionMap(levels)
    return cmap


def _build_joint(obj: dict, where: str) -> JointSpec:
    _reject_unknown(obj, _JOINT_KEYS, where)
    sector_count = int(_num(obj, "sector_count", where, 72.0))
    joint = JointSpec(
        axial_pos_mm=_num(obj, "axial_pos_mm", where),
        socket_width_mm=_num(obj, "socket_width_mm", where, 120.0),
        groove_width_mm=_num(obj, "groove_width_mm", where, 30.0),
        groove_depth_mm=_num(obj, "groove_depth_mm", where, 15.0),
        axial_offset_mm=_num(obj, "axial_offset_mm", where, 0.0),
        corrosion=_build_corrosion(obj.get("corrosion", 1.0), sector_count, where),
    )
    return joint


def _generate_joints(gen: dict, total_length: float) -> list[JointSpec]:
    """Expand the generator form ``{"spacing_mm": ...}`` into explicit joints."""
    _reject_unknown(gen, _JOINT_GENERATOR_KEYS, "joints generator")
    spacing = _num(gen, "spacing_mm", "joints generator")
    if spacing <= 0:
        raise ScenarioError("joints.spacing_mm must be > 0")
    sector_count = int(_num(gen, "sector_count", "joints generator", 72.0))
    offset = _num(gen, "axial_offset_mm", "joints generator", 0.0)
    corrosion_raw = gen.get("corrosion", 1.0)
    joints = []
    pos = spacing
    while pos < total_length:
        joints.append(
            JointSpec(
                axial_pos_mm=pos,
                axial_offset_mm=offset,
                corrosion=_build_corrosion(corrosion_raw, sector_count, "joints generator"),
            )
        )
        pos += spacing
    return joints


def load_scenario(source: str) -> Scenario:
    """Parse and validate scenario text into a :class:`Scenario`.

    Args:
        source: JSON scenario document.

    Returns:
        A fully validated scenario; every joint has its seal map sized
        from the local pipe diameter.

    Raises:
        ScenarioError: on malformed JSON (with line number) or any
            violated validation rule (naming the rule).
    """
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario parse error at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError("scenario root must be a JSON object")
    _reject_unknown(doc, _SCENARIO_KEYS, "scenario")

    raw_segments = doc.get("segments")
    if not isinstance(raw_segments, list) or not raw_segments:
        raise ScenarioError("scenario.segments must be a non-empty list")
    segments = []
    for i, raw in enumerate(raw_segments):
        where = f"segments[{i}]"
        if not isinstance(raw, dict):
            raise ScenarioError(f"{where} must be an object")
        _reject_unknown(raw, _SEGMENT_KEYS, where)
        segments.append(
            PipeSegment(
                inner_diameter_mm=_num(raw, "inner_diameter_mm", where),
                length_mm=_num(raw, "length_mm", where),
            )
        )
    total_length = sum(seg.length_mm for seg in segments)

    raw_joints = doc.get("joints", [])
    if isinstance(raw_joints, dict):
        joints = _generate_joints(raw_joints, total_length)
    elif isinstance(raw_joints, list):
        joints = []
        for i, raw in enumerate(raw_joints):
            if not isinstance(raw, dict):
                raise ScenarioError(f"joints[{i}] must be an object")
            joints.append(_build_joint(raw, f"joints[{i}]"))
    else:
        raise ScenarioError("scenario.joints must be a list or a generator object")

    pipe = PipeSpec(segments=segments, joints=joints)
    pipe.validate()

    for joint in pipe.joints:
        diameter = pipe.diameter_at(joint.axial_pos_mm)
        req = required_seal_umm3(joint, diameter)
        n = joint.corrosion.sector_count
        joint.seal = SealMap(deposits_umm3=[0] * n, required_umm3=[req] * n)

    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ScenarioError("scenario.seed must be an unsigned 64-bit integer")

    scenario = Scenario(
        pipe=pipe,
        seed=seed,
        sensor_noise_mm=_num(doc, "sensor_noise_mm", "scenario", 5.0),
        ring_spacing_mm=_num(doc, "ring_spacing_mm", "scenario", 800.0),
        leg_geometry=dict(doc.get("leg_geometry", {})),
        drive=dict(doc.get("drive", {})),
        tool=dict(doc.get("tool", {})),
        cartridge=dict(doc.get("cartridge", {})),
        plan=dict(doc.get("plan", {})),
    )
    if scenario.sensor_noise_mm < 0:
        raise ScenarioError("sensor_noise_mm must be >= 0")
    if scenario.ring_spacing_mm <= 0:
        raise ScenarioError("ring_spacing_mm must be > 0")
    _reject_unknown(scenario.leg_geometry, _LEG_GEOMETRY_KEYS, "leg_geometry")
    _reject_unknown(scenario.drive, _DRIVE_KEYS, "drive")
    _reject_unknown(scenario.tool, _TOOL_KEYS, "tool")
    _reject_unknown(scenario.cartridge, _CARTRIDGE_KEYS, "cartridge")
    _reject_unknown(scenario.plan, _PLAN_KEYS, "plan")
    return scenario


def load_pipe_spec(source: str) -> PipeSpec:
    """Parse scenario text and return just the validated :class:`PipeSpec`."""
    return load_scenario(source).pipe


def save_scenario(scenario: Scenario) -> str:
    """Serialize a scenario back to canonical JSON text.

    Joints are written explicitly (the generator form does not survive a
    round trip, by design) with their *initial* corrosion maps, so
    ``load_scenario(save_scenario(s))`` reproduces the same data model.
    """
    doc = {
        "segments": [
            {"inner_diameter_mm": seg.inner_diameter_mm, "length_mm": seg.length_mm}
            for seg in scenario.pipe.segments
        ],
        "joints": [
            {
                "axial_pos_mm": j.axial_pos_mm,
                "socket_width_mm": j.socket_width_mm,
                "groove_width_mm": j.groove_width_mm,
                "groove_depth_mm": j.groove_depth_mm,
                "axial_offset_mm": j.axial_offset_mm,
                "sector_count": j.corrosion.sector_count,
                "corrosion": list(j.corrosion.initial),
            }
            for j in scenario.pipe.joints
        ],
        "seed": scenario.seed,
        "sensor_noise_mm": scenario.sensor_noise_mm,
        "ring_spacing_mm": scenario.ring_spacing_mm,
        "leg_geometry": scenario.leg_geometry,
        "drive": scenario.drive,
        "tool": scenario.tool,
        "cartridge": scenario.cartridge,
        "plan": scenario.plan,
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def joint_near(spec: PipeSpec, axial_pos_mm: float, window_mm: float) -> JointSpec | None:
    """Return the joint within ``+/-window_mm`` of the query position, or None.

    Ties break toward the smaller distance, then the smaller position.

    Raises:
        ValueError: if the query position lies outside the pipe.
    """
    if not 0 <= axial_pos_mm <= spec.total_length_mm:
        raise ValueError(f"query position {axial_pos_mm:g} outside pipe")
    best = None
    best_dist = math.inf
    for joint in spec.joints:
        dist = abs(joint.axial_pos_mm - axial_pos_mm)
        if dist <= window_mm and dist < best_dist:
            best = joint
            best_dist = dist
    return best


def next_joint_ahead(spec: PipeSpec, axial_pos_mm: float) -> JointSpec | None:
    """First joint at or beyond ``axial_pos_mm``, or None past the last one."""
    for joint in spec.joints:
        if joint.axial_pos_mm >= axial_pos_mm:
            return joint
    return None


def removal_fraction(joint: JointSpec) -> float:
    """Fraction of the joint's initial corrosion removed so far.

    ``1 - mean(current)/mean(initial)``; defined as 1.0 when the joint
    started clean.
    """
    initial_mean = sum(joint.corrosion.initial) / len(joint.corrosion.initial)
    if initial_mean == 0:
        return 1.0
    current_mean = sum(joint.corrosion.levels) / len(joint.corrosion.levels)
    return 1.0 - current_mean / initial_mean


def seal_coverage(joint: JointSpec) -> float:
    """Mean per-sector bead coverage, each sector capped at 1."""
    if joint.seal is None:
        return 0.0
    return joint.seal.coverage()
