"""Wall-press geometry and suspension model of the six wheeled legs.

The maintenance unit braces itself against the pipe wall with six radial
legs — two rings (front/rear) of three legs at 120 degrees.  Extending
the legs presses spring-loaded wheels against the wall, forming a rigid
centered structure; compressing them frees the drive wheels.  Each leg
is an independent single-degree-of-freedom spring-damper, so power-tool
vibration is assessed in the frequency domain via transmissibility.

All functions here are pure; mutation happens only in the mission tick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from . import kernels
from .errors import InterlockError, LossOfContactError

#: Leg extension ramp rate during extend/compress transitions, mm/s.
EXTENSION_RATE_MM_S = 10.0

#: Spring travel between first wall contact and the fully pressed state, mm.
#: At the pressed extension each spring is compressed by exactly this much.
PRELOAD_TRAVEL_MM = 10.0


class RingId(Enum):
    FRONT = 0
    REAR = 1


@dataclass(frozen=True)
class LegGeometry:
    """Shared geometry and suspension parameters of all six legs.

    The reachable wall-radius interval
    ``[body+wheel+ext_min, body+wheel+ext_max]`` must contain
    [400, 600] mm so every pipe diameter in [800, 1200] is press-able.
    """

    body_radius_mm: float = 250.0
    wheel_radius_mm: float = 50.0
    extension_min_mm: float = 80.0
    extension_max_mm: float = 320.0
    spring_rate_n_per_mm: float = 20.0
    damping_ratio: float = 0.4
    equivalent_mass_kg: float = 30.0

    def __post_init__(self) -> None:
        if self.extension_min_mm >= self.extension_max_mm:
            raise ValueError("extension_min must be < extension_max")
        for name in (
            "body_radius_mm",
            "wheel_radius_mm",
            "extension_min_mm",
            "spring_rate_n_per_mm",
            "damping_ratio",
            "equivalent_mass_kg",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        reach_min = self.body_radius_mm + self.wheel_radius_mm + self.extension_min_mm
        reach_max = self.body_radius_mm + self.wheel_radius_mm + self.extension_max_mm
        if reach_min > 400.0 or reach_max < 600.0:
            raise ValueError(
                f"leg travel reaches [{reach_min:g}, {reach_max:g}] mm; "
                "must cover wall radii [400, 600]"
            )

    def natural_frequency_hz(self) -> float:
        """Undamped natural frequency of one leg's spring-mass system."""
        k_n_per_m = self.spring_rate_n_per_mm * 1000.0
        return math.sqrt(k_n_per_m / self.equivalent_mass_kg) / (2.0 * math.pi)


@dataclass
class LegState:
    """Kinematic and contact state of one wheeled leg."""

    ring: RingId
    index: int  # angular slot: leg sits at index * 120 degrees
    extension_mm: float
    spring_compression_mm: float = 0.0
    contact_force_n: float = 0.0

    @property
    def in_contact(self) -> bool:
        return self.contact_force_n > 0.0


def make_legs(extension_mm: float) -> list[LegState]:
    """Create the six legs (front/rear rings x slots 0..2) at one extension."""
    return [
        LegState(ring=ring, index=i, extension_mm=extension_mm)
        for ring in (RingId.FRONT, RingId.REAR)
        for i in range(3)
    ]


def required_extension(pipe_diameter_mm: float, geom: LegGeometry | None = None) -> float:
    """Leg extension that presses the wheels against a pipe of the given bore.

    For radial legs: ``e = D/2 - body_radius - wheel_radius``.

    Raises:
        ValueError: diameter outside [800, 1200] or extension outside the
            leg travel.

    >>> required_extension(1000.0)
    200.0
    """
    geom = geom or LegGeometry()
    if not 800.0 <= pipe_diameter_mm <= 1200.0:
        raise ValueError(f"diameter {pipe_diameter_mm:g} out of [800,1200]")
    ext = pipe_diameter_mm / 2.0 - geom.body_radius_mm - geom.wheel_radius_mm
    if not geom.extension_min_mm <= ext <= geom.extension_max_mm:
        raise ValueError(
            f"required extension {ext:g} outside leg travel "
            f"[{geom.extension_min_mm:g}, {geom.extension_max_mm:g}]"
        )
    return ext


def diameter_from_extension(extension_mm: float, geom: LegGeometry | None = None) -> float:
    """Inverse of :func:`required_extension` (affine round-trip)."""
    geom = geom or LegGeometry()
    return 2.0 * (geom.body_radius_mm + geom.wheel_radius_mm + extension_mm)


def centering_error(
    extensions: tuple[float, float, float],
    pipe_diameter_mm: float,
    geom: LegGeometry | None = None,
) -> tuple[float, float]:
    """Body-axis displacement implied by one ring's three extensions.

    Solves numerically for the body-center offset at which all three
    wheels touch the wall (least-squares wall-contact fit, tolerance
    well below 1e-6 mm).  Equal extensions return offset 0 exactly.

    Args:
        extensions: Extensions of the ring's legs at 0/120/240 degrees, mm.
        pipe_diameter_mm: Local pipe bore, mm.
        geom: Leg geometry (defaults used when omitted).

    Returns:
        ``(offset_mm, direction_rad)`` of the body axis relative to the
        pipe axis; direction is atan2-style in (-pi, pi].

    Raises:
        LossOfContactError: no center puts every wheel within the spring
            preload travel of the wall (some wheel would hang free).
    """
    geom = geom or LegGeometry()
    rp = pipe_diameter_mm / 2.0
    base = geom.body_radius_mm + geom.wheel_radius_mm
    l0, l1, l2 = (base + e for e in extensions)
    cx, cy, rmax = kernels.solve_center(l0, l1, l2, rp)
    if rmax > PRELOAD_TRAVEL_MM:
        raise LossOfContactError(
            f"no wall-contact solution: residual {rmax:.3f} mm exceeds "
            f"spring travel {PRELOAD_TRAVEL_MM:g} mm"
        )
    offset = math.sqrt(cx * cx + cy * cy)
    direction = math.atan2(cy, cx) if offset > 0.0 else 0.0
    return offset, direction


def _ring_forces_partial(
    compressions: list[float],
    in_contact: list[bool],
    k: float,
    wx: float,
    wy: float,
) -> list[float]:
    """Equilibrium of one ring when only a subset of legs touches the wall."""
    angles = [0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0]
    idx = [i for i in range(3) if in_contact[i]]
    if len(idx) < 2:
        raise LossOfContactError("fewer than two legs in contact on a ring")
    a11 = a12 = a22 = 0.0
    sx = sy = 0.0
    for i in idx:
        ux, uy = math.cos(angles[i]), math.sin(angles[i])
        a11 += ux * ux
        a12 += ux * uy
        a22 += uy * uy
        sx += compressions[i] * ux
        sy += compressions[i] * uy
    det = a11 * a22 - a12 * a12
    if abs(det) < 1e-12:
        raise LossOfContactError("contact directions are degenerate")
    rx = wx / k - sx
    ry = wy / k - sy
    bx = (rx * a22 - ry * a12) / det
    by = (a11 * ry - a12 * rx) / det
    forces = [0.0, 0.0, 0.0]
    for i in idx:
        ux, uy = math.cos(angles[i]), math.sin(angles[i])
        forces[i] = k * (compressions[i] + bx * ux + by * uy)
    return forces


def contact_forces(
    legs: list[LegState],
    external_radial_load: tuple[float, float] = (0.0, 0.0),
    geom: LegGeometry | None = None,
) -> list[float]:
    """Per-leg normal forces balancing an external in-plane load.

    The load is split equally between the two rings and each ring's
    2-unknown linear equilibrium is solved in closed form.  Legs whose
    spring compression is zero are treated as out of contact and the
    ring re-solves on the remaining legs.

    Args:
        legs: The six leg states (front ring slots 0..2, then rear).
        external_radial_load: In-plane force on the body, N.  Legs on the
            side the body is pushed toward carry more force.
        geom: Leg geometry (defaults used when omitted).

    Returns:
        Six forces in N, ordered like ``legs``.

    Raises:
        LossOfContactError: equilibrium needs a negative (pulling) force
            or too few legs touch the wall.
    """
    geom = geom or LegGeometry()
    k = geom.spring_rate_n_per_mm
    wx, wy = external_radial_load
    wx *= 0.5
    wy *= 0.5
    out: list[float] = [0.0] * 6
    for ring_start in (0, 3):
        comp = [legs[ring_start + i].spring_compression_mm for i in range(3)]
        contact = [comp[i] > 0.0 for i in range(3)]
        if all(contact):
            forces = list(kernels.ring_forces(comp[0], comp[1], comp[2], k, wx, wy))
        else:
            forces = _ring_forces_partial(comp, contact, k, wx, wy)
        for i, f in enumerate(forces):
            if contact[i] and f < 0.0:
                raise LossOfContactError(
                    f"equilibrium requires negative force {f:.3f} N on leg "
                    f"{ring_start + i}"
                )
            out[ring_start + i] = f
    return out


def transmissibility(frequency_ratio: float, damping_ratio: float) -> float:
    """Vibration transmissibility of one leg mount.

    See :func:`inpipe.kernels.transmissibility`.  Values below 1 mean the
    suspension isolates the pipe from tool vibration.

    >>> transmissibility(0.0, 0.4)
    1.0
    """
    if frequency_ratio < 0 or damping_ratio < 0:
        raise ValueError("frequency and damping ratios must be >= 0")
    return kernels.transmissibility(frequency_ratio, damping_ratio)


def brush_transmissibility(forcing_hz: float, geom: LegGeometry | None = None) -> float:
    """Transmissibility of brush forcing at ``forcing_hz`` through one leg."""
    geom = geom or LegGeometry()
    r = forcing_hz / geom.natural_frequency_hz()
    return transmissibility(r, geom.damping_ratio)


def wall_press_step(
    legs: list[LegState],
    target_extension_mm: float,
    pipe_diameter_mm: float,
    dt: float,
    geom: LegGeometry | None = None,
) -> bool:
    """Advance all six legs one step toward a target extension.

    Extensions ramp at :data:`EXTENSION_RATE_MM_S`; spring compression
    and contact force follow from how far past first wall contact each
    leg is pressed.  Returns True once every leg sits at the target.

    The caller owns mode bookkeeping (standstill / tool interlocks and
    the EXTENDED/COMPRESSED flip) — see the mission module.
    """
    geom = geom or LegGeometry()
    contact_ext = (
        pipe_diameter_mm / 2.0
        - geom.body_radius_mm
        - geom.wheel_radius_mm
        - PRELOAD_TRAVEL_MM
    )
    step = EXTENSION_RATE_MM_S * dt
    done = True
    for leg in legs:
        delta = target_extension_mm - leg.extension_mm
        if delta > step:
            leg.extension_mm += step
            done = False
        elif delta < -step:
            leg.extension_mm -= step
            done = False
        else:
            leg.extension_mm = target_extension_mm
        compression = leg.extension_mm - contact_ext
        leg.spring_compression_mm = compression if compression > 0.0 else 0.0
        leg.contact_force_n = geom.spring_rate_n_per_mm * leg.spring_compression_mm
    return done


def require_standstill(v_left: float, v_right: float) -> None:
    """Raise unless both wheel speeds are exactly zero (extend interlock)."""
    if v_left != 0.0 or v_right != 0.0:
        raise InterlockError("extend requires standstill")
