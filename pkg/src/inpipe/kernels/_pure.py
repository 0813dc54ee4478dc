"""Pure-Python reference implementations of the simulation hot-loop kernels.

The compiled extension ``inpipe.kernels._core`` provides bit-identical
twins of every function in this module.  Keeping the two in lockstep is a
hard requirement: replay logs store state hashes, so both backends must
produce exactly the same floating-point results.  To that end the twins
share expression order, use the same libm entry points (``sqrt``, ``cos``,
``sin``), and pin shared constants as decimal literals rather than
computing them at import time.
"""

from __future__ import annotations

import math

# Unit vectors of the three leg directions (0 deg, 120 deg, 240 deg).
# Pinned as literals so the compiled twin uses bit-identical values.
_COS0, _SIN0 = 1.0, 0.0
_COS120, _SIN120 = -0.5, 0.8660254037844386
_COS240, _SIN240 = -0.5, -0.8660254037844386


def step_pose(
    axial: float,
    lateral: float,
    yaw: float,
    v_left: float,
    v_right: float,
    track: float,
    dt: float,
) -> tuple[float, float, float]:
    """Advance a differential-drive pose by one time step.

    The translation uses the heading at the *start* of the step; the
    heading is updated afterwards (semi-implicit Euler, translation
    first).

    Args:
        axial: Position along the pipe axis, mm.
        lateral: Signed offset from the pipe axis, mm.
        yaw: Heading error relative to the pipe axis, rad.
        v_left: Left wheel speed, mm/s.
        v_right: Right wheel speed, mm/s.
        track: Wheel track width, mm.
        dt: Time step, s.

    Returns:
        The updated ``(axial, lateral, yaw)`` triple.
    """
    v = (v_left + v_right) * 0.5
    omega = (v_right - v_left) / track
    axial = axial + v * math.cos(yaw) * dt
    lateral = lateral + v * math.sin(yaw) * dt
    yaw = yaw + omega * dt
    return axial, lateral, yaw


def solve_center(l0: float, l1: float, l2: float, rp: float) -> tuple[float, float, float]:
    """Find the body-axis offset at which three wheels touch the pipe wall.

    Given the wheel reach ``l0, l1, l2`` (body radius + extension + wheel
    radius) of three legs at 0/120/240 degrees and the pipe inner radius
    ``rp``, solves for the body-center position ``c`` minimising the
    sum of squared wall-contact residuals ``(|c + L_i u_i| - rp)^2`` by
    damped Gauss-Newton iteration.

    Equal reaches short-circuit to the exact symmetric answer (0, 0).

    Returns:
        ``(cx, cy, max_residual)`` where ``max_residual`` is the largest
        absolute wall-gap left at the optimum, mm.  A large residual means
        no center places all three wheels on the wall.
    """
    if l0 == l1 and l1 == l2:
        return 0.0, 0.0, abs(l0 - rp)

    cx = 0.0
    cy = 0.0
    for _ in range(60):
        a11 = 0.0
        a12 = 0.0
        a22 = 0.0
        b1 = 0.0
        b2 = 0.0

        px = cx + l0 * _COS0
        py = cy + l0 * _SIN0
        n = math.sqrt(px * px + py * py)
        r = n - rp
        jx = px / n
        jy = py / n
        a11 = a11 + jx * jx
        a12 = a12 + jx * jy
        a22 = a22 + jy * jy
        b1 = b1 - jx * r
        b2 = b2 - jy * r

        px = cx + l1 * _COS120
        py = cy + l1 * _SIN120
        n = math.sqrt(px * px + py * py)
        r = n - rp
        jx = px / n
        jy = py / n
        a11 = a11 + jx * jx
        a12 = a12 + jx * jy
        a22 = a22 + jy * jy
        b1 = b1 - jx * r
        b2 = b2 - jy * r

        px = cx + l2 * _COS240
        py = cy + l2 * _SIN240
        n = math.sqrt(px * px + py * py)
        r = n - rp
        jx = px / n
        jy = py / n
        a11 = a11 + jx * jx
        a12 = a12 + jx * jy
        a22 = a22 + jy * jy
        b1 = b1 - jx * r
        b2 = b2 - jy * r

        det = a11 * a22 - a12 * a12
        if not (det > 1e-14 or det < -1e-14):
            break
        dx = (b1 * a22 - b2 * a12) / det
        dy = (a11 * b2 - a12 * b1) / det
        cx = cx + dx
        cy = cy + dy
        if dx * dx + dy * dy < 1e-20:
            break

    rmax = 0.0

    px = cx + l0 * _COS0
    py = cy + l0 * _SIN0
    r = math.sqrt(px * px + py * py) - rp
    if r < 0.0:
        r = -r
    if r > rmax:
        rmax = r

    px = cx + l1 * _COS120
    py = cy + l1 * _SIN120
    r = math.sqrt(px * px + py * py) - rp
    if r < 0.0:
        r = -r
    if r > rmax:
        rmax = r

    px = cx + l2 * _COS240
    py = cy + l2 * _SIN240
    r = math.sqrt(px * px + py * py) - rp
    if r < 0.0:
        r = -r
    if r > rmax:
        rmax = r

    return cx, cy, rmax


def ring_forces(
    d0: float,
    d1: float,
    d2: float,
    k: float,
    wx: float,
    wy: float,
) -> tuple[float, float, float]:
    """Solve the in-plane spring equilibrium of one three-leg ring.

    The body is free to translate in the cross-section plane; each leg i
    at 0/120/240 degrees carries normal force ``k * (d_i + b . u_i)``
    where ``b`` is the body translation resolving the external load
    ``(wx, wy)``.  Because ``sum(u_i u_i^T) = 1.5 I`` the translation has
    the closed form ``b = (W - k * sum(d_i u_i)) / (1.5 k)``.

    Returns the three leg forces in N.  Forces may come out negative; a
    negative value means that leg would have to pull on the wall, i.e.
    the ring has lost contact — callers decide how to fault.
    """
    sx = d0 * _COS0 + d1 * _COS120 + d2 * _COS240
    sy = d0 * _SIN0 + d1 * _SIN120 + d2 * _SIN240
    bx = (wx - k * sx) / (1.5 * k)
    by = (wy - k * sy) / (1.5 * k)
    f0 = k * (d0 + bx * _COS0 + by * _SIN0)
    f1 = k * (d1 + bx * _COS120 + by * _SIN120)
    f2 = k * (d2 + bx * _COS240 + by * _SIN240)
    return f0, f1, f2


def transmissibility(r: float, zeta: float) -> float:
    """Force transmissibility of a single-DOF spring-damper mount.

    ``T = sqrt((1 + (2 zeta r)^2) / ((1 - r^2)^2 + (2 zeta r)^2))`` with
    ``r`` the forcing/natural frequency ratio.  ``T < 1`` means the mount
    isolates.  The undamped resonance ``r=1, zeta=0`` returns ``inf``.
    """
    a = 2.0 * zeta * r
    b = 1.0 - r * r
    den = b * b + a * a
    if den == 0.0:
        return math.inf
    return math.sqrt((1.0 + a * a) / den)


def clean_decay(levels: list, start: int, stop: int, factor: float) -> None:
    """Multiply corrosion levels ``levels[start:stop]`` by ``factor`` in place."""
    for i in range(start, stop):
        levels[i] = levels[i] * factor


def inject_spread(fills: list, required: list, front: int, budget: int) -> tuple[int, int]:
    """Deposit up to ``budget`` volume units into sectors, advancing a fill front.

    Starting at sector ``front``, each sector is topped up to its entry in
    ``required`` before the front moves on; the bead grows contiguously
    around the circumference.  All quantities are integers (micro-mm^3)
    so the accounting is exact.

    Args:
        fills: Per-sector deposited volume; mutated in place.
        required: Per-sector required volume.
        front: Index of the first sector not yet full.
        budget: Volume available this step.

    Returns:
        ``(deposited, front)`` — the volume actually placed (<= budget;
        less only when every sector is already full) and the new front.
        ``front == len(fills)`` means the bead is complete.
    """
    n = len(fills)
    deposited = 0
    while budget > 0 and front < n:
        need = required[front] - fills[front]
        if need <= 0:
            front += 1
            continue
        take = need if need < budget else budget
        fills[front] += take
        deposited += take
        budget -= take
        if fills[front] >= required[front]:
            front += 1
    return deposited, front
