# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the hot-loop kernels in ``inpipe.kernels._pure``.

Every function here must stay bit-identical to its pure-Python twin:
same expression order, same libm calls, same pinned constants.  The
backend-equivalence test compares the two over randomized inputs.
"""

from libc.math cimport cos, sin, sqrt, INFINITY

cdef double _COS0 = 1.0
cdef double _SIN0 = 0.0
cdef double _COS120 = -0.5
cdef double _SIN120 = 0.8660254037844386
cdef double _COS240 = -0.5
cdef double _SIN240 = -0.8660254037844386


def step_pose(double axial, double lateral, double yaw,
              double v_left, double v_right, double track, double dt):
    """Advance a differential-drive pose by one time step (compiled twin)."""
    cdef double v = (v_left + v_right) * 0.5
    cdef double omega = (v_right - v_left) / track
    axial = axial + v * cos(yaw) * dt
    lateral = lateral + v * sin(yaw) * dt
    yaw = yaw + omega * dt
    return axial, lateral, yaw


def solve_center(double l0, double l1, double l2, double rp):
    """Least-squares wall-contact center of a three-leg ring (compiled twin)."""
    cdef double cx, cy, a11, a12, a22, b1, b2, px, py, n, r, jx, jy, det, dx, dy, rmax
    cdef int it

    if l0 == l1 and l1 == l2:
        r = l0 - rp
        if r < 0.0:
            r = -r
        return 0.0, 0.0, r

    cx = 0.0
    cy = 0.0
    for it in range(60):
        a11 = 0.0
        a12 = 0.0
        a22 = 0.0
        b1 = 0.0
        b2 = 0.0

        px = cx + l0 * _COS0
        py = cy + l0 * _SIN0
        n = sqrt(px * px + py * py)
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
        n = sqrt(px * px + py * py)
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
        n = sqrt(px * px + py * py)
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
    r = sqrt(px * px + py * py) - rp
    if r < 0.0:
        r = -r
    if r > rmax:
        rmax = r

    px = cx + l1 * _COS120
    py = cy + l1 * _SIN120
    r = sqrt(px * px + py * py) - rp
    if r < 0.0:
        r = -r
    if r > rmax:
        rmax = r

    px = cx + l2 * _COS240
    py = cy + l2 * _SIN240
    r = sqrt(px * px + py * py) - rp
    if r < 0.0:
        r = -r
    if r > rmax:
        rmax = r

    return cx, cy, rmax


def ring_forces(double d0, double d1, double d2, double k, double wx, double wy):
    """Spring equilibrium of one three-leg ring (compiled twin)."""
    cdef double sx = d0 * _COS0 + d1 * _COS120 + d2 * _COS240
    cdef double sy = d0 * _SIN0 + d1 * _SIN120 + d2 * _SIN240
    cdef double bx = (wx - k * sx) / (1.5 * k)
    cdef double by = (wy - k * sy) / (1.5 * k)
    cdef double f0 = k * (d0 + bx * _COS0 + by * _SIN0)
    cdef double f1 = k * (d1 + bx * _COS120 + by * _SIN120)
    cdef double f2 = k * (d2 + bx * _COS240 + by * _SIN240)
    return f0, f1, f2


def transmissibility(double r, double zeta):
    """Single-DOF mount transmissibility (compiled twin)."""
    cdef double a = 2.0 * zeta * r
    cdef double b = 1.0 - r * r
    cdef double den = b * b + a * a
    if den == 0.0:
        return INFINITY
    return sqrt((1.0 + a * a) / den)


def clean_decay(list levels, int start, int stop, double factor):
    """Multiply corrosion levels ``levels[start:stop]`` by ``factor`` in place."""
    cdef int i
    cdef double v
    for i in range(start, stop):
        v = levels[i]
        levels[i] = v * factor


def inject_spread(list fills, list required, int front, long long budget):
    """Integer bead-fill spread (compiled twin).  See the pure version."""
    cdef int n = len(fills)
    cdef long long deposited = 0
    cdef long long need, take, f, req
    while budget > 0 and front < n:
        f = fills[front]
        req = required[front]
        need = req - f
        if need <= 0:
            front += 1
            continue
        take = need if need < budget else budget
        f += take
        fills[front] = f
        deposited += take
        budget -= take
        if f >= req:
            front += 1
    return deposited, front
