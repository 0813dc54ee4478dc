"""Wall-press legs: extension law, centering fit, ring forces, suspension."""

import math

import pytest

from inpipe.errors import InterlockError, LossOfContactError
from inpipe.kinematics import (
    EXTENSION_RATE_MM_S,
    PRELOAD_TRAVEL_MM,
    LegGeometry,
    brush_transmissibility,
    centering_error,
    contact_forces,
    diameter_from_extension,
    make_legs,
    required_extension,
    require_standstill,
    transmissibility,
    wall_press_step,
)

# Frozen oracle: least-squares wall-contact center for extensions
# (210, 200, 200) in a D=1000 bore, computed to 50 digits by an
# independent Newton solve on the stationarity equations and rounded to
# the nearest float before this implementation ran.
CENTERING_PIN_OFFSET_MM = 6.6014476876656865


class TestRequiredExtension:
    def test_exact_values_at_named_diameters(self):
        assert required_extension(800.0) == 100.0
        assert required_extension(1000.0) == 200.0
        assert required_extension(1200.0) == 300.0

    def test_whole_supported_range(self):
        for d in range(800, 1201):
            ext = required_extension(float(d))
            assert 100.0 <= ext <= 300.0
            assert diameter_from_extension(ext) == pytest.approx(float(d))

    def test_out_of_range_diameters_fail(self):
        with pytest.raises(ValueError, match=r"out of \[800,1200\]"):
            required_extension(799.0)
        with pytest.raises(ValueError, match=r"out of \[800,1200\]"):
            required_extension(1201.0)

    def test_geometry_must_cover_wall_radii(self):
        with pytest.raises(ValueError, match="must cover wall radii"):
            LegGeometry(extension_min_mm=150.0, extension_max_mm=250.0)
        with pytest.raises(ValueError, match="must cover wall radii"):
            LegGeometry(extension_min_mm=80.0, extension_max_mm=290.0)

    def test_geometry_travel_ordering(self):
        with pytest.raises(ValueError):
            LegGeometry(extension_min_mm=320.0, extension_max_mm=80.0)


class TestCentering:
    def test_equal_extensions_center_exactly(self):
        offset, direction = centering_error((200.0, 200.0, 200.0), 1000.0)
        assert offset == 0.0
        assert direction == 0.0

    def test_pinned_oracle_case(self):
        offset, direction = centering_error((210.0, 200.0, 200.0), 1000.0)
        assert offset == pytest.approx(CENTERING_PIN_OFFSET_MM, abs=1e-9)
        # Leg 0 over-extended pushes the body away from leg 0 (toward pi).
        assert abs(direction) == pytest.approx(math.pi, abs=1e-9)

    def test_direction_follows_the_long_leg(self):
        # Over-extend the 120-degree leg: the body shifts opposite it.
        _, direction = centering_error((200.0, 210.0, 200.0), 1000.0)
        expected = math.atan2(-math.sin(2 * math.pi / 3), 0.5)
        assert direction == pytest.approx(expected, abs=1e-6)

    def test_loss_of_contact_raises(self):
        # One leg 40 mm short: no center reaches the wall within the
        # 10 mm preload travel.
        with pytest.raises(LossOfContactError, match="residual"):
            centering_error((160.0, 200.0, 200.0), 1000.0)


class TestWallPress:
    def test_ramp_rate_and_duration(self):
        legs = make_legs(100.0)
        ticks = 0
        while not wall_press_step(legs, 200.0, 1000.0, 0.02):
            ticks += 1
            assert ticks < 10000
        # 100 mm of travel at 10 mm/s is 10 s = 500 ticks; accumulated
        # rounding may add at most one settling tick.
        assert EXTENSION_RATE_MM_S == 10.0
        duration_s = (ticks + 1) * 0.02
        assert 10.0 <= duration_s <= 10.0 + 2 * 0.02

    def test_preload_force_at_target(self):
        legs = make_legs(100.0)
        while not wall_press_step(legs, 200.0, 1000.0, 0.02):
            pass
        for leg in legs:
            assert leg.extension_mm == 200.0
            assert leg.spring_compression_mm == pytest.approx(PRELOAD_TRAVEL_MM)
            assert leg.contact_force_n == pytest.approx(200.0)
            assert leg.in_contact

    def test_no_contact_before_the_wall(self):
        legs = make_legs(100.0)
        wall_press_step(legs, 200.0, 1000.0, 0.02)
        # After one tick the legs are at 100.2 mm, far from the wall.
        assert all(not leg.in_contact for leg in legs)
        assert all(leg.contact_force_n == 0.0 for leg in legs)

    def test_retraction_releases_contact(self):
        legs = make_legs(200.0)
        wall_press_step(legs, 200.0, 1000.0, 0.02)
        assert all(leg.in_contact for leg in legs)
        wall_press_step(legs, 80.0, 1000.0, 0.02)
        for leg in legs:
            assert leg.extension_mm == pytest.approx(199.8)
            assert leg.spring_compression_mm == pytest.approx(9.8)


class TestContactForces:
    def _pressed_legs(self):
        legs = make_legs(200.0)
        while not wall_press_step(legs, 200.0, 1000.0, 0.02):
            pass
        return legs

    def test_symmetric_preload(self):
        forces = contact_forces(self._pressed_legs())
        assert forces == pytest.approx([200.0] * 6)

    def test_load_away_from_a_leg_unloads_it(self):
        # 200 N pushing away from leg 0 splits half per ring; each ring
        # sees 100 N and relaxes leg 0 to 400/3 N while the opposing
        # pair stiffens to 700/3 N (closed-form ring equilibrium).
        forces = contact_forces(self._pressed_legs(), (-200.0, 0.0))
        for ring in (forces[0:3], forces[3:6]):
            assert ring[0] == pytest.approx(400.0 / 3.0)
            assert ring[1] == pytest.approx(700.0 / 3.0)
            assert ring[2] == pytest.approx(700.0 / 3.0)

    def test_force_balance_closes(self):
        wx, wy = 87.0, -41.0
        legs = self._pressed_legs()
        forces = contact_forces(legs, (wx, wy))
        angles = [0.0, 2 * math.pi / 3, 4 * math.pi / 3] * 2
        fx = sum(f * math.cos(a) for f, a in zip(forces, angles))
        fy = sum(f * math.sin(a) for f, a in zip(forces, angles))
        # The wall reaction on the body is -F_i u_i per leg, so the
        # contact set satisfies sum(F_i u_i) = W.
        assert fx == pytest.approx(wx)
        assert fy == pytest.approx(wy)

    def test_excessive_load_means_loss_of_contact(self):
        with pytest.raises(LossOfContactError, match="negative force"):
            contact_forces(self._pressed_legs(), (-1000.0, 0.0))

    @staticmethod
    def _release(leg):
        leg.spring_compression_mm = 0.0
        leg.contact_force_n = 0.0

    def test_two_contact_ring_still_solves(self):
        # Front leg 0 lifted off; the ring's 100 N share of the load is
        # carried by the remaining pair.  With the third reaction gone
        # the pre-stress cannot be held, so the pair settles at the
        # forces that exactly balance the load: 100 N each.
        legs = self._pressed_legs()
        self._release(legs[0])
        forces = contact_forces(legs, (-200.0, 0.0))
        assert forces[0] == 0.0
        assert forces[1] == pytest.approx(100.0)
        assert forces[2] == pytest.approx(100.0)
        # The untouched rear ring keeps the full three-point solution.
        assert forces[3] == pytest.approx(400.0 / 3.0)
        assert forces[4] == pytest.approx(700.0 / 3.0)
        assert forces[5] == pytest.approx(700.0 / 3.0)

    def test_single_contact_ring_fails(self):
        legs = self._pressed_legs()
        for i in (0, 1):
            self._release(legs[i])
        with pytest.raises(LossOfContactError, match="fewer than two"):
            contact_forces(legs)


class TestSuspension:
    def test_static_input_passes_through(self):
        assert transmissibility(0.0, 0.4) == 1.0

    def test_crossover_at_sqrt_two(self):
        for z10 in range(0, 21):
            zeta = z10 / 10.0
            assert transmissibility(math.sqrt(2.0), zeta) == pytest.approx(
                1.0, abs=1e-12
            )

    def test_isolation_beyond_crossover(self):
        r = math.sqrt(2.0) + 1e-9
        while r <= 10.0:
            for z10 in range(0, 21):
                assert transmissibility(r, z10 / 10.0) < 1.0
            r += 0.05

    def test_undamped_resonance_is_infinite(self):
        assert transmissibility(1.0, 0.0) == math.inf

    def test_damping_caps_resonance(self):
        assert transmissibility(1.0, 0.4) == pytest.approx(
            math.sqrt(1.0 + 0.64) / 0.8
        )

    def test_leg_natural_frequency(self):
        geom = LegGeometry()
        expected = math.sqrt(20.0 * 1000.0 / 30.0) / (2.0 * math.pi)
        assert geom.natural_frequency_hz() == pytest.approx(expected)
        assert geom.natural_frequency_hz() == pytest.approx(4.109, abs=1e-3)

    def test_brush_forcing_is_isolated_by_default_legs(self):
        t = brush_transmissibility(50.0)
        assert 0.0 < t < 0.1


def test_require_standstill():
    require_standstill(0.0, 0.0)
    with pytest.raises(InterlockError):
        require_standstill(0.0, 1.0)
