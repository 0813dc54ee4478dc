"""Differential drive, centering controller, and the joint sensor."""

import math
import random

import pytest

from inpipe.mobile_base import (
    BasePose,
    DriveCommand,
    DriveConfig,
    centering_controller,
    joint_proximity_sensor,
    make_tick_rng,
    step_drive,
)
from inpipe.pipe_world import load_scenario

from conftest import scenario_text


class TestStepDrive:
    def test_straight_line(self):
        pose = step_drive(BasePose(), DriveCommand(100.0, 100.0), 400.0, 1.0)
        assert (pose.axial_mm, pose.lateral_mm, pose.yaw_rad) == (100.0, 0.0, 0.0)

    def test_pure_rotation(self):
        pose = step_drive(BasePose(), DriveCommand(-100.0, 100.0), 400.0, 1.0)
        assert pose.axial_mm == 0.0
        assert pose.lateral_mm == 0.0
        assert pose.yaw_rad == pytest.approx(0.5)  # (100 - -100) / 400

    def test_translation_uses_pre_step_yaw(self):
        # Starting at yaw 0, a simultaneous drive+turn step must move the
        # robot exactly along the old heading; the yaw update applies
        # only to later steps.
        pose = step_drive(
            BasePose(yaw_rad=0.0), DriveCommand(50.0, 150.0), 400.0, 0.02
        )
        assert pose.axial_mm == pytest.approx(100.0 * 0.02)
        assert pose.lateral_mm == 0.0
        assert pose.yaw_rad == pytest.approx(0.25 * 0.02)

    def test_heading_couples_into_lateral(self):
        yaw = 0.1
        pose = step_drive(
            BasePose(yaw_rad=yaw), DriveCommand(200.0, 200.0), 400.0, 0.02
        )
        assert pose.axial_mm == pytest.approx(200.0 * 0.02 * math.cos(yaw))
        assert pose.lateral_mm == pytest.approx(200.0 * 0.02 * math.sin(yaw))
        assert pose.yaw_rad == yaw

    def test_speed_validation(self):
        DriveCommand(300.0, -300.0).validate()
        with pytest.raises(ValueError, match=r"exceeds \+/-300"):
            DriveCommand(300.1, 0.0).validate()
        with pytest.raises(ValueError, match="exceeds"):
            DriveCommand(0.0, -301.0).validate()


class TestCenteringController:
    def test_centered_pose_cruises_straight(self):
        cmd = centering_controller(BasePose(), 200.0)
        assert cmd.v_left_mm_s == 200.0
        assert cmd.v_right_mm_s == 200.0

    def test_positive_lateral_steers_negative(self):
        cmd = centering_controller(BasePose(lateral_mm=30.0), 200.0)
        # omega = -0.002*30 = -0.06 rad/s -> left speeds up.
        assert cmd.v_left_mm_s == pytest.approx(200.0 + 0.06 * 200.0)
        assert cmd.v_right_mm_s == pytest.approx(200.0 - 0.06 * 200.0)

    def test_saturation_at_speed_limit(self):
        cmd = centering_controller(BasePose(lateral_mm=1e6), 200.0)
        assert cmd.v_left_mm_s == 300.0
        assert cmd.v_right_mm_s == -300.0
        cmd.validate()

    def test_closed_loop_recenters(self):
        # From 30 mm off-center the loop must settle to under 1 mm well
        # within 20 simulated seconds and never graze the wall of a
        # D=1000 pipe (|lateral| < 500 - body envelope, use 100 mm).
        pose = BasePose(lateral_mm=30.0)
        worst = 0.0
        for _ in range(1000):  # 20 s at dt=0.02
            cmd = centering_controller(pose, 200.0)
            cmd.validate()
            pose = step_drive(pose, cmd, 400.0, 0.02)
            worst = max(worst, abs(pose.lateral_mm))
        assert worst < 100.0
        assert abs(pose.lateral_mm) < 1.0
        assert abs(pose.yaw_rad) < 0.01


class TestJointSensor:
    def _spec(self):
        return load_scenario(
            scenario_text(joints=[{"axial_pos_mm": 5000.0}], length=8000.0)
        ).pipe

    def test_noise_free_reading_is_exact(self):
        spec = self._spec()
        rng = random.Random(0)
        pose = BasePose(axial_mm=1200.0)
        assert joint_proximity_sensor(spec, pose, 0.0, rng) == 3800.0

    def test_noise_is_deterministic_per_seed_and_tick(self):
        spec = self._spec()
        pose = BasePose(axial_mm=1200.0)
        a = joint_proximity_sensor(spec, pose, 5.0, make_tick_rng(42, 7))
        b = joint_proximity_sensor(spec, pose, 5.0, make_tick_rng(42, 7))
        c = joint_proximity_sensor(spec, pose, 5.0, make_tick_rng(42, 8))
        d = joint_proximity_sensor(spec, pose, 5.0, make_tick_rng(43, 7))
        assert a == b
        assert a != c
        assert a != d
        assert a == pytest.approx(3800.0, abs=50.0)  # 10 sigma

    def test_noise_distribution_is_zero_mean(self):
        spec = self._spec()
        pose = BasePose(axial_mm=1000.0)
        readings = [
            joint_proximity_sensor(spec, pose, 5.0, make_tick_rng(42, t))
            for t in range(4000)
        ]
        mean_err = sum(r - 4000.0 for r in readings) / len(readings)
        assert abs(mean_err) < 0.5  # ~6 sigma/sqrt(n)

    def test_past_last_joint_reads_infinity_without_noise(self):
        spec = self._spec()
        rng = make_tick_rng(42, 3)
        state = rng.getstate()
        reading = joint_proximity_sensor(spec, BasePose(axial_mm=6000.0), 5.0, rng)
        assert reading == math.inf
        assert rng.getstate() == state  # rng untouched on the inf path

    def test_sensor_sees_joint_at_own_position(self):
        spec = self._spec()
        rng = random.Random(0)
        assert joint_proximity_sensor(spec, BasePose(axial_mm=5000.0), 0.0, rng) == 0.0
