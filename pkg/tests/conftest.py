"""Shared scenario builders for the test suite."""

import json

import pytest

from inpipe.pipe_world import Scenario, load_scenario


def scenario_text(
    *,
    diameter=1000.0,
    length=8000.0,
    joints=None,
    seed=7,
    sensor_noise=5.0,
    cartridge=None,
    plan=None,
    drive=None,
    extra=None,
) -> str:
    """Build a scenario JSON document with sensible small-test defaults."""
    doc = {
        "segments": [{"inner_diameter_mm": diameter, "length_mm": length}],
        "joints": joints if joints is not None else [{"axial_pos_mm": 5000.0}],
        "seed": seed,
        "sensor_noise_mm": sensor_noise,
    }
    if cartridge is not None:
        doc["cartridge"] = cartridge
    if plan is not None:
        doc["plan"] = plan
    if drive is not None:
        doc["drive"] = drive
    if extra:
        doc.update(extra)
    return json.dumps(doc)


def make_scenario(**kwargs) -> Scenario:
    return load_scenario(scenario_text(**kwargs))


@pytest.fixture
def one_joint_scenario() -> Scenario:
    """A 8 m pipe with a single joint at 5 m; fast full-mission runs."""
    return make_scenario()


@pytest.fixture
def no_joint_scenario() -> Scenario:
    """A short pipe with nothing to do; missions finish immediately."""
    return make_scenario(length=2000.0, joints=[])
