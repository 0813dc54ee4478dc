"""Deterministic digital twin of an in-pipe joint rehabilitation robot.

The robot drives through large water mains, wall-presses at each
bell-and-spigot joint, brushes the corroded socket clean, injects a
sealant bead into the groove, and smooths it flat — all advanced by a
fixed 50 Hz tick so that every run is exactly reproducible from
(scenario, seed, command trace).

Quick start::

    from inpipe import load_scenario, run_mission

    scenario = load_scenario(open("scenario.json").read())
    report, world = run_mission(scenario)
    print(report.table())
"""

from .errors import (
    CartridgeEmptyError,
    GateNotMetError,
    InterlockError,
    LossOfContactError,
    ProtocolError,
    ScenarioError,
    SimulationError,
    WorkspaceError,
)
from .kernels import backend_name
from .kinematics import LegGeometry, centering_error, contact_forces, required_extension
from .mission import (
    DT,
    MissionReport,
    MissionState,
    Mode,
    World,
    build_report,
    run_mission,
    state_hash,
    validate_transition,
)
from .pipe_world import (
    JointSpec,
    PipeSegment,
    PipeSpec,
    Scenario,
    load_pipe_spec,
    load_scenario,
    save_scenario,
)
from .protocol import Decoder, encode
from .replay import ReplayWriter, replay_log

__version__ = "0.1.0"

__all__ = [
    "CartridgeEmptyError",
    "GateNotMetError",
    "InterlockError",
    "LossOfContactError",
    "ProtocolError",
    "ScenarioError",
    "SimulationError",
    "WorkspaceError",
    "backend_name",
    "LegGeometry",
    "centering_error",
    "contact_forces",
    "required_extension",
    "DT",
    "MissionReport",
    "MissionState",
    "Mode",
    "World",
    "build_report",
    "run_mission",
    "state_hash",
    "validate_transition",
    "JointSpec",
    "PipeSegment",
    "PipeSpec",
    "Scenario",
    "load_pipe_spec",
    "load_scenario",
    "save_scenario",
    "Decoder",
    "encode",
    "ReplayWriter",
    "replay_log",
    "__version__",
]
