"""Exception types shared across the simulator."""


class SimulationError(Exception):
    """Base class for all simulator errors."""


class ScenarioError(SimulationError):
    """Scenario file could not be parsed or violates a validation rule."""


class InterlockError(SimulationError):
    """A command was refused because the robot state forbids it."""


class WorkspaceError(SimulationError):
    """A tool target lies outside the cylindrical workspace."""


class GateNotMetError(SimulationError):
    """Sealant injection attempted below the corrosion-removal gate."""


class CartridgeEmptyError(SimulationError):
    """Sealant requested but the cartridge holds none."""


class LossOfContactError(SimulationError):
    """Wall-press geometry has no equilibrium with all wheels in contact."""


class ProtocolError(SimulationError):
    """Wire message violates the framing or field-range rules.

    ``code`` is one of the NACK status codes from :mod:`inpipe.protocol`.
    """

    def __init__(self, message, code):
        super().__init__(message)
        self.code = code
