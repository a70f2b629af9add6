"""
Exception roots shared by the simulator modules
"""


class SimulatorError(ValueError):
    """Base class for every error raised by the simulator."""


class InvariantError(SimulatorError):
    """A configuration value violates one of its invariants.

    ``field`` names the offending attribute so the config loader can report
    it as ``<section>.<field>``.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message
