"""Exception hierarchy. Every error carries the name of the module that raised it."""


class PhotonicsError(Exception):
    module = "hybridoam"

    def __str__(self):
        return f"[{self.module}] {super().__str__()}"


class TruncationError(PhotonicsError, ValueError):
    module = "modes"


class ZeroVectorError(PhotonicsError, ValueError):
    module = "modes"


class DegenerateProjectionError(PhotonicsError, ValueError):
    module = "modes"


class PostSelectionError(PhotonicsError, ValueError):
    module = "gate"


class DimensionError(PhotonicsError, ValueError):
    module = "gate"


class EstimationError(PhotonicsError, ValueError):
    module = "fock2"


class ParameterError(PhotonicsError, ValueError):
    module = "fock2"


class CompletenessError(PhotonicsError, ValueError):
    module = "tomo"


class ConfigurationError(PhotonicsError, ValueError):
    module = "budget"


class ConfigParseError(PhotonicsError, ValueError):
    """Config text could not be parsed; ``line`` and ``column`` are 1-based."""

    module = "cli"

    def __init__(self, message, line=0, column=0):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
