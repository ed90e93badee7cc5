"""Exception hierarchy shared by all meshcast modules."""


class MeshcastError(Exception):
    """Base class for every error raised by this package."""


class GraphFormatError(MeshcastError, ValueError):
    """Malformed graph file content."""


class SelfLoopError(GraphFormatError):
    pass


class DuplicateEdgeError(GraphFormatError):
    pass


class DisconnectedGraphError(MeshcastError, ValueError):
    pass


class GeneratorError(MeshcastError, ValueError):
    """Unknown or infeasible generator spec."""


class CycleError(MeshcastError, ValueError):
    pass


class SgstConstructionError(MeshcastError):
    """Raised when the SGST builder cannot satisfy the validator.

    ``report`` carries the failing :class:`~meshcast.ranking.ValidationReport`.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ProtocolStateError(MeshcastError, RuntimeError):
    """A protocol asked a node to do something its state forbids."""


class CollisionError(ProtocolStateError):
    """A deterministic slot produced noise at an intended receiver with p=0."""


class ConfigError(MeshcastError, ValueError):
    pass


class FieldError(MeshcastError, ValueError):
    """Invalid finite-field operation (e.g. inverse of zero)."""


class DimensionError(MeshcastError, ValueError):
    pass
