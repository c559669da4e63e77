"""Exception hierarchy shared by all pipest modules."""


class PipestError(Exception):
    """Base class for all pipest errors."""


class InvalidParams(PipestError, ValueError):
    """Inertial parameters that cannot be built or converted (e.g. mass <= 0)."""


class EmptyRecording(PipestError, ValueError):
    pass


class NonMonotonicTime(PipestError, ValueError):
    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"timestamps not strictly increasing at sample {index}")


class NonFiniteValue(PipestError, ValueError):
    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"non-finite value at sample {index}")


class NonUniformRate(PipestError, ValueError):
    pass


class TooFewSamples(PipestError, ValueError):
    pass


class InvalidWindow(PipestError, ValueError):
    pass


class FractionOutOfRange(PipestError, ValueError):
    pass


class WorkspaceViolation(PipestError, ValueError):
    pass


class MissingKnownParams(PipestError, ValueError):
    pass


class SolverError(PipestError, RuntimeError):
    """Base class for solver failures that produce no estimate."""


class DegenerateSystem(SolverError):
    pass


class TlsDegenerate(SolverError):
    pass


class InsufficientRows(SolverError):
    pass


class UnsupportedMode(SolverError):
    pass


class ZeroGroundTruth(PipestError, ValueError):
    pass


class MissingTruth(PipestError, ValueError):
    pass


class IngestionError(PipestError, ValueError):
    """Malformed input file; ``row`` is the 1-based data row when known."""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
