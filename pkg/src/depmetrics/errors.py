"""Exception hierarchy for the depmetrics engine."""

from __future__ import annotations


class DepmetricsError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(DepmetricsError):
    """Invalid input data or parameters.

    When the offending record came from a file, ``path`` and ``line_no``
    locate it; the rendered message is prefixed accordingly.
    """

    def __init__(self, message: str, *, path=None, line_no: int | None = None):
        self.message = message
        self.path = None if path is None else str(path)
        self.line_no = line_no
        if self.path is not None and line_no is not None:
            message = f"{self.path}:{line_no}: {message}"
        elif self.path is not None:
            message = f"{self.path}: {message}"
        super().__init__(message)

    def at(self, path, line_no: int | None = None) -> "ValidationError":
        """Copy of this error annotated with a file position."""
        return type(self)(self.message, path=path, line_no=line_no)


class MalformedLineError(ValidationError):
    """A JSONL line is not valid JSON or not the expected object shape."""


class DuplicateIdError(ValidationError):
    """An identifier that must be unique appeared twice."""


class UnknownConditionError(ValidationError):
    """Scenario names a condition the scenario space does not declare."""


class UnknownValueError(ValidationError):
    """Scenario assigns a value outside the condition's declared list."""


class MissingConditionError(ValidationError):
    """Scenario leaves one of the space's conditions unassigned."""


class TooFewConditionsError(ValidationError):
    """Pair-projection coverage needs at least two operating conditions."""


class KTooLargeError(ValidationError):
    """Requested tuple width exceeds the neuron count or the safety cap."""


class MixedScenarioError(ValidationError):
    """Activation inputs span more than one scenario."""


class EmptyInputError(ValidationError):
    """An operation that needs at least one input received none."""


class BadEpsilonError(ValidationError):
    """Perturbation amount outside the transformer kind's documented range."""


class NoBaselineError(ValidationError):
    """No identity prediction record exists for an input."""


class NoPerturbedError(ValidationError):
    """No transformed prediction record exists for an input."""


class OccluderTooLargeError(ValidationError):
    """Occluder does not fit the image, leaving zero grid positions."""


class NoHotPixelsError(ValidationError):
    """No heatmap cell falls below the threshold; ratio undefined."""


class ObjectNotCoveredError(ValidationError):
    """No occluder footprint touches the segmentation mask."""


class UnknownClassError(ValidationError):
    """A class label is absent from the weight matrix."""


class NoScenariosError(ValidationError):
    """Scenario-based degradation needs at least one labeled point."""


class OracleError(DepmetricsError):
    """Base class for inference-oracle transport failures."""


class SpawnFailedError(OracleError):
    """The oracle child process could not be started."""


class HandshakeTimeoutError(OracleError):
    """The oracle did not announce itself within the handshake timeout."""


class VersionMismatchError(OracleError):
    """The oracle speaks an unsupported protocol version."""


class MalformedResponseError(OracleError):
    """An oracle line failed to parse or violated response invariants."""

    def __init__(self, message: str, line: str | None = None):
        self.line = line
        if line is not None:
            message = f"{message}: {line!r}"
        super().__init__(message)


class ChildExitedError(OracleError):
    """The oracle process exited while requests were still pending.

    ``completed`` holds the responses that arrived before the exit.
    """

    def __init__(self, message: str, completed: dict | None = None):
        super().__init__(message)
        self.completed = completed or {}


class OracleDownError(OracleError):
    """A computation lost its oracle; ``partial`` holds resumable progress."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
