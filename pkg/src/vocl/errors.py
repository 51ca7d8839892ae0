"""Exception types shared across the package."""


class VoclError(Exception):
    """Base class for all package-specific errors."""


class LengthMismatch(VoclError):
    """Two trajectories (or field sets) that must have equal length do not."""


class AngleNearPi(VoclError):
    """Rotation angle within tolerance of pi; the log map is ill-conditioned."""


class DegenerateGeometry(VoclError):
    """Point set has zero variance; similarity alignment is undefined."""


class EmptyInput(VoclError):
    """An operation requiring at least one element received none."""


class TooShort(VoclError):
    """Trajectory has fewer poses than the operation requires."""


class TooFewSequences(VoclError):
    """Not enough sequences to partition into the requested level count."""


class KeyMismatch(VoclError):
    """Predicted and ground-truth flow sets are keyed differently."""


class ShapeMismatch(VoclError):
    """Array shapes of paired flow fields (or masks) differ."""


class NegativeLoss(VoclError):
    """A loss value that must be non-negative is negative."""


class Underfull(VoclError):
    """Replay buffer holds fewer records than the requested batch."""


class NonFiniteGradient(VoclError):
    """A gradient component is NaN or infinite; the update was skipped."""


class NonFiniteLoss(VoclError):
    """A loss value is NaN or infinite."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class UnknownLevel(VoclError):
    """A level manifest entry carries a level outside the configured set."""


class MalformedLine(VoclError):
    """A trajectory file line does not match the expected format."""

    def __init__(self, message: str, path: str = "", line_no: int = 0):
        super().__init__(message)
        self.path = path
        self.line_no = line_no


class NonMonotonicTimestamps(VoclError):
    """Timestamps in a trajectory file do not strictly increase."""


class BadQuaternion(VoclError):
    """Quaternion norm is outside the accepted range."""


class MissingColumns(VoclError):
    """A CSV lacks columns required by the requested operation."""

    def __init__(self, columns: list[str]):
        super().__init__("missing columns: " + ", ".join(columns))
        self.columns = columns


class ConfigError(VoclError):
    """Configuration is invalid; carries the full list of problems."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems
