"""Exception hierarchy.

Everything raised deliberately by the package derives from ``TwinError``.
``DomainError`` marks failures of the physics or the fit (the CLI maps these
to exit code 2); ``ConfigError`` and ``IoError`` mark bad inputs or files
(exit code 1).
"""


class TwinError(Exception):
    """Base class for all package errors."""


class DomainError(TwinError, ValueError):
    pass


class ConfigError(TwinError, ValueError):
    pass


class IoError(TwinError, OSError):
    pass


# mechanism
class WorkspaceError(DomainError):
    """Target lies outside the reachable workspace.

    ``stage`` names the step of the inverse-kinematics pipeline that failed.
    """

    def __init__(self, message, stage=None):
        super().__init__(message if stage is None else f"{stage}: {message}")
        self.stage = stage


class Unsolvable(WorkspaceError):
    pass


class Degenerate(DomainError):
    pass


class SingularSystem(DomainError):
    pass


class Inconsistent(DomainError):
    pass


class StrokeError(DomainError):
    pass


class GeometryError(DomainError):
    pass


class NoConvergence(DomainError):
    pass


class AssemblyError(DomainError):
    pass


# statics
class EmptySpan(DomainError):
    pass


class NonPositiveArea(DomainError):
    pass


# terrain
class ExtentTooSmall(DomainError):
    pass


class UnstableStep(DomainError):
    pass


# calibration
class ZeroReference(DomainError):
    pass


class NoOverlap(DomainError):
    pass


class BudgetTooSmall(DomainError):
    pass


class CalibrationFailed(DomainError):
    pass


# io
class ParseError(ConfigError):
    def __init__(self, message, line=None, column=None):
        where = "" if line is None else f" (line {line}, column {column})"
        super().__init__(message + where)
        self.line = line
        self.column = column


class ValidationError(ConfigError):
    pass


class MissingColumn(ConfigError):
    pass


class NonMonotoneTime(ConfigError):
    pass


class UnitError(ConfigError):
    pass


class MissingChannel(ConfigError):
    pass
