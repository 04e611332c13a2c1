"""Exception hierarchy shared by all modules.

Each class carries the process exit code the command line front end maps it to.
"""


class KoiterFSIError(Exception):
    exit_code = 3


class ConfigurationError(KoiterFSIError):
    """Invalid configuration, unsupported option or inconsistent setup."""

    exit_code = 2


class ParameterError(ConfigurationError):
    """A numerical parameter lies outside its admissible range."""


class AdmissibilityError(KoiterFSIError):
    """A displacement is too large for the tubular neighbourhood."""

    exit_code = 4


class OutOfTubeError(KoiterFSIError):
    """A point lies outside the tube around the shell."""


class SolverFailure(KoiterFSIError):
    """A linear solve failed or produced an unacceptable residual."""


class SizeError(ConfigurationError):
    """A dense construction was requested on a problem that is too large."""


class HorizonExceeded(KoiterFSIError):
    """The displacement left the admissible ball before the final time."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class InvariantViolation(KoiterFSIError):
    exit_code = 4


class FormatError(KoiterFSIError):
    """A checkpoint file is malformed; ``offset`` points at the bad byte."""

    exit_code = 2

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset
