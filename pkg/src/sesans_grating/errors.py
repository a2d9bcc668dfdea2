"""Exception hierarchy.

Every error carries a short machine-readable ``category`` that the CLI
reports and maps to an exit code.
"""


class SesansError(Exception):
    category = "error"
    exit_code = 1


class ConfigParseError(SesansError):
    category = "parse"
    exit_code = 3

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class ValidationError(SesansError, ValueError):
    category = "validation"
    exit_code = 4

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class BandError(SesansError, ValueError):
    """Spin echo length outside the band covered by the wavelength range."""

    category = "band"
    exit_code = 5

    def __init__(self, message, interval):
        super().__init__(message)
        self.interval = interval


class GridError(SesansError, ValueError):
    """Sampling grid too coarse (or otherwise unusable) for an operation."""

    category = "grid"
    exit_code = 5


class ConvergenceError(SesansError, RuntimeError):
    category = "convergence"
    exit_code = 6

    def __init__(self, message, coarse=None, fine=None):
        super().__init__(message)
        self.coarse = coarse
        self.fine = fine


class QuadratureError(ConvergenceError):
    def __init__(self, message, error_estimate):
        super().__init__(message)
        self.error_estimate = error_estimate


class ExportError(SesansError, OSError):
    category = "io"
    exit_code = 7


class CurveError(SesansError, ValueError):
    """A curve could not be computed from otherwise valid inputs."""

    category = "compute"
    exit_code = 5
