"""Exceptions raised by rydbergscan.

Every exception carries the process exit status the CLI reports for it,
so the command functions can stay ignorant of the CLI.
"""


class RydbergScanError(Exception):
    """Base class for all errors raised by rydbergscan."""

    exit_code: int = 1


class ConfigurationError(RydbergScanError):
    """The configuration is invalid or asks for something out of range."""

    exit_code = 2


class NumericalError(RydbergScanError):
    """A numerical routine failed or lost accuracy beyond its tolerance."""

    exit_code = 3


class ContractViolation(RydbergScanError):
    """An operation was called with arguments that break its preconditions."""

    exit_code = 3


class DomainError(RydbergScanError, ValueError):
    """An argument is outside the mathematical domain of a formula."""

    exit_code = 3


class KappaIdentificationError(DomainError):
    """Two peak positions do not correspond to any pair of neighboring resonances."""

    def __init__(self, ratio: float, *args: object) -> None:
        message = (
            f"Peak ratio {ratio:.6g} is outside (0.70, 1.0): no valid kappa, the peaks are probably misidentified"
        )
        super().__init__(message, *args)
        self.ratio = ratio


class PipelineError(RydbergScanError):
    """Wraps a failure in one stage of a multi-stage pipeline."""

    exit_code = 3

    def __init__(self, stage: str, cause: Exception, *args: object) -> None:
        message = f"Stage '{stage}' failed: {cause}"
        super().__init__(message, *args)
        self.stage = stage
        self.cause = cause
        if isinstance(cause, RydbergScanError):
            self.exit_code = cause.exit_code


class ArtifactIOError(RydbergScanError):
    """Output files or directories could not be written."""

    exit_code = 4
