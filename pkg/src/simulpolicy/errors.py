"""Exception hierarchy.

Every error raised on purpose by this package derives from
:class:`SimulPolicyError`, so callers (and the CLI) can tell our failures
apart from programming errors.
"""


class SimulPolicyError(Exception):
    """Base class for all package errors."""


class EmptyInput(SimulPolicyError):
    pass


class PrefixViolation(SimulPolicyError):
    """A translator returned a hypothesis that does not start with the forced prefix."""


class BackendFailure(SimulPolicyError):
    """A translator or scorer failed; ``diagnostics`` carries whatever it reported."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class EmptyBatch(SimulPolicyError):
    pass


class InvalidParam(SimulPolicyError):
    pass


class InvalidLabel(SimulPolicyError):
    pass


class EmptyOutput(SimulPolicyError):
    pass


class EmptyCorpus(SimulPolicyError):
    pass


class UnsupportedWav(SimulPolicyError):
    pass


class ManifestError(SimulPolicyError):
    pass


class UsageError(SimulPolicyError):
    pass
