from __future__ import annotations


class EwkitError(Exception):
    """Base class; `exit_code` is what the CLI returns when this escapes."""

    exit_code = 3


class ConfigError(EwkitError, ValueError):
    exit_code = 2


class MissingConstantError(ConfigError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else "missing constant"


class NumericError(EwkitError, ArithmeticError):
    pass


class DomainError(NumericError):
    """Unsupported family/domain pair or an empty/invalid domain."""


class IncompatibleLossError(NumericError, TypeError):
    pass


class ScheduleError(ConfigError):
    pass


class ScheduleExhaustedError(NumericError, IndexError):
    pass


class MirrorMapError(NumericError):
    pass


class ConstantViolationError(NumericError):
    pass


class SamplerDiagnosticError(NumericError):
    pass


class InsufficientExplorationError(NumericError):
    pass


class LossBoundError(NumericError):
    pass
