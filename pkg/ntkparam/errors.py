from __future__ import annotations

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_FAILURE = 3


class NtkParamError(Exception):
    """Base class for all errors raised by ntkparam."""

    exit_code = EXIT_NUMERICAL_FAILURE


class ConfigError(NtkParamError):
    """Experiment configuration is malformed or references missing files."""

    exit_code = EXIT_CONFIG_ERROR


class SpecError(NtkParamError):
    """A network spec failed validation and cannot be propagated or built."""

    exit_code = EXIT_CONFIG_ERROR

    def __init__(self, message: str, violations: tuple[str, ...] = ()) -> None:
        super().__init__(message)
        self.violations = violations


class ShapeError(SpecError, ValueError):
    """Array dimensions do not match the network spec."""


class DatasetError(NtkParamError, ValueError):
    """Dataset files or splits are malformed."""

    exit_code = EXIT_CONFIG_ERROR


class NumericalError(NtkParamError):
    """A numerical routine could not produce a trustworthy result."""


class DivergentKernelError(NumericalError):
    """The naive standard NTK was used as if it were a finite matrix."""

    def __init__(
        self, message: str = "naive standard parameterization has no NTK limit"
    ) -> None:
        super().__init__(message)


class ParameterCapError(NtkParamError):
    """A finite network would exceed the configured parameter cap."""

    exit_code = EXIT_CONFIG_ERROR
