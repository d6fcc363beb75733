"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class DGPEError(Exception):
    exit_code = 1


class ConfigurationError(DGPEError, ValueError):
    exit_code = 2


class ShapeError(DGPEError, ValueError):
    exit_code = 2


class InputError(DGPEError, ValueError):
    exit_code = 2


class ConvergenceError(DGPEError, RuntimeError):
    exit_code = 3

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class NumericalHealthError(DGPEError, FloatingPointError):
    exit_code = 4


class SuiteFailure(DGPEError):
    exit_code = 5


class VerificationError(DGPEError, AssertionError):
    exit_code = 6


class RegimeError(DGPEError, ValueError):
    exit_code = 7


class ResolutionError(DGPEError, ValueError):
    exit_code = 8
