"""Pseudo-spectral laboratory for the dimensionless dipolar Gross-Pitaevskii equation."""

from .errors import (
    ConfigurationError,
    ConvergenceError,
    DGPEError,
    InputError,
    NumericalHealthError,
    RegimeError,
    ResolutionError,
    ShapeError,
    SuiteFailure,
    VerificationError,
)
from .kernels import BACKEND
from .spectral import (
    Field,
    GridSpec,
    MultiplierField,
    apply_multiplier,
    cross,
    dipolar_multiplier,
    dipolar_potential,
    fourth,
    make_grid,
    read_checkpoint,
    riesz_multiplier,
    set_fft_workers,
    square,
    write_checkpoint,
)

__version__ = "0.1.0"
