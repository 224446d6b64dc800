"""Pseudo-spectral solver for weakly nonlinear porous-media interface models."""

from .config import RunConfig, format_config, parse_config
from .errors import (
    BlowUpError,
    ConfigError,
    DimensionError,
    GridMismatchError,
    InfeasibleDataError,
    InvalidInputError,
    MuskatError,
    TruncationError,
    UnsupportedPowerError,
)
from .models import MODELS, EvolutionModel, ExpansionState, ModelParams, build_model
from .spectral import (
    Field,
    PeriodicGrid,
    Spectrum,
    apply_multiplier,
    calderon,
    commutator_fH,
    d_dx,
    dealias,
    dn0,
    hilbert,
    inverse_transform,
    laplacian,
    product,
    transform,
)
from .strip import (
    StripField,
    StripGrid,
    boundary_flux_g,
    compute_B,
    forchheimer_source,
    harmonic_extension,
    poisson_boundary_trace,
    solve_poisson_strip,
)
from .timestep import StepConfig, Trajectory, integrate, linear_symbol, step

__version__ = "0.1.0"
