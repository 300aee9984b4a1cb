"""Pseudo-spectral simulation and verification suite for elastic
porous-media interface models on the periodic line."""

from ._kernels import KERNEL_LANE
from .config import ConfigError, SolverConfig, load_config, make_initial_condition
from .diagnostics import (
    EnergyRecord,
    check_exponential_decay,
    check_monotone_decay,
    check_operator_bounds,
    energy,
    random_decay_field,
)
from .elliptic import (
    FixedPointReport,
    MaxIterationsError,
    NotContractingError,
    certify_smallness,
    dense_solve,
    solve_quasilinear,
)
from .integrate import IntegratorState, StepSizeUnderflowError, Trajectory, run, step
from .models import (
    apply_quasilinear_lub,
    apply_quasilinear_wnl,
    base_elliptic_symbol,
    commutator,
    commutator_sign_split,
    forcing_lub,
    forcing_wnl,
    invert_base,
    invert_lub_base,
    leading_velocity_wnl2,
    linear_decay_rate,
    rhs_wnl2,
)
from .params import ModelParams, nondimensionalize
from .spectral import (
    GridMismatchError,
    MultiplierSymbol,
    SpectralField,
    apply_multiplier,
    depth_symbol,
    derivative_symbol,
    galerkin_project,
    load_spectrum_csv,
    pointwise_product,
    project_mean_zero,
    save_spectrum_csv,
    wiener_norm,
)
from .strip import (
    DegenerateLiftError,
    StripGrid,
    StripSolution,
    assemble_P_delta,
    dtn_apply,
    solve_strip,
    verify_dtn_expansion,
    verify_lub_flux,
)

__version__ = "0.1.0"
