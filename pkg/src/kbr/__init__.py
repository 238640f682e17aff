"""Kernel-based regularization (KBR).

Gaussian-kernel regression with moment-enforcing Lagrange shifts, an exact
second-order correction, explicit and implicit derivative schemes, and
KBR-predicted interface fluxes for 1D conservation laws.
"""

from . import baselines
from .derivatives import (
    DerivativeEstimate,
    DerivativeField,
    ImplicitConfig,
    explicit_derivatives_1d,
    explicit_derivatives_known_field,
    explicit_field,
    implicit_derivatives_1d,
    implicit_derivatives_2d,
    implicit_field,
)
from .errors import (
    DegenerateCorrection,
    ExtrapolationWarning,
    FitFailed,
    GradientDegenerate,
    IllConditioned,
    InsufficientData,
    InvalidConfig,
    InvalidInput,
    KBRError,
    LaplacianDegenerate,
    MetricUndefined,
    NonPhysicalState,
    NotConverged,
    NumericalUnderflow,
    SchemaError,
    SingularStencil,
    SolverFailed,
    Unstable,
)
from .functions import FUNCTIONS, TestFunction, get_function
from .grid import Grid1D, clustered_grid, uniform_grid
from .kernel import (
    KernelModel,
    TrainingSet,
    kernel_weights,
    moment_errors,
    predict,
    predict_order0,
    predict_order1,
    predict_order2_exact,
    solve_lagrange_multiplier,
)
from .metrics import ShockMetrics, mse, normalized_rmse, rmse, shock_metrics
from .pde import SolverConfig, kbr_interface_flux, run_simulation
from .studies import convergence_study, dnn_table, noise_study
from .training import NoiseConfig, SweepConfig, add_noise, fit_theta, sweep_theta, typical_distance

__version__ = "0.1.0"
