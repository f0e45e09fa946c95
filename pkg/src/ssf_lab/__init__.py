"""Desk-scale laboratory for semiclassical spectral-shift asymptotics of
matrix Schrodinger operators: hypothesis checkers, closed-form leading
coefficients, a periodic Fourier-spectral Weyl engine, shift-function
estimators, and an experiment harness."""

from .bumps import Bump1D, ProductCutoff, ScalarPhaseFunction, dilation_generator
from .coefficients import (
    CoefficientProfile,
    TestFunction,
    a0,
    bump_test_function,
    c0,
    coefficient_profile,
    gamma0,
    gamma0_localized,
    plateau_test_function,
    raised_cosine_test_function,
    sphere_volume,
)
from .harness import ExperimentConfig, SlopeFit, fit_order, reference_potential, run
from .microhyperbolicity import (
    Direction,
    EscapeCertificate,
    MicrohyperbolicityCertificate,
    boundary_value_extrapolate,
    check_definition,
    check_on_energy_shell,
    check_pointwise,
    crossing_condition,
    escape_check_dilation,
    escape_check_general,
    extend_to_global,
    find_direction,
    flatten_symbol,
    linearized_block_symbol,
)
from .quantization import (
    Grid1D,
    GridOperator,
    WindowTheta,
    build_schrodinger,
    fourier_window,
    smoothed_trace,
    theorem1_check,
    theorem2_check,
    theorem3_check,
    weyl_quantize,
)
from .ssf import (
    OperatorPair,
    SSFEstimate,
    build_pair,
    derivative_check,
    ssf_counting,
    ssf_estimate,
    ssf_mollified,
    weak_pairing,
    weyl_check,
)
from .symbols import (
    EigenBranchSet,
    MatrixPotential,
    MatrixSymbol,
    branches,
    hermitian_eigen,
    model_potential,
    schrodinger_symbol,
    symbol_gradient,
)

__version__ = "0.1.0"
