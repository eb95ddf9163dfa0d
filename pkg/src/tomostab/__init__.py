"""Numerical toolbox for stability analysis of weighted ray transforms.

The package studies one concrete ill-posed inverse problem — recovering a
function on the unit disk from weighted line integrals — end to end: a
periodic spectral grid with exact Sobolev-scale interpolation inequalities,
a sequence-space counterexample showing how fast stability can die, a
sparse forward/adjoint projector pair with a singular-kernel cross-check,
discrete stability constants and their collapse for limited-angle weights,
coherent-state symbol probes, and a conditional Holder-stability harness
for a quadratic perturbation of the normal operator.
"""

from .errors import (
    InvalidInputError,
    InvalidParameterError,
    NumericFailureError,
    ResolutionError,
    SingularPointError,
    TooLargeError,
    UnsupportedOrderError,
)
from .grid_spectral import (
    Grid,
    GridFunction,
    SpectralField,
    ck_norm,
    interpolation_check,
    make_grid,
    sobolev_norm,
    to_physical,
    to_spectral,
)
from .seqlab import (
    DEFAULT_TRUNCATION,
    InstabilityRatio,
    SequenceVec,
    counterexample,
    hs_norm,
    instability_ratio,
    seq_linearization_at,
    seq_map,
)
from .xray import (
    OMEGA1_RADIUS,
    OMEGA_RADIUS,
    SYMBOL_NORMALIZATION,
    RaySet,
    Sinogram,
    WeightSpec,
    adjoint,
    adjoint_cell_normalizer,
    calibrate_kernel_constant,
    ellipticity_margin,
    forward,
    forward_matrix,
    normal_compose,
    normal_kernel,
    omega1_interior_mask,
    omega_node_mask,
    principal_symbol,
    weight_W,
)
from .stability import (
    MAX_MATRIX_SIDE,
    IdentityCheckResult,
    OperatorMatrix,
    PerturbationScan,
    ProbeReport,
    StabilityEntry,
    StabilityReport,
    assemble_normal_matrix,
    coherent_state,
    h1_gradient_operator,
    injectivity_identity_check,
    minimal_resolution,
    perturbation_scan,
    stability_constant,
    stability_minimizer,
    stability_sweep,
    symbol_probe,
)
from .holder import (
    FinDimCheck,
    FinDimMap,
    HolderReport,
    HolderSample,
    RemainderEstimate,
    TestMap,
    findim_lipschitz_check,
    holder_fit,
    make_test_map,
    modulated_bump,
    mollifier_bump,
    random_cubic_map,
    remainder_bound_estimate,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "InvalidInputError",
    "InvalidParameterError",
    "NumericFailureError",
    "ResolutionError",
    "SingularPointError",
    "TooLargeError",
    "UnsupportedOrderError",
    # grid + spectral scales
    "Grid",
    "GridFunction",
    "SpectralField",
    "make_grid",
    "to_spectral",
    "to_physical",
    "sobolev_norm",
    "ck_norm",
    "interpolation_check",
    # sequence-space counterexample
    "DEFAULT_TRUNCATION",
    "SequenceVec",
    "InstabilityRatio",
    "seq_map",
    "seq_linearization_at",
    "counterexample",
    "hs_norm",
    "instability_ratio",
    # ray transform
    "OMEGA_RADIUS",
    "OMEGA1_RADIUS",
    "SYMBOL_NORMALIZATION",
    "WeightSpec",
    "RaySet",
    "Sinogram",
    "forward",
    "forward_matrix",
    "adjoint",
    "adjoint_cell_normalizer",
    "normal_compose",
    "normal_kernel",
    "weight_W",
    "calibrate_kernel_constant",
    "principal_symbol",
    "ellipticity_margin",
    "omega_node_mask",
    "omega1_interior_mask",
    # stability lab
    "MAX_MATRIX_SIDE",
    "OperatorMatrix",
    "StabilityEntry",
    "StabilityReport",
    "PerturbationScan",
    "ProbeReport",
    "IdentityCheckResult",
    "assemble_normal_matrix",
    "h1_gradient_operator",
    "stability_constant",
    "stability_minimizer",
    "stability_sweep",
    "perturbation_scan",
    "minimal_resolution",
    "coherent_state",
    "symbol_probe",
    "injectivity_identity_check",
    # Holder harness
    "FinDimMap",
    "FinDimCheck",
    "TestMap",
    "HolderSample",
    "HolderReport",
    "RemainderEstimate",
    "findim_lipschitz_check",
    "random_cubic_map",
    "make_test_map",
    "mollifier_bump",
    "modulated_bump",
    "remainder_bound_estimate",
    "holder_fit",
]
