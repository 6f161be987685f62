"""Privacy-preserving outsourced Bayesian optimization.

A curator releases a differentially private random projection of its
inputs; a modeler runs GP-UCB on the released rows and asks the curator
for noisy objective values by row index.
"""

__version__ = "0.1.0"

from .analysis import (
    GuaranteeParams,
    TheoryConstants,
    check_covariance_preservation,
    check_distance_preservation,
    derive_guarantee,
    min_projection_dim,
    regret_bound,
)
from .curator import (
    DpParams,
    InputDataset,
    MeasurementOracle,
    TransformedDataset,
    compute_omega,
    dp_transform,
    lift_singular_values,
    make_neighbor,
)
from .errors import ContractError, InputError, NumericError, ParseError, PoboError, SchemaError
from .gp import (
    GpHyperparams,
    GpPosterior,
    condition,
    fit_hyperparams,
    is_diagonally_dominant,
    log_marginal_likelihood,
    posterior_predict,
    se_kernel_matrix,
)
from .modeler import BoConfig, ObservationLog, beta_t, run_bo, ucb_select

__all__ = [
    "__version__",
    "BoConfig",
    "ContractError",
    "DpParams",
    "GpHyperparams",
    "GpPosterior",
    "GuaranteeParams",
    "InputDataset",
    "InputError",
    "MeasurementOracle",
    "NumericError",
    "ObservationLog",
    "ParseError",
    "PoboError",
    "SchemaError",
    "TheoryConstants",
    "TransformedDataset",
    "beta_t",
    "check_covariance_preservation",
    "check_distance_preservation",
    "compute_omega",
    "condition",
    "derive_guarantee",
    "dp_transform",
    "fit_hyperparams",
    "is_diagonally_dominant",
    "lift_singular_values",
    "log_marginal_likelihood",
    "make_neighbor",
    "min_projection_dim",
    "posterior_predict",
    "regret_bound",
    "run_bo",
    "se_kernel_matrix",
    "ucb_select",
]
