"""Free energies of translation-invariant quantum spin chains from Gibbs MPOs."""

from .chain import (
    DenseOperator,
    InteractionTerm,
    build_hamiltonian,
    exact_ratio,
    log_partition_function,
)
from .errors import DimensionCapError, GibbslineError, NumericalError, ValidationError
from .free_energy import (
    estimate_free_energy,
    fit_exponential_decay,
    ratio_convergence_sweep,
    select_parameters,
)
from .mpo import MPO, GibbsBackendSpec, mpo_gibbs, mpo_trace

__version__ = "0.1.0"

__all__ = [
    "DenseOperator",
    "DimensionCapError",
    "GibbsBackendSpec",
    "GibbslineError",
    "InteractionTerm",
    "MPO",
    "NumericalError",
    "ValidationError",
    "build_hamiltonian",
    "estimate_free_energy",
    "exact_ratio",
    "fit_exponential_decay",
    "log_partition_function",
    "mpo_gibbs",
    "mpo_trace",
    "ratio_convergence_sweep",
    "select_parameters",
]
