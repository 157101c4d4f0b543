"""Precision bounds for quantum parameter estimation with nuisance parameters.

Computes SLD/RLD/classical Fisher information, partial (Schur-complement)
information for interest blocks, parameter orthogonalization, Holevo and
Nagaoka/Gill-Massar bounds, model classification, optimal scalar-interest
measurements, and Monte-Carlo verification of bound achievability.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .bounds import (BoundReport, FunctionSpec, bound_report, function_bounds,
                     generalized_cr, holevo_numeric, holevo_qubit_closed,
                     nagaoka_gm, rld_cr, sld_cr)
from .classify import (classification_report, is_asymptotically_classical,
                       is_classical, is_d_invariant, is_quasi_classical)
from .measurement import (POVM, SimulationResult, born_distribution,
                          classical_fisher_of_povm, locally_unbiased_estimator,
                          optimal_pvm_scalar, pvm_theta_independence_check,
                          simulate)
from .model import (Partition, StateModel, WeightMatrix, derivatives, evaluate,
                    reparametrize, zoo_build)
from .nuisance import (OrthoTransform, PartialFisher, effective_rlds,
                       effective_slds, global_orthogonalize_ode,
                       information_loss, local_orthogonalize, partial_fisher,
                       partial_sld_fisher)
from .qfisher import (QFIM, LogDerivativeSet, commutation_operator,
                      dual_operators, fisher_matrix, rld, rld_qfim, sld,
                      sld_qfim, z_matrix)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "BoundReport", "FunctionSpec", "bound_report", "function_bounds",
    "generalized_cr", "holevo_numeric", "holevo_qubit_closed", "nagaoka_gm",
    "rld_cr", "sld_cr",
    "classification_report", "is_asymptotically_classical", "is_classical",
    "is_d_invariant", "is_quasi_classical",
    "POVM", "SimulationResult", "born_distribution", "classical_fisher_of_povm",
    "locally_unbiased_estimator", "optimal_pvm_scalar",
    "pvm_theta_independence_check", "simulate",
    "Partition", "StateModel", "WeightMatrix", "derivatives", "evaluate",
    "reparametrize", "zoo_build",
    "OrthoTransform", "PartialFisher", "effective_rlds", "effective_slds",
    "global_orthogonalize_ode", "information_loss", "local_orthogonalize",
    "partial_fisher", "partial_sld_fisher",
    "QFIM", "LogDerivativeSet", "commutation_operator", "dual_operators",
    "fisher_matrix", "rld", "rld_qfim", "sld", "sld_qfim", "z_matrix",
    "__version__",
]
