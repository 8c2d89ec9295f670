"""Numerical stability experiments for ternary derivations on matrix ternary algebras."""

from .algebra import (AlgebraDescriptor, add, as_element, operator_norm, scale,
                      ternary_product)
from .maps import (ControlFunction, DilationIterate, Identity, InnerDerivation, Mode,
                   PowerPerturbation, ProbeSet, ScalarMultiple, Sum, apply_J, evaluate,
                   generalized_distance)
from .perturbation import (PerturbationSpec, make_inner_derivation, make_perturbed_map,
                           verify_premise)
from .stabilizer import (StabilityCertificate, StabilizerConfig, fixed_point_alternative_check,
                         stabilize)
from .verifier import (DiscrepancyLedger, bound_check, corollary_check, derivation_residual,
                       jensen_residual, jordan_residual, residual_report, substitution_check)

__version__ = "0.1.0"
