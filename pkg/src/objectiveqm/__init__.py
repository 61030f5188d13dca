"""Objective hidden-property measurement models with a no-registration outcome."""

from .errors import (
    DomainError,
    Infeasible,
    InfeasibleEvasion,
    InvalidInput,
    InvariantViolation,
    NoThreshold,
    NotFound,
    NumericallyAmbiguous,
    TooLarge,
)
from .quantum import (
    DensityState,
    OutcomeSet,
    SpectralObservable,
    born_probability,
    correlation,
    make_pure,
    mix,
    singlet_state,
    spin_observable,
    tensor_product_observable,
)
from .micro_model import (
    Breakdown,
    ExtendedObservable,
    MacroProperty,
    MicroClass,
    MicroModel,
    Response,
    class_breakdown,
    conditional_correlation,
    quantum_consistency,
    state_breakdown,
    unconditional_correlation,
    validate_model,
)

__version__ = "0.1.0"

__all__ = [
    "Breakdown",
    "DensityState",
    "DomainError",
    "ExtendedObservable",
    "Infeasible",
    "InfeasibleEvasion",
    "InvalidInput",
    "InvariantViolation",
    "MacroProperty",
    "MicroClass",
    "MicroModel",
    "NoThreshold",
    "NotFound",
    "NumericallyAmbiguous",
    "OutcomeSet",
    "Response",
    "SpectralObservable",
    "TooLarge",
    "born_probability",
    "class_breakdown",
    "conditional_correlation",
    "correlation",
    "make_pure",
    "mix",
    "quantum_consistency",
    "singlet_state",
    "spin_observable",
    "state_breakdown",
    "tensor_product_observable",
    "unconditional_correlation",
    "validate_model",
]
