"""Symbolic variational calculus on jet bundles with boundary-port extraction."""
from .cartan import (
    ADAPTED,
    SYMMETRIC,
    BoundaryReport,
    CartanCoefficients,
    TimeFaceError,
    boundary_terms,
    boundary_terms_naive,
    cartan_coefficients,
    el_from_coefficients,
    euler_lagrange,
    verify_decomposition,
)
from .jetcalc import (
    BundleError,
    BundleSpec,
    Density,
    MultiIndex,
    UnsupportedOrderError,
    multi_indices,
    prolong_vertical_field,
    total_derivative,
    total_derivative_multi,
)
from .porthamil import (
    PHSystem,
    PowerBalance,
    StructureError,
    collocated_outputs,
    evolution_field,
    power_balance,
    validate_structure,
    variational_derivative,
)
from .symexpr import Kind, Poly, Symbol, canonicalize, equivalent, to_infix

__version__ = "0.1.0"

__all__ = [
    "ADAPTED",
    "BoundaryReport",
    "BundleError",
    "BundleSpec",
    "CartanCoefficients",
    "Density",
    "Kind",
    "MultiIndex",
    "PHSystem",
    "Poly",
    "PowerBalance",
    "SYMMETRIC",
    "StructureError",
    "Symbol",
    "TimeFaceError",
    "UnsupportedOrderError",
    "boundary_terms",
    "boundary_terms_naive",
    "canonicalize",
    "cartan_coefficients",
    "collocated_outputs",
    "el_from_coefficients",
    "equivalent",
    "euler_lagrange",
    "evolution_field",
    "multi_indices",
    "power_balance",
    "prolong_vertical_field",
    "to_infix",
    "total_derivative",
    "total_derivative_multi",
    "validate_structure",
    "variational_derivative",
    "verify_decomposition",
]
