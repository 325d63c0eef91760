"""Fractional Gagliardo energies on a 1-D hat basis and their minimizing-movement flows."""

__version__ = "0.1.0"

from .assembly import (
    HALF_CONVENTION,
    EnergyMatrix,
    assemble_dirichlet,
    assemble_far,
    assemble_gagliardo,
    assemble_hat0,
    assemble_mass,
    assemble_near,
    assemble_renormalized,
)
from .energy import AdmissibilityError, QuadraticEnergy, SolverError
from .flows import FAMILIES, FlowSpec, build_energy, exact_reference, solve, spectral_reference
from .grid import Domain, Grid, GridFunction, builtin_family, make_grid, read_csv, sample
from .kernels import (
    FAR,
    FULL,
    NEAR,
    DivergenceError,
    KernelExponent,
    QuadratureError,
    RangeClip,
    hat_pair_entry,
    hat_product_entry,
    pair_integral_pc,
    quadrature_oracle,
)
from .mm import DissipationError, Trajectory, dissipation_report, interpolate, mm_error_vs_reference, run_mm

__all__ = [
    "__version__",
    "HALF_CONVENTION",
    "EnergyMatrix",
    "assemble_dirichlet",
    "assemble_far",
    "assemble_gagliardo",
    "assemble_hat0",
    "assemble_mass",
    "assemble_near",
    "assemble_renormalized",
    "AdmissibilityError",
    "QuadraticEnergy",
    "SolverError",
    "FAMILIES",
    "FlowSpec",
    "build_energy",
    "exact_reference",
    "solve",
    "spectral_reference",
    "Domain",
    "Grid",
    "GridFunction",
    "builtin_family",
    "make_grid",
    "read_csv",
    "sample",
    "FAR",
    "FULL",
    "NEAR",
    "DivergenceError",
    "KernelExponent",
    "QuadratureError",
    "RangeClip",
    "hat_pair_entry",
    "hat_product_entry",
    "pair_integral_pc",
    "quadrature_oracle",
    "DissipationError",
    "Trajectory",
    "dissipation_report",
    "interpolate",
    "mm_error_vs_reference",
    "run_mm",
]
