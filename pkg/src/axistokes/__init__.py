"""Pressure-robust Bernardi-Raugel discretization of axisymmetric Stokes flow."""
from .analysis import ErrorReport, eoc, error_norms, pressure_best_approx
from .assembly import assemble_a, assemble_b, assemble_rhs, assemble_system, eliminate_constraints
from .bench import RunConfig, run_convergence, run_nu_sweep, run_quadrature_sweep
from .cases import ManufacturedCase, catalog, get_case, weighted_mean_shift
from .hdiv import ReconVariant, build_hdiv_space, build_recon_operator, reconstruction
from .mesh import Mesh, classify, generate_unit_square_mesh, load_mesh, save_mesh, validate
from .quadrature import edge_rule, triangle_rule
from .solver import discrete_divergence_residual, solve_stokes
from .spaces import apply_dirichlet, build_spaces, interpolate_field

__version__ = "0.1.0"

__all__ = [
    "ErrorReport",
    "eoc",
    "error_norms",
    "pressure_best_approx",
    "assemble_a",
    "assemble_b",
    "assemble_rhs",
    "assemble_system",
    "eliminate_constraints",
    "RunConfig",
    "run_convergence",
    "run_nu_sweep",
    "run_quadrature_sweep",
    "ManufacturedCase",
    "catalog",
    "get_case",
    "weighted_mean_shift",
    "ReconVariant",
    "build_hdiv_space",
    "build_recon_operator",
    "reconstruction",
    "Mesh",
    "classify",
    "generate_unit_square_mesh",
    "load_mesh",
    "save_mesh",
    "validate",
    "edge_rule",
    "triangle_rule",
    "discrete_divergence_residual",
    "solve_stokes",
    "apply_dirichlet",
    "build_spaces",
    "interpolate_field",
]
