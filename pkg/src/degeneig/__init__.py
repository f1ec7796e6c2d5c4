"""Dirichlet spectra of point-degenerate weighted elliptic operators on planar domains."""

__version__ = "0.1.0"

from .assembly import AssembledSystem, assemble_mass, assemble_potential, assemble_stiffness, assemble_system
from .eigen import EigenDecomposition, SpectralCluster, cluster_eigenvalues, solve_eigs, verify_minmax
from .mesh import Mesh, build_rectangle_mesh, build_unit_square_mesh, extract_submesh, refine_uniform
from .weights import WeightSpec, estimate_a2_constant, hardy_constant, hardy_ratio, poincare_ratio

__all__ = [
    "AssembledSystem", "EigenDecomposition", "Mesh", "SpectralCluster", "WeightSpec",
    "assemble_mass", "assemble_potential", "assemble_stiffness", "assemble_system",
    "build_rectangle_mesh", "build_unit_square_mesh", "cluster_eigenvalues", "estimate_a2_constant",
    "extract_submesh", "hardy_constant", "hardy_ratio", "poincare_ratio", "refine_uniform",
    "solve_eigs", "verify_minmax",
]
