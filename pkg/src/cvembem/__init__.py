"""Coupled curved virtual element / boundary element solver for the 2D
exterior Helmholtz Dirichlet problem on domains truncated by a smooth
artificial boundary with a boundary-integral non-reflecting condition."""

from .geometry import Circle, Segment, ParamInterval, curve_eval, curve_derivative, outward_normal
from .mesh import (
    Mesh,
    DofMap,
    build_annulus_mesh,
    build_square_ring_mesh,
    refine,
    build_dof_map,
    read_mesh,
    write_mesh,
)
from .quadrature import Rule1D, Rule2D, gauss_legendre, gauss_lobatto, qsmooth, graded_rule, element_rule, transfinite_map
from .specfun import bessel_j, bessel_y, hankel1, green_helmholtz, green_helmholtz_dny, green_laplace, green_laplace_dny
from .cvem import compute_projectors, local_stiffness, local_mass, assemble_fem_blocks, GlobalBlocks
from .bem import BoundaryMesh, BemMatrices, QuadPolicy, boundary_mesh, assemble_V, assemble_K, assemble_bem, nrbc_row_block
from .solver import ProblemSpec, SolveResult, solve_helmholtz, solve_interior_laplace, dirichlet_lift, discrete_load, build_system, solve, evaluate_exterior
from .harness import RunConfig, ErrorReport, error_norms, eoc, run_convergence, point_source, base_mesh

__version__ = "0.1.0"
