"""Block alpha-circulant preconditioners for all-at-once diffusion covariance systems."""
from .circulant import (PreconditionerSpec, SolveReport, block_dft_forward, block_dft_inverse,
                        build_preconditioner, solve_outer)
from .multigrid import build_mg_hierarchy, mg_vcycle
from .operators import (MatvecCounter, apply_A, apply_block_system, build_diffusion_operator,
                        build_rhs)
from .solvers import ChebyshevConfig, chebyshev_solve, minres_solve, pcg_solve
from .spectral import allocate_inner_iterations, extreme_eigenvalues, scaled_roots_of_unity

__version__ = "0.1.0"

__all__ = [
    "PreconditionerSpec", "SolveReport", "block_dft_forward", "block_dft_inverse",
    "build_preconditioner", "solve_outer", "build_mg_hierarchy", "mg_vcycle",
    "MatvecCounter", "apply_A", "apply_block_system", "build_diffusion_operator", "build_rhs",
    "ChebyshevConfig", "chebyshev_solve", "minres_solve", "pcg_solve",
    "allocate_inner_iterations", "extreme_eigenvalues", "scaled_roots_of_unity",
]
