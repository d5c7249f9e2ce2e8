"""DG solver for second-order elliptic PDEs in nonvariational form."""

from .mesh import Mesh, Face, build_criss_cross, refine, skeleton, dump_off
from .space import (DGSpace, DofMap, QuadratureRule, ReferenceBasis, eval_basis,
                    face_quadrature, interval_quadrature, push_forward,
                    reference_basis, triangle_quadrature)
from .projection import (LocalProjector, project_basis_matrix_field,
                         project_function, project_piecewise_constant)
from .hessian import (DiscreteHessian, FluxChoice, assemble_hessian,
                      assemble_hessian_flux_form, assemble_hessian_prescribed_flux,
                      hessian_consistency_residual, stability_bound_check)
from .assembly import (AssembledSystem, BilinearFormConfig, assemble_eliminated,
                       assemble_mixed, eliminate_mixed,
                       galerkin_orthogonality_residual)
from .linalg import (CsrMatrix, SolverReport, bicgstab, dense_solve, ilu0_factor,
                     load_matrix_market, save_matrix_market)
from .problems import BenchmarkProblem, CoefficientField, get_problem, test1, test2, test3a, test3b
from .analysis import (ConvergenceReport, compute_eocs, energy_error_1,
                       energy_norm_1, energy_norm_2, l2_error, run_study)

__version__ = "0.1.0"
