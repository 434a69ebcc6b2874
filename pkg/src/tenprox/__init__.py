"""Dense-tensor proximal gradient solvers with sequence extrapolation.

Solves ``min_{X in Omega} 0.5 ||F(X) - B||_F^2 + mu * phi(L(X))`` by a
forward-backward-forward iteration whose prox step is computed from the
dual, and accelerates it with restarted GT-TET or HOSVD-MPE extrapolation.
"""

from .errors import DimensionError, DivergenceError, NumericalError, ParameterError
from .extrap import accelerate_solver, gt_tet, hosvd_mpe, restarted_accelerate
from .linop import (LinearOperator, compose, einstein_op, gradient_op, identity_op, mask_op,
                    operator_norm_estimate)
from .metrics import psnr, relative_error
from .prox import InnerLoopConfig, ProxFunction, dual_prox_solve, l1, soft_threshold
from .solvers import (ConstraintSet, GTPGIteration, ProblemSpec, SolveReport, SolverConfig, box,
                      choose_alpha, eista_solve, gtpg_solve, nuclear_ball, tdpg_solve,
                      tista_solve, whole_space)
from .tensor import (einstein_product, fold, frobenius_norm, inf_norm, inner_product, k_norm,
                     nuclear_norm, unfold)

__version__ = "0.1.0"
