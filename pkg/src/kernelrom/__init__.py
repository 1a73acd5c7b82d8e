"""Kernel reduced-order PDE solving with snapshot kernels and sparse precision factors."""

from .errors import KernelRomError
from .geometry import (CollocationSet, MaximinOrdering, SparsityPattern,
                       fill_distance, make_grid, make_periodic_grid, maximin_order,
                       sparsity_pattern)
from .kernels import (EmpiricalKernel, GramMatrix, MaternKernel, TruncatedKernel,
                      assemble_gram, empirical_eval, gp_sample_field, matern52_eval,
                      pod_truncate)
from .recovery import (ConstraintStencil, GaussNewtonConfig, RecoveryProblem,
                       assemble_constraints, crank_nicolson_march, evaluate_solution,
                       gauss_newton_solve)
from .reference import (PDEInstance, Trajectory, poisson_streamfunction,
                        solve_allen_cahn, solve_burgers, solve_darcy,
                        solve_ns_vorticity, solve_semilinear_elliptic)
from .sampling import (SamplerSpec, sample_bandlimited_fourier, sample_trig_ic_1d,
                       sample_trig_ic_2d)
from .snapshots import (SnapshotLibrary, build_library, greedy_select, load_library,
                        save_library, shift_augment)
from .sparse_cholesky import (SparseFactor, apply_covariance, apply_precision,
                              frobenius_gap, kl_divergence, kl_sparse_factor)
from .experiments import (ErrorReport, ExperimentConfig, energy_spectrum,
                          relative_l2_error, run_experiment, sweep)

__version__ = "0.1.0"
