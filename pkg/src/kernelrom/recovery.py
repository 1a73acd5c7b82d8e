"""Constrained minimum-norm recovery by Gauss-Newton over nodal values.

The unknown is the vector of solution values at the collocation points.  All
differential constraints are realized as finite-difference stencils over those
nodal values, so the quadratic form uses the Dirac-functional Gram matrix (or
its sparse precision factor) only.  The stacked constraint map is

    G(v) = A_lin v + A_out tau(A_id v)     (interior rows)
           A_bc v                          (boundary rows, optional)

with tau a pointwise nonlinearity.  A_out defaults to the identity injection,
which covers reaction-type nonlinearities; advective terms use a first
derivative stencil as A_out acting on tau(u) = u^2 / 4 (conservative form).

Each Gauss-Newton step solves the linearized minimum-norm problem in closed
form:

    v+ = Kt J^T (J Kt J^T + lambda I)^-1 (y - G(v) + J v),

where Kt applies the covariance (dense Gram or its sparse-factor inverse pair)
and lambda is a small Tikhonov nugget for the inner system.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from dataclasses import dataclass, field
from scipy.interpolate import RegularGridInterpolator

from .errors import (DivergenceError, DomainError, IllConditionedConstraintsError,
                     InvalidParameterError)
from .fdops import (divergence_form_rows, first_derivative_rows, identity_rows,
                    neg_laplacian_rows)
from .geometry import CollocationSet
from .kernels import GramMatrix
from .reference import Trajectory, poisson_streamfunction
from .sparse_cholesky import SparseFactor, apply_covariance

GN_RESIDUAL_TOL = 1e-10
INNER_NUGGET_SCALE = 1e-8
INNER_NUGGET_FLOOR = 1e-30
# Residual growth below this relative slack is a stall (stop and keep the
# iterate): at the residual plateau the refactorized inner solve only
# reproduces the fixed point up to its conditioning, so successive residuals
# jitter.  Growth beyond the slack that damping cannot contain is divergence.
STALL_RTOL = 1e-3


@dataclass(frozen=True)
class ConstraintStencil:
    """A named sparse matrix mapping nodal values to linear functional values."""

    name: str
    matrix: sp.csr_matrix

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]


@dataclass
class GaussNewtonConfig:
    max_iters: int = 3
    damping: bool = True
    max_halvings: int = 8
    inner_nugget: float | None = None  # None: 1e-8 * trace(J Kt J^T) / rows
    residual_tol: float = GN_RESIDUAL_TOL


@dataclass
class RecoveryProblem:
    """Constraint stencils, nonlinearity, right-hand sides and solver settings.

    stencils holds 'interior' (linear operator rows) and 'identity' (Dirac rows
    feeding the nonlinearity); 'boundary' and 'nonlinear_out' are optional.
    rhs stacks interior targets then boundary targets.
    """

    gram: GramMatrix | SparseFactor
    stencils: dict
    tau: callable = None
    dtau: callable = None
    rhs: np.ndarray = None
    gn: GaussNewtonConfig = field(default_factory=GaussNewtonConfig)

    def __post_init__(self):
        rows = self.stencils["interior"].rows
        if "boundary" in self.stencils:
            rows += self.stencils["boundary"].rows
        if self.rhs is None or len(self.rhs) != rows:
            raise InvalidParameterError("rhs length must equal total constraint rows")
        if (self.tau is None) != (self.dtau is None):
            raise InvalidParameterError("tau and dtau must be provided together")

    @property
    def n_nodal(self) -> int:
        return self.stencils["interior"].matrix.shape[1]


def constraint_map(problem: RecoveryProblem, v: np.ndarray) -> np.ndarray:
    """Stacked constraint values G(v)."""
    a_lin = problem.stencils["interior"].matrix
    out = a_lin @ v
    if problem.tau is not None:
        tau_vals = problem.tau(problem.stencils["identity"].matrix @ v)
        a_out = problem.stencils.get("nonlinear_out")
        out = out + (a_out.matrix @ tau_vals if a_out is not None else tau_vals)
    if "boundary" in problem.stencils:
        out = np.concatenate([out, problem.stencils["boundary"].matrix @ v])
    return out


def constraint_jacobian(problem: RecoveryProblem, v: np.ndarray) -> sp.csr_matrix:
    """Jacobian of the stacked constraint map at v."""
    jac = problem.stencils["interior"].matrix
    if problem.tau is not None:
        a_id = problem.stencils["identity"].matrix
        chain = sp.diags(problem.dtau(a_id @ v)) @ a_id
        a_out = problem.stencils.get("nonlinear_out")
        jac = jac + (a_out.matrix @ chain if a_out is not None else chain)
    if "boundary" in problem.stencils:
        jac = sp.vstack([jac, problem.stencils["boundary"].matrix])
    return jac.tocsr()


def constraint_residual(problem: RecoveryProblem, v: np.ndarray) -> float:
    return float(np.linalg.norm(problem.rhs - constraint_map(problem, v)))


def _covariance_apply(gram, mat: np.ndarray) -> np.ndarray:
    """Apply the GN covariance operator.

    Finite-rank Grams (snapshot and truncated kernels carry a factor F with
    entries = F F^T) are applied rank-preservingly as F (F^T x), without the
    nugget: the nugget regularizes precision factorizations, and folding it
    into the covariance here would let the solve fit constraint components
    outside the kernel's range through the regularization instead of the
    kernel, destroying the representer structure.
    """
    if isinstance(gram, GramMatrix):
        if gram.factor is not None:
            return gram.factor @ (gram.factor.T @ mat)
        return gram.matvec(mat)
    return apply_covariance(gram, mat)


def gauss_newton_solve(problem: RecoveryProblem, initial_guess=None) -> np.ndarray:
    """Iterate the regularized Gauss-Newton update until the residual tolerance.

    Runs at most gn.max_iters iterations, stopping early once the constraint
    residual drops below gn.residual_tol.  If a full step increases the
    residual, the step is halved up to gn.max_halvings times; when even the
    best halved step grows the residual, growth within the stall window stops
    the iteration (residual floor reached) and growth beyond it raises
    DivergenceError carrying the iterate history.
    """
    cfg = problem.gn
    m = problem.n_nodal
    v = np.zeros(m) if initial_guess is None else np.asarray(initial_guess, float).copy()
    history = [v.copy()]
    res = constraint_residual(problem, v)
    # Finite-rank covariances confine iterates to the kernel's range.  The
    # first update may leave an off-range initial guess (e.g. a time-march
    # warm start), which can raise the residual; that step is accepted
    # unconditionally, damping applies from the second iteration on.
    entering_range = (isinstance(problem.gram, GramMatrix)
                      and problem.gram.factor is not None)
    for iteration in range(cfg.max_iters):
        if res <= cfg.residual_tol:
            break
        jac = constraint_jacobian(problem, v)
        bmat = _covariance_apply(problem.gram, jac.T.toarray())  # (m, rows)
        inner = jac @ bmat
        inner = np.asarray(inner)
        if cfg.inner_nugget is not None:
            lam = cfg.inner_nugget
        else:
            lam = max(INNER_NUGGET_SCALE * float(np.trace(inner)) / inner.shape[0],
                      INNER_NUGGET_FLOOR)
        inner[np.diag_indices_from(inner)] += lam
        target = problem.rhs - constraint_map(problem, v) + jac @ v
        try:
            alpha = sla.cho_solve(sla.cho_factor(inner, lower=True), target)
        except sla.LinAlgError as err:
            raise IllConditionedConstraintsError(
                f"inner Gauss-Newton system failed to factorize: {err}") from err
        # apply the covariance to the vector J^T alpha (not B @ alpha): for
        # factored Grams this lands exactly in the kernel's column span
        v_full = _covariance_apply(problem.gram, jac.T @ alpha)
        if iteration == 0 and entering_range:
            res_new = constraint_residual(problem, v_full)
            if not np.isfinite(res_new):
                raise DivergenceError("non-finite residual on the range-entering step",
                                      iterates=history)
            v, res = v_full, res_new
            history.append(v.copy())
            continue
        step = 1.0
        accepted = False
        best = np.inf
        for _ in range(cfg.max_halvings + 1):
            v_new = v + step * (v_full - v)
            res_new = constraint_residual(problem, v_new)
            best = min(best, res_new) if np.isfinite(res_new) else best
            if (not cfg.damping) or res_new <= res * (1.0 + 1e-12):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if best <= res * (1.0 + STALL_RTOL):
                break  # stalled at the residual floor; keep the current iterate
            raise DivergenceError(
                f"residual grew from {res:.3e} to {best:.3e} despite "
                f"{cfg.max_halvings} halvings", iterates=history)
        v, res = v_new, res_new
        history.append(v.copy())
    return v


# -- constraint assembly --------------------------------------------------------

def cubic_nonlinearity():
    """tau(u) = u^3 and its derivative (semilinear elliptic / Darcy reaction)."""
    return (lambda u: u ** 3), (lambda u: 3.0 * u ** 2)


def assemble_constraints(problem_kind: str, grid: CollocationSet, coefficients=None,
                         bc_values=None, forcing=None, include_boundary: bool = True):
    """Stencils and right-hand side for the stationary problems.

    Interior rows encode the linear operator part (-Lap for the semilinear
    problem, -div(k grad .) for Darcy); boundary rows are Dirac rows with the
    Dirichlet data.  The cubic reaction term is handled separately through the
    problem's nonlinearity.
    """
    m = grid.n_points
    interior = grid.interior_indices
    boundary = grid.boundary_indices
    if problem_kind == "semilinear_elliptic":
        a_lin = neg_laplacian_rows(grid, interior)
    elif problem_kind == "darcy":
        if coefficients is None:
            raise InvalidParameterError("darcy constraints require a coefficient field")
        a_lin = divergence_form_rows(grid, np.asarray(coefficients, float), interior)
    else:
        raise InvalidParameterError(f"unknown stationary problem kind {problem_kind!r}")
    stencils = {
        "interior": ConstraintStencil("interior-operator", a_lin),
        "identity": ConstraintStencil("identity", identity_rows(m, interior)),
    }
    forcing = np.asarray(forcing, dtype=float)
    rhs = forcing[interior] if forcing.shape == (m,) else forcing
    if include_boundary and len(boundary):
        stencils["boundary"] = ConstraintStencil("boundary", identity_rows(m, boundary))
        if bc_values is None or np.isscalar(bc_values):
            g = np.full(len(boundary), 0.0 if bc_values is None else float(bc_values))
        else:
            g = np.asarray(bc_values, dtype=float)[boundary]
        rhs = np.concatenate([rhs, g])
    return stencils, rhs


def assemble_cn_constraints(problem_kind: str, grid: CollocationSet, u_prev: np.ndarray,
                            dt: float, params: dict, include_boundary: bool = True):
    """One Crank-Nicolson step as a stationary constraint set in the new field.

    Both the operator and the nonlinearity are averaged across the step; the
    previous field's half lands in the right-hand side.  Returns
    (stencils, rhs, tau, dtau).
    """
    m = grid.n_points
    if problem_kind in ("burgers", "heat"):
        interior = grid.interior_indices
        nu = params["nu"]
        eye_int = identity_rows(m, interior)
        neg_d2 = neg_laplacian_rows(grid, interior)
        a_lin = (eye_int / dt + 0.5 * nu * neg_d2).tocsr()
        rhs = u_prev[interior] / dt - 0.5 * nu * (neg_d2 @ u_prev)
        stencils = {
            "interior": ConstraintStencil("interior-operator", a_lin),
            "identity": ConstraintStencil("identity", identity_rows(m, np.arange(m))),
        }
        tau = dtau = None
        if problem_kind == "burgers":
            d1 = first_derivative_rows(grid, 0, interior)
            stencils["nonlinear_out"] = ConstraintStencil("advection-divergence", d1)
            tau = lambda u: 0.25 * u ** 2          # noqa: E731
            dtau = lambda u: 0.5 * u               # noqa: E731
            rhs = rhs - d1 @ (0.25 * u_prev ** 2)
    elif problem_kind == "allen_cahn":
        interior = grid.interior_indices
        eps2 = params["epsilon"] ** 2
        eye_int = identity_rows(m, interior)
        neg_lap = neg_laplacian_rows(grid, interior)
        a_lin = (eye_int / dt + 0.5 * eps2 * neg_lap).tocsr()
        up_i = u_prev[interior]
        rhs = (up_i / dt - 0.5 * eps2 * (neg_lap @ u_prev)
               - 0.5 * (up_i ** 3 - up_i))
        stencils = {
            "interior": ConstraintStencil("interior-operator", a_lin),
            "identity": ConstraintStencil("identity", eye_int),
        }
        tau = lambda u: 0.5 * (u ** 3 - u)         # noqa: E731
        dtau = lambda u: 0.5 * (3.0 * u ** 2 - 1.0)  # noqa: E731
    elif problem_kind == "navier_stokes":
        nu = params["nu"]
        all_rows = np.arange(m)
        _, (ux, uy) = poisson_streamfunction(u_prev, grid)
        d_x = first_derivative_rows(grid, 0, all_rows)
        d_y = first_derivative_rows(grid, 1, all_rows)
        neg_lap = neg_laplacian_rows(grid, all_rows)
        advect = (sp.diags(ux) @ d_x + sp.diags(uy) @ d_y).tocsr()
        a_lin = (identity_rows(m, all_rows) / dt + 0.5 * advect
                 + 0.5 * nu * neg_lap).tocsr()
        rhs = (u_prev / dt - 0.5 * (advect @ u_prev)
               - 0.5 * nu * (neg_lap @ u_prev))
        stencils = {
            "interior": ConstraintStencil("interior-operator", a_lin),
            "identity": ConstraintStencil("identity", identity_rows(m, all_rows)),
        }
        tau = dtau = None
    else:
        raise InvalidParameterError(f"unknown time-dependent problem kind {problem_kind!r}")

    boundary = grid.boundary_indices
    if include_boundary and len(boundary):
        stencils["boundary"] = ConstraintStencil("boundary", identity_rows(m, boundary))
        bc = params.get("bc", 0.0)
        g = (np.full(len(boundary), float(bc)) if np.isscalar(bc)
             else np.asarray(bc, float)[boundary])
        rhs = np.concatenate([rhs, g])
    return stencils, rhs, tau, dtau


def crank_nicolson_march(problem_kind: str, gram, grid: CollocationSet, u0,
                         dt: float, t_final: float, gn: GaussNewtonConfig | None = None,
                         params: dict | None = None,
                         include_boundary: bool = True) -> Trajectory:
    """March the recovery problem in time with Crank-Nicolson steps.

    Each step builds the stationary nonlinear constraint in the next field and
    solves it by Gauss-Newton warm-started from the current field.  For the
    vorticity equation the advection velocity is reconstructed from the
    current field (semi-implicit step with lagged velocity).  dt must divide
    t_final; a diverging step aborts the march, attaching the partial
    trajectory to the raised error.
    """
    params = params or {}
    gn = gn or GaussNewtonConfig(max_iters=2)
    n_steps = int(round(t_final / dt))
    if n_steps < 1 or abs(n_steps * dt - t_final) > 1e-12 * max(1.0, abs(t_final)):
        raise InvalidParameterError(f"dt={dt} must divide t_final={t_final}")
    u = np.asarray(u0, dtype=float).copy()
    if u.shape != (grid.n_points,):
        raise InvalidParameterError("u0 must match the grid size")
    times = [0.0]
    fields = [u.copy()]
    last_residual = 0.0
    for step in range(1, n_steps + 1):
        stencils, rhs, tau, dtau = assemble_cn_constraints(
            problem_kind, grid, u, dt, params, include_boundary=include_boundary)
        problem = RecoveryProblem(gram=gram, stencils=stencils, tau=tau, dtau=dtau,
                                  rhs=rhs, gn=gn)
        try:
            u = gauss_newton_solve(problem, initial_guess=u)
        except DivergenceError as err:
            err.trajectory = Trajectory(np.array(times), np.array(fields),
                                        meta={"aborted_at_step": step})
            raise
        last_residual = constraint_residual(problem, u)
        times.append(step * dt)
        fields.append(u.copy())
    return Trajectory(np.array(times), np.array(fields),
                      meta={"dt_effective": dt, "final_gn_residual": last_residual})


def evaluate_solution(v: np.ndarray, grid: CollocationSet, query) -> np.ndarray:
    """Interpolate nodal values to query points (bilinear on the tensor grid)."""
    query = np.atleast_2d(np.asarray(query, dtype=float))
    if query.shape[1] != grid.dim:
        raise InvalidParameterError(f"query points must have dimension {grid.dim}")
    axes = grid.axes()
    values = np.asarray(v, dtype=float).reshape(grid.shape)
    if grid.periodic:
        lo = grid.domain_bounds[:, 0]
        hi = grid.domain_bounds[:, 1]
        if np.any(query < lo) or np.any(query > hi):
            raise DomainError("query point outside domain bounds")
        query = lo + np.mod(query - lo, hi - lo)
        axes = [np.append(ax, grid.domain_bounds[a, 1]) for a, ax in enumerate(axes)]
        for a in range(grid.dim):
            values = np.concatenate([values, values.take([0], axis=a)], axis=a)
    interp = RegularGridInterpolator(axes, values, method="linear", bounds_error=True)
    try:
        return interp(query)
    except ValueError as err:
        raise DomainError(f"query point outside domain bounds: {err}") from err
