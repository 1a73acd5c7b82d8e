"""Classical reference solvers for the five benchmark PDEs.

These generate snapshot libraries and ground-truth fields: Newton on 5-point
finite differences for the stationary problems, a conservative MUSCL/minmod
finite-volume scheme for viscous Burgers, forward-time central-space stepping
for Allen-Cahn, and a forward-Euler vorticity-streamfunction march for 2D
incompressible flow on periodic grids.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (BlowUpError, InvalidParameterError, NonconvergenceError)
from .fdops import divergence_form_rows, neg_laplacian_rows
from .geometry import CollocationSet


@dataclass(frozen=True)
class PDEInstance:
    """One benchmark problem: kind tag, collocation grid, physical parameters."""

    kind: str
    grid: CollocationSet
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("nu", "epsilon"):
            value = self.params.get(name)
            if value is not None and value <= 0:
                raise InvalidParameterError(f"{name} must be positive, got {value}")


@dataclass
class Trajectory:
    """Time-ordered nodal fields: times strictly increasing, one row per time."""

    times: np.ndarray
    fields: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.fields = np.asarray(self.fields, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise InvalidParameterError("trajectory times must be strictly increasing")
        if self.fields.shape[0] != self.times.shape[0]:
            raise InvalidParameterError("one field row per time required")

    @property
    def final(self) -> np.ndarray:
        return self.fields[-1]


# -- stationary problems ------------------------------------------------------

def _newton_stationary(operator_rows: sp.csr_matrix, f, g, grid: CollocationSet,
                       tol: float, max_iters: int) -> np.ndarray:
    """Newton iteration for A u + u^3 = f (interior rows) with Dirichlet data g."""
    interior = grid.interior_indices
    boundary = grid.boundary_indices
    f = np.asarray(f, dtype=float)
    m = grid.n_points
    u = np.zeros(m)
    if np.isscalar(g):
        u[boundary] = g
    else:
        u[boundary] = np.asarray(g, dtype=float)[boundary]
    a_ii = operator_rows[:, interior].tocsc()
    lifted = operator_rows[:, boundary] @ u[boundary]
    u_int = u[interior].copy()
    f_int = f[interior]
    for _ in range(max_iters):
        residual = a_ii @ u_int + u_int ** 3 + lifted - f_int
        if np.linalg.norm(residual, np.inf) <= tol:
            u[interior] = u_int
            return u
        jac = a_ii + sp.diags(3.0 * u_int ** 2)
        u_int = u_int - spla.spsolve(jac.tocsc(), residual)
    raise NonconvergenceError(
        f"Newton stagnated after {max_iters} iterations "
        f"(residual {np.linalg.norm(residual, np.inf):.3e} > {tol:.1e})")


def solve_semilinear_elliptic(f, g, grid: CollocationSet, tol: float = 1e-10,
                              max_iters: int = 50) -> np.ndarray:
    """Solve -Lap(u) + u^3 = f with Dirichlet data g on a tensor grid."""
    rows = neg_laplacian_rows(grid, grid.interior_indices)
    return _newton_stationary(rows, f, g, grid, tol, max_iters)


def solve_darcy(k, f, g, grid: CollocationSet, tol: float = 1e-10,
                max_iters: int = 50) -> np.ndarray:
    """Solve -div(k grad u) + u^3 = f with Dirichlet g; harmonic-mean faces."""
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0):
        raise InvalidParameterError("coefficient field k must be positive everywhere")
    rows = divergence_form_rows(grid, k, grid.interior_indices)
    return _newton_stationary(rows, f, g, grid, tol, max_iters)


def stationary_residual(kind: str, u, f, grid: CollocationSet, k=None) -> float:
    """Max-norm interior residual of a candidate field (self-consistency check)."""
    interior = grid.interior_indices
    if kind == "darcy":
        rows = divergence_form_rows(grid, np.asarray(k, dtype=float), interior)
    else:
        rows = neg_laplacian_rows(grid, interior)
    r = rows @ u + u[interior] ** 3 - np.asarray(f, dtype=float)[interior]
    return float(np.linalg.norm(r, np.inf))


# -- viscous Burgers (finite volume) ------------------------------------------

BURGERS_DOMAIN = (-1.0, 1.0)


def burgers_cell_centers(cells: int) -> np.ndarray:
    lo, hi = BURGERS_DOMAIN
    h = (hi - lo) / cells
    return lo + h * (np.arange(cells) + 0.5)


def _minmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.where((a > 0) & (b > 0), np.minimum(a, b), 0.0)
    return np.where((a < 0) & (b < 0), np.maximum(a, b), out)


def _burgers_rhs(u: np.ndarray, nu: float, h: float):
    """MUSCL/minmod + local Lax-Friedrichs flux for u^2/2, explicit diffusion.

    Dirichlet-0 walls via odd-reflected ghost cells.  Returns (du/dt, rate of
    change of the cell sum times h coming from boundary fluxes only).
    """
    ext = np.concatenate(([-u[1], -u[0]], u, [-u[-1], -u[-2]]))
    slope = _minmod(ext[1:-1] - ext[:-2], ext[2:] - ext[1:-1])  # cells -1..n
    # interface states between extended cells i and i+1 for i = 0..n (walls included)
    left = ext[1:-2] + 0.5 * slope[:-1]
    right = ext[2:-1] - 0.5 * slope[1:]
    a = np.maximum(np.abs(left), np.abs(right))
    flux = 0.25 * (left ** 2 + right ** 2) - 0.5 * a * (right - left)
    diff = nu * (ext[3:-1] - 2.0 * ext[2:-2] + ext[1:-3]) / (h * h)
    dudt = -(flux[1:] - flux[:-1]) / h + diff
    boundary_rate = (-(flux[-1] - flux[0])
                     + nu * ((ext[-2] - ext[-3]) - (ext[2] - ext[1])) / h)
    return dudt, boundary_rate


def solve_burgers(u0, nu: float, cells: int, dt: float, t_final: float,
                  save_times=None) -> Trajectory:
    """Viscous Burgers on [-1, 1] with Dirichlet-0 walls, SSP-RK2 in time.

    The requested dt is reduced automatically to meet the advective CFL bound
    0.5 h / max|u| and the explicit-diffusion bound; NaN values abort with a
    blow-up error.  Cell-sum "mass" changes only through boundary fluxes,
    accumulated in meta["boundary_flux_integral"].
    """
    if nu <= 0:
        raise InvalidParameterError(f"nu must be positive, got {nu}")
    h = (BURGERS_DOMAIN[1] - BURGERS_DOMAIN[0]) / cells
    centers = burgers_cell_centers(cells)
    u = np.asarray(u0(centers) if callable(u0) else u0, dtype=float).copy()
    if u.shape != (cells,):
        raise InvalidParameterError(f"u0 must have one value per cell ({cells})")
    if save_times is None:
        n_save = int(round(t_final / dt))
        save_times = dt * np.arange(1, n_save + 1)

    def stable_dt(state):
        umax = max(np.max(np.abs(state)), 1e-12)
        return min(0.5 * h / umax, 0.4 * h * h / (2.0 * nu))

    if dt > stable_dt(u):
        warnings.warn(f"burgers dt {dt:g} reduced to meet stability bounds")

    times = [0.0]
    fields = [u.copy()]
    flux_integral = 0.0
    max_sub = 0.0
    t = 0.0
    for t_next in np.atleast_1d(save_times):
        if t_next <= t + 1e-14:
            continue
        span = t_next - t
        n_sub = max(1, int(np.ceil(span / min(dt, stable_dt(u)) - 1e-12)))
        dt_sub = span / n_sub
        max_sub = max(max_sub, dt_sub)
        for _ in range(n_sub):
            r1, b1 = _burgers_rhs(u, nu, h)
            u1 = u + dt_sub * r1
            r2, b2 = _burgers_rhs(u1, nu, h)
            u = 0.5 * (u + u1 + dt_sub * r2)
            flux_integral += 0.5 * dt_sub * (b1 + b2)
        if not np.all(np.isfinite(u)):
            raise BlowUpError(f"burgers blow-up at t={t_next:g}", time=t_next)
        t = t_next
        times.append(t)
        fields.append(u.copy())
    return Trajectory(np.array(times), np.array(fields),
                      meta={"dt_effective": max_sub, "h": h,
                            "boundary_flux_integral": flux_integral})


# -- Allen-Cahn (FTCS) --------------------------------------------------------

def solve_allen_cahn(u0, epsilon: float, grid: CollocationSet, dt: float,
                     t_final: float, save_times=None) -> Trajectory:
    """Explicit stepping of u_t = eps^2 Lap(u) - (u^3 - u), homogeneous Dirichlet.

    dt is reduced (with a warning) to the diffusion bound h^2 / (4 eps^2).
    """
    if epsilon <= 0:
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
    u = np.asarray(u0, dtype=float).copy()
    interior = grid.interior_indices
    boundary = grid.boundary_indices
    u[boundary] = 0.0
    lap_rows = neg_laplacian_rows(grid, interior)
    h_min = float(np.min(grid.spacing()))
    dt_stable = h_min * h_min / (4.0 * epsilon * epsilon)
    if dt > dt_stable:
        warnings.warn(f"allen-cahn dt {dt:g} reduced to stability bound {dt_stable:g}")
    if save_times is None:
        n_save = int(round(t_final / dt))
        save_times = dt * np.arange(1, n_save + 1)

    times = [0.0]
    fields = [u.copy()]
    max_sub = 0.0
    t = 0.0
    for t_next in np.atleast_1d(save_times):
        if t_next <= t + 1e-14:
            continue
        span = t_next - t
        n_sub = max(1, int(np.ceil(span / min(dt, dt_stable) - 1e-12)))
        dt_sub = span / n_sub
        max_sub = max(max_sub, dt_sub)
        for _ in range(n_sub):
            ui = u[interior]
            u[interior] = ui + dt_sub * (-epsilon * epsilon * (lap_rows @ u)
                                         - (ui ** 3 - ui))
        if not np.all(np.isfinite(u)):
            raise BlowUpError(f"allen-cahn blow-up at t={t_next:g}", time=t_next)
        t = t_next
        times.append(t)
        fields.append(u.copy())
    return Trajectory(np.array(times), np.array(fields),
                      meta={"dt_effective": max_sub})


# -- 2D incompressible flow (vorticity-streamfunction) -------------------------

def _require_periodic_square(grid: CollocationSet):
    if not grid.periodic:
        raise InvalidParameterError("a periodic grid is required")
    if len(grid.shape) != 2 or grid.shape[0] != grid.shape[1]:
        raise InvalidParameterError(f"a square periodic grid is required, got {grid.shape}")


def _roll_dx(f2: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(f2, -1, axis=0) - np.roll(f2, 1, axis=0)) / (2.0 * h)


def _roll_dy(f2: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(f2, -1, axis=1) - np.roll(f2, 1, axis=1)) / (2.0 * h)


def _roll_lap(f2: np.ndarray, hx: float, hy: float) -> np.ndarray:
    return ((np.roll(f2, -1, axis=0) - 2.0 * f2 + np.roll(f2, 1, axis=0)) / (hx * hx)
            + (np.roll(f2, -1, axis=1) - 2.0 * f2 + np.roll(f2, 1, axis=1)) / (hy * hy))


def poisson_streamfunction(omega, grid: CollocationSet):
    """Exact discrete periodic Poisson solve -Lap(psi) = omega, plus velocity.

    Works in the trigonometric eigenbasis of the 5-point periodic Laplacian;
    psi is zero-mean and velocity = (d_y psi, -d_x psi) by central differences,
    which is discretely divergence-free.
    """
    _require_periodic_square(grid)
    n1, n2 = grid.shape
    hx, hy = grid.spacing()
    w = np.asarray(omega, dtype=float).reshape(n1, n2)
    mean = float(w.mean())
    if abs(mean) > 1e-12:
        warnings.warn(f"nonzero-mean vorticity ({mean:.3e}) projected out")
        w = w - mean
    what = np.fft.fft2(w)
    k1 = np.fft.fftfreq(n1, d=1.0 / n1)
    k2 = np.fft.fftfreq(n2, d=1.0 / n2)
    lam1 = (2.0 - 2.0 * np.cos(2.0 * np.pi * k1 / n1)) / (hx * hx)
    lam2 = (2.0 - 2.0 * np.cos(2.0 * np.pi * k2 / n2)) / (hy * hy)
    lam = lam1[:, None] + lam2[None, :]
    lam[0, 0] = 1.0  # mode (0,0) is zeroed below
    psihat = what / lam
    psihat[0, 0] = 0.0
    psi = np.real(np.fft.ifft2(psihat))
    ux = _roll_dy(psi, hy)
    uy = -_roll_dx(psi, hx)
    return psi.ravel(), (ux.ravel(), uy.ravel())


def discrete_laplacian_eigenvalue(grid: CollocationSet, mode: int, axis: int = 0) -> float:
    """Eigenvalue of the 5-point periodic -Laplacian for a single axis mode."""
    n = grid.shape[axis]
    h = grid.spacing()[axis]
    return float((2.0 - 2.0 * np.cos(2.0 * np.pi * mode / n)) / (h * h))


def solve_ns_vorticity(omega0, nu: float, grid: CollocationSet, dt: float,
                       t_final: float, save_times=None) -> Trajectory:
    """Forward-Euler vorticity march: w_t = -u.grad(w) + nu Lap(w), periodic.

    The velocity is reconstructed from the streamfunction each step.  dt is
    auto-reduced to CFL; NaNs abort with a blow-up error.  The discrete mean
    vorticity is conserved exactly by the scheme.
    """
    if nu <= 0:
        raise InvalidParameterError(f"nu must be positive, got {nu}")
    _require_periodic_square(grid)
    n1, n2 = grid.shape
    hx, hy = grid.spacing()
    w = np.asarray(omega0, dtype=float).reshape(n1, n2).copy()
    mean = float(w.mean())
    if abs(mean) > 1e-12:
        warnings.warn(f"nonzero-mean initial vorticity ({mean:.3e}) projected out")
        w = w - mean
    if save_times is None:
        n_save = int(round(t_final / dt))
        save_times = dt * np.arange(1, n_save + 1)

    def stable_dt(w2):
        _, (ux, uy) = poisson_streamfunction(w2.ravel(), grid)
        umax = max(np.max(np.abs(ux)), np.max(np.abs(uy)), 1e-12)
        return 0.5 * min(hx / umax, hx * hx / (4.0 * nu))

    if dt > stable_dt(w):
        warnings.warn(f"navier-stokes dt {dt:g} reduced to meet CFL")

    times = [0.0]
    fields = [w.ravel().copy()]
    max_sub = 0.0
    t = 0.0
    for t_next in np.atleast_1d(save_times):
        if t_next <= t + 1e-14:
            continue
        span = t_next - t
        n_sub = max(1, int(np.ceil(span / min(dt, stable_dt(w)) - 1e-12)))
        dt_sub = span / n_sub
        max_sub = max(max_sub, dt_sub)
        for _ in range(n_sub):
            _, (ux, uy) = poisson_streamfunction(w.ravel(), grid)
            ux2 = ux.reshape(n1, n2)
            uy2 = uy.reshape(n1, n2)
            adv = ux2 * _roll_dx(w, hx) + uy2 * _roll_dy(w, hy)
            w = w + dt_sub * (-adv + nu * _roll_lap(w, hx, hy))
        if not np.all(np.isfinite(w)):
            raise BlowUpError(f"navier-stokes blow-up at t={t_next:g}", time=t_next)
        t = t_next
        times.append(t)
        fields.append(w.ravel().copy())
    return Trajectory(np.array(times), np.array(fields),
                      meta={"dt_effective": max_sub})
