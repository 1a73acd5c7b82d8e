"""Benchmark harness: five PDE experiments, parameter sweeps, CSV reports.

Each run builds (or loads) a snapshot library, assembles the chosen kernel's
Gram matrix, orders the grid, factorizes the precision matrix, solves the
recovery problem (or marches it in time), and reports errors against a
classical reference: same-grid solves for the stationary problems, refined
solves restricted to the coarse grid for the time-dependent ones.
"""

from __future__ import annotations

import configparser
import os
import time
import warnings
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError, InvalidParameterError, KernelRomError
from .geometry import (CollocationSet, fill_distance, make_grid, make_periodic_grid,
                       maximin_order, sparsity_pattern)
from .kernels import (EmpiricalKernel, GramMatrix, MaternKernel, assemble_gram,
                      pod_truncate)
from .recovery import (GaussNewtonConfig, RecoveryProblem, assemble_constraints,
                       constraint_residual, crank_nicolson_march, cubic_nonlinearity,
                       gauss_newton_solve)
from .reference import (PDEInstance, burgers_cell_centers, solve_allen_cahn,
                        solve_burgers, solve_darcy, solve_ns_vorticity,
                        solve_semilinear_elliptic)
from .sampling import SamplerSpec, sample_bandlimited_fourier
from .snapshots import SnapshotLibrary, build_library, greedy_select, load_library, shift_augment
from .sparse_cholesky import frobenius_gap, kl_divergence, kl_sparse_factor

PDE_KINDS = ("semilinear_elliptic", "darcy", "burgers", "allen_cahn", "navier_stokes")

REPORT_COLUMNS = ("pde", "kernel", "M", "N", "rho", "status", "rel_l2", "linf",
                  "wall_ms", "gn_residual", "effective_dt", "nugget",
                  "fill_distance", "span_residual", "frobenius_gap")

# Benchmark defaults per problem kind (desk scale).
_DEFAULTS = {
    "semilinear_elliptic": dict(grid=32, theta=0.3, rho=4.0, n_snapshots=60,
                                gn_iters=3, sampler_sigma=0.15),
    "darcy": dict(grid=32, theta=0.3, rho=4.0, n_snapshots=40,
                  gn_iters=2, sampler_sigma=0.2),
    "burgers": dict(grid=512, theta=0.05, rho=5.0, n_snapshots=8,
                    gn_iters=2, dt=0.04, t_final=1.0, nu=0.001),
    "allen_cahn": dict(grid=20, theta=0.1, rho=5.0, n_snapshots=10,
                       gn_iters=2, dt=0.05, t_final=0.5, epsilon=0.01),
    "navier_stokes": dict(grid=24, theta=0.3, rho=5.0, n_snapshots=8,
                          gn_iters=2, dt=0.01, t_final=0.2, nu=1e-3),
}

BURGERS_SHIFTS = np.round(np.linspace(-0.8, 0.8, 9), 10)


@dataclass
class ExperimentConfig:
    """One benchmark run; None fields fall back to the per-PDE defaults."""

    pde: str = "semilinear_elliptic"
    grid: int = None  # type: ignore[assignment]
    kernel: str = "empirical"
    theta: float = None  # type: ignore[assignment]
    rank: int = None  # type: ignore[assignment]
    rho: float = None  # type: ignore[assignment]
    n_snapshots: int = None  # type: ignore[assignment]
    dt: float = None  # type: ignore[assignment]
    t_final: float = None  # type: ignore[assignment]
    slice_dt: float = None  # type: ignore[assignment]
    seed: int = 0
    nugget: float = None  # type: ignore[assignment]
    factorization: str = "sparse"
    gn_iters: int = None  # type: ignore[assignment]
    inner_nugget: float = None  # type: ignore[assignment]
    include_boundary_rows: bool = True
    augment: bool = True  # shift-augment 1D libraries
    diagnostics: bool = False
    greedy_m: int = None  # type: ignore[assignment]
    library_path: str = None  # type: ignore[assignment]
    maximin_seed: int = None  # type: ignore[assignment]
    ref_refine_space: int = 4
    ref_refine_time: int = 10
    ref_cells: int = None  # type: ignore[assignment]
    out_dir: str = None  # type: ignore[assignment]
    emit_fields: bool = False

    def resolved(self) -> "ExperimentConfig":
        if self.pde not in PDE_KINDS:
            raise ConfigError(f"unknown pde {self.pde!r}; choose from {PDE_KINDS}")
        if self.kernel not in ("empirical", "matern", "truncated"):
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if self.factorization not in ("sparse", "dense"):
            raise ConfigError(f"unknown factorization {self.factorization!r}")
        d = _DEFAULTS[self.pde]
        out = replace(self)
        for name in ("grid", "theta", "rho", "n_snapshots", "gn_iters", "dt", "t_final"):
            if getattr(out, name) is None and name in d:
                setattr(out, name, d[name])
        if out.slice_dt is None:
            out.slice_dt = out.dt
        if out.rho is not None and out.rho <= 0:
            raise ConfigError(f"rho must be positive, got {out.rho}")
        return out


@dataclass
class ErrorReport:
    """Schema-stable rows for CSV output (one row per run)."""

    rows: list = field(default_factory=list)

    def add(self, **kwargs) -> dict:
        row = {c: "" for c in REPORT_COLUMNS}
        row.update(kwargs)
        self.rows.append(row)
        return row

    def extend(self, other: "ErrorReport") -> None:
        self.rows.extend(other.rows)

    def to_csv(self) -> str:
        lines = [",".join(REPORT_COLUMNS)]
        for row in self.rows:
            lines.append(",".join(_csv_cell(row[c]) for c in REPORT_COLUMNS))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_csv())


def _csv_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))  # shortest round-trip decimal
    return str(value)


def relative_l2_error(u, ref) -> float:
    """|u - ref|_2 / |ref|_2 over nodal values; |u|_2 (with a warning) if ref = 0."""
    u = np.asarray(u, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if u.shape != ref.shape:
        raise InvalidParameterError(f"shape mismatch {u.shape} vs {ref.shape}")
    denom = np.linalg.norm(ref)
    if denom == 0.0:
        warnings.warn("reference field is identically zero; returning |u|_2")
        return float(np.linalg.norm(u))
    return float(np.linalg.norm(u - ref) / denom)


def energy_spectrum(omega, grid: CollocationSet) -> np.ndarray:
    """Velocity energy per integer wavenumber shell from a periodic vorticity field.

    E(k) = 1/2 sum over k - 1/2 < |kappa| <= k + 1/2 of |what(kappa)|^2 / |kappa|^2,
    with the DFT normalized by the number of grid points and kappa = 0 excluded.
    Returns an array of (k, E) pairs for k = 1 .. max shell.
    """
    if not grid.periodic or len(grid.shape) != 2 or grid.shape[0] != grid.shape[1]:
        raise InvalidParameterError("a square periodic grid is required")
    n = grid.shape[0]
    w = np.asarray(omega, dtype=float).reshape(n, n)
    what = np.fft.fft2(w) / w.size
    k1 = np.fft.fftfreq(n, d=1.0 / n)
    kmag = np.hypot(k1[:, None], k1[None, :])
    power = np.abs(what) ** 2
    mask = kmag > 0
    shells = np.rint(kmag[mask]).astype(int)
    contrib = 0.5 * power[mask] / kmag[mask] ** 2
    k_max = int(shells.max()) if shells.size else 0
    energy = np.zeros(k_max + 1)
    np.add.at(energy, shells, contrib)
    ks = np.arange(1, k_max + 1)
    return np.column_stack([ks.astype(float), energy[1:]])


# -- test problems --------------------------------------------------------------

def manufactured_elliptic(grid: CollocationSet):
    """Closed-form target u* and matching forcing for -Lap(u) + u^3 = f, g = 0."""
    x, y = grid.points[:, 0], grid.points[:, 1]
    s1 = np.sin(np.pi * x) * np.sin(np.pi * y)
    s2 = np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)
    ustar = 0.5 * s1 + s2
    f = np.pi ** 2 * (s1 + 8.0 * s2) + ustar ** 3
    return ustar, f


def checkerboard_coefficient(grid: CollocationSet) -> np.ndarray:
    """Discontinuous permeability taking values 1 and 100 on an 8x8 checkerboard."""
    x, y = grid.points[:, 0], grid.points[:, 1]
    parity = (np.floor(8.0 * x) + np.floor(8.0 * y)).astype(int) % 2
    sign = np.where(parity == 0, 1.0, -1.0)
    return 101.0 / 2.0 - 99.0 / 2.0 * sign


def _ns_test_ic(cfg: ExperimentConfig, grid: CollocationSet) -> np.ndarray:
    # held-out initial condition: same family as the library, disjoint stream
    return sample_bandlimited_fourier(np.random.SeedSequence([cfg.seed, 9999]), grid)


def build_experiment_grid(cfg: ExperimentConfig) -> CollocationSet:
    if cfg.pde == "burgers":
        return make_grid([[-1.0, 1.0]], cfg.grid)
    if cfg.pde == "allen_cahn":
        return make_grid([[0.0, 2 * np.pi]] * 2, cfg.grid)
    if cfg.pde == "navier_stokes":
        return make_periodic_grid([[0.0, 2 * np.pi]] * 2, cfg.grid)
    return make_grid([[0.0, 1.0]] * 2, cfg.grid)


def _pde_instance(cfg: ExperimentConfig, grid: CollocationSet) -> PDEInstance:
    if cfg.pde == "semilinear_elliptic":
        return PDEInstance("semilinear_elliptic", grid, {"bc": 0.0})
    if cfg.pde == "darcy":
        return PDEInstance("darcy", grid, {"bc": 0.0,
                                           "coeff": checkerboard_coefficient(grid)})
    if cfg.pde == "burgers":
        return PDEInstance("burgers", grid,
                           {"nu": _DEFAULTS["burgers"]["nu"], "bc": 0.0,
                            "t_final": cfg.t_final, "slice_dt": cfg.slice_dt})
    if cfg.pde == "allen_cahn":
        return PDEInstance("allen_cahn", grid,
                           {"epsilon": _DEFAULTS["allen_cahn"]["epsilon"], "bc": 0.0,
                            "t_final": cfg.t_final, "slice_dt": cfg.slice_dt,
                            "dt": cfg.dt / cfg.ref_refine_time})
    if cfg.pde == "navier_stokes":
        return PDEInstance("navier_stokes", grid,
                           {"nu": _DEFAULTS["navier_stokes"]["nu"],
                            "t_final": cfg.t_final, "slice_dt": cfg.slice_dt,
                            "dt": cfg.dt / cfg.ref_refine_time})
    raise ConfigError(f"unknown pde {cfg.pde!r}")


def _sampler_spec(cfg: ExperimentConfig) -> SamplerSpec:
    if cfg.pde in ("semilinear_elliptic", "darcy"):
        return SamplerSpec("gp_gaussian", {"sigma": _DEFAULTS[cfg.pde]["sampler_sigma"]},
                           seed=cfg.seed)
    if cfg.pde == "burgers":
        return SamplerSpec("trig_random", {"n_terms": 10}, seed=cfg.seed)
    if cfg.pde == "allen_cahn":
        return SamplerSpec("trig_random", {"modes": 5}, seed=cfg.seed)
    return SamplerSpec("bandlimited_fourier", {"kmax": 8}, seed=cfg.seed)


def _reference_solution(cfg: ExperimentConfig, grid: CollocationSet, instance: PDEInstance):
    """Classical solve used for error computation (same grid, or refined/restricted)."""
    if cfg.pde == "semilinear_elliptic":
        _, f = manufactured_elliptic(grid)
        return solve_semilinear_elliptic(f, 0.0, grid)
    if cfg.pde == "darcy":
        return solve_darcy(instance.params["coeff"], np.ones(grid.n_points), 0.0, grid)
    if cfg.pde == "burgers":
        cells = cfg.ref_cells or cfg.ref_refine_space * (grid.n_points - 1)
        traj = solve_burgers(lambda x: -np.sin(np.pi * x), instance.params["nu"], cells,
                             cfg.dt / cfg.ref_refine_time, cfg.t_final,
                             save_times=[cfg.t_final])
        centers = burgers_cell_centers(cells)
        ref = np.interp(grid.points[:, 0], centers, traj.final)
        ref[0] = 0.0
        ref[-1] = 0.0
        return ref
    if cfg.pde == "allen_cahn":
        r = cfg.ref_refine_space
        fine = make_grid(grid.domain_bounds, [r * (n - 1) + 1 for n in grid.shape])
        xf, yf = fine.points[:, 0], fine.points[:, 1]
        u0 = 0.25 * np.sin(3 * xf) * np.sin(3 * yf)
        traj = solve_allen_cahn(u0, instance.params["epsilon"], fine,
                                cfg.dt / cfg.ref_refine_time, cfg.t_final,
                                save_times=[cfg.t_final])
        return traj.final.reshape(fine.shape)[::r, ::r].ravel()
    if cfg.pde == "navier_stokes":
        r = cfg.ref_refine_space
        fine = make_periodic_grid(grid.domain_bounds, [r * n for n in grid.shape])
        w0 = sample_bandlimited_fourier(np.random.SeedSequence([cfg.seed, 9999]), fine)
        traj = solve_ns_vorticity(w0, instance.params["nu"], fine,
                                  cfg.dt / cfg.ref_refine_time, cfg.t_final,
                                  save_times=[cfg.t_final])
        return traj.final.reshape(fine.shape)[::r, ::r].ravel()
    raise ConfigError(f"unknown pde {cfg.pde!r}")


def prepare_library(cfg: ExperimentConfig, grid: CollocationSet,
                    instance: PDEInstance) -> SnapshotLibrary:
    """Build (or load) the snapshot library for a run, applying augmentation."""
    if cfg.library_path:
        lib = load_library(cfg.library_path)
    else:
        lib = build_library(instance, _sampler_spec(cfg), cfg.n_snapshots)
    if cfg.pde == "burgers" and cfg.augment and not lib.notes.get("shift_augmented"):
        lib = shift_augment(lib, BURGERS_SHIFTS)
    if cfg.greedy_m:
        lib = lib.select_columns(greedy_select(lib, cfg.greedy_m))
    return lib


def build_operator(cfg: ExperimentConfig, grid: CollocationSet, gram: GramMatrix):
    """Covariance operator for the recovery, plus the sparse diagnostic factor.

    Finite-rank kernels are applied through their snapshot factorization
    (rank-preserving, keeps solutions in the snapshot span); their sparse
    precision factor is a diagnostic surrogate, built on request.  Dense
    full-rank kernels go through the sparse factor.
    """
    factor = None
    if cfg.factorization == "sparse" and (gram.factor is None or cfg.diagnostics):
        ordering = maximin_order(grid, cfg.maximin_seed)
        pattern = sparsity_pattern(ordering, grid, cfg.rho)
        factor = kl_sparse_factor(gram, pattern, ordering)
    operator = gram if gram.factor is not None else (factor or gram)
    return operator, factor


def _solve_krom(cfg: ExperimentConfig, grid: CollocationSet, instance: PDEInstance,
                operator, gn: GaussNewtonConfig):
    """Run the kernel solve for the configured problem; returns (field, gn_residual)."""
    if cfg.pde in ("semilinear_elliptic", "darcy"):
        if cfg.pde == "semilinear_elliptic":
            _, f = manufactured_elliptic(grid)
            stencils, rhs = assemble_constraints("semilinear_elliptic", grid,
                                                 forcing=f, bc_values=0.0,
                                                 include_boundary=cfg.include_boundary_rows)
        else:
            stencils, rhs = assemble_constraints("darcy", grid,
                                                 coefficients=instance.params["coeff"],
                                                 forcing=np.ones(grid.n_points),
                                                 bc_values=0.0,
                                                 include_boundary=cfg.include_boundary_rows)
        tau, dtau = cubic_nonlinearity()
        problem = RecoveryProblem(gram=operator, stencils=stencils, tau=tau, dtau=dtau,
                                  rhs=rhs, gn=gn)
        v = gauss_newton_solve(problem)
        return v, constraint_residual(problem, v), None
    if cfg.pde == "burgers":
        u0 = -np.sin(np.pi * grid.points[:, 0])
        params = {"nu": instance.params["nu"], "bc": 0.0}
    elif cfg.pde == "allen_cahn":
        x, y = grid.points[:, 0], grid.points[:, 1]
        u0 = 0.25 * np.sin(3 * x) * np.sin(3 * y)
        params = {"epsilon": instance.params["epsilon"], "bc": 0.0}
    else:
        u0 = _ns_test_ic(cfg, grid)
        params = {"nu": instance.params["nu"]}
    traj = crank_nicolson_march(cfg.pde, operator, grid, u0, cfg.dt, cfg.t_final,
                                gn=gn, params=params,
                                include_boundary=cfg.include_boundary_rows)
    return traj.final, traj.meta.get("final_gn_residual", ""), traj


def run_experiment(config: ExperimentConfig, library: SnapshotLibrary | None = None,
                   report: ErrorReport | None = None) -> ErrorReport:
    """Execute one configured run and append its row to a report."""
    cfg = config.resolved()
    report = report if report is not None else ErrorReport()
    row = report.add(pde=cfg.pde, kernel=cfg.kernel, rho=float(cfg.rho), status="ok")
    t0 = time.perf_counter()
    stage = "setup"
    try:
        grid = build_experiment_grid(cfg)
        row["M"] = grid.n_points
        instance = _pde_instance(cfg, grid)

        stage = "reference"
        reference = _reference_solution(cfg, grid, instance)

        stage = "library"
        lib = None
        if cfg.kernel in ("empirical", "truncated"):
            lib = library if library is not None else prepare_library(cfg, grid, instance)
            row["N"] = lib.n_columns // max(lib.n_times, 1)
            kernel = EmpiricalKernel(lib.values)
            if cfg.kernel == "truncated":
                kernel = pod_truncate(kernel, cfg.rank or lib.n_columns)
        else:
            row["N"] = 0
            kernel = MaternKernel(cfg.theta)

        stage = "gram"
        gram = assemble_gram(kernel, grid, nugget=cfg.nugget)
        row["nugget"] = gram.nugget

        stage = "factorization"
        operator, factor = build_operator(cfg, grid, gram)

        stage = "recovery"
        gn = GaussNewtonConfig(max_iters=cfg.gn_iters, inner_nugget=cfg.inner_nugget)
        solution, gn_residual, traj = _solve_krom(cfg, grid, instance, operator, gn)
        row["gn_residual"] = gn_residual
        row["effective_dt"] = (traj.meta.get("dt_effective", "") if traj is not None
                               else "")

        stage = "errors"
        row["rel_l2"] = relative_l2_error(solution, reference)
        row["linf"] = float(np.linalg.norm(solution - reference, np.inf))

        if cfg.diagnostics:
            stage = "diagnostics"
            probe = [2 * n for n in grid.shape]
            row["fill_distance"] = fill_distance(grid, probe)
            if lib is not None:
                coeffs, *_ = np.linalg.lstsq(lib.values, reference, rcond=None)
                gap = reference - lib.values @ coeffs
                row["span_residual"] = float(np.linalg.norm(gap)
                                             / max(np.linalg.norm(reference), 1e-300))
            if factor is not None and grid.n_points <= 1500:
                row["frobenius_gap"] = frobenius_gap(gram, factor)

        if cfg.emit_fields and cfg.out_dir:
            _write_fields(cfg, grid, solution, reference)
    except KernelRomError as err:
        row["status"] = f"error:{stage}:{type(err).__name__}"
        row["rel_l2"] = ""
    row["wall_ms"] = 1000.0 * (time.perf_counter() - t0)
    return report


def _write_fields(cfg: ExperimentConfig, grid: CollocationSet, solution, reference):
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, f"fields_{cfg.pde}_{cfg.kernel}.csv")
    coords = [f"x{a}" for a in range(grid.dim)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(coords + ["solution", "reference", "abs_error"]) + "\n")
        for p, s, r in zip(grid.points, solution, reference):
            cells = [repr(float(c)) for c in p]
            cells += [repr(float(s)), repr(float(r)), repr(abs(float(s - r)))]
            fh.write(",".join(cells) + "\n")


def sweep(config: ExperimentConfig, axis: str, values) -> ErrorReport:
    """Repeat run_experiment varying one axis; everything else fixed.

    N-sweeps reuse nested prefixes of a single library built at the largest
    requested size, so errors are comparable across the sweep.
    """
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    cfg = config.resolved()
    report = ErrorReport()
    if axis == "N":
        big = replace(cfg, n_snapshots=int(max(values)))
        grid = build_experiment_grid(big)
        instance = _pde_instance(big, grid)
        if big.kernel == "matern":
            raise ConfigError("N-sweeps need a snapshot-based kernel")
        base = (load_library(big.library_path) if big.library_path
                else build_library(instance, _sampler_spec(big), big.n_snapshots))
        for n in values:
            sub = base.prefix_instances(int(n))
            if big.pde == "burgers" and big.augment:
                sub = shift_augment(sub, BURGERS_SHIFTS)
            run_experiment(replace(cfg, n_snapshots=int(n)), library=sub, report=report)
    elif axis == "rho":
        for r in values:
            run_experiment(replace(cfg, rho=float(r)), report=report)
    elif axis == "M":
        for m in values:
            run_experiment(replace(cfg, grid=int(m)), report=report)
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose N, rho, or M")
    return report


def factor_diagnostics(config: ExperimentConfig):
    """Gram + ordering + factor for the configured kernel.

    Returns (stats dict with KL divergence / Frobenius gap / nnz, factor).
    """
    cfg = config.resolved()
    grid = build_experiment_grid(cfg)
    instance = _pde_instance(cfg, grid)
    if cfg.kernel in ("empirical", "truncated"):
        lib = prepare_library(cfg, grid, instance)
        kernel = EmpiricalKernel(lib.values)
        if cfg.kernel == "truncated":
            kernel = pod_truncate(kernel, cfg.rank or lib.n_columns)
    else:
        kernel = MaternKernel(cfg.theta)
    gram = assemble_gram(kernel, grid, nugget=cfg.nugget)
    ordering = maximin_order(grid, cfg.maximin_seed)
    pattern = sparsity_pattern(ordering, grid, cfg.rho)
    factor = kl_sparse_factor(gram, pattern, ordering)
    out = {"M": grid.n_points, "rho": cfg.rho, "nnz": factor.nnz,
           "kl_divergence": kl_divergence(gram, factor)}
    if grid.n_points <= 4096:
        out["frobenius_gap"] = frobenius_gap(gram, factor)
    return out, factor


# -- configuration files ---------------------------------------------------------

_CONFIG_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_BOOL_FIELDS = {"include_boundary_rows", "augment", "diagnostics", "emit_fields"}
_INT_FIELDS = {"grid", "rank", "n_snapshots", "seed", "gn_iters", "greedy_m",
               "maximin_seed", "ref_refine_space", "ref_refine_time", "ref_cells"}
_FLOAT_FIELDS = {"theta", "rho", "dt", "t_final", "slice_dt", "nugget", "inner_nugget"}


def _coerce(key: str, raw: str):
    if key in _BOOL_FIELDS:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean {key}={raw!r}")
    try:
        if key in _INT_FIELDS:
            return int(raw)
        if key in _FLOAT_FIELDS:
            return float(raw)
    except ValueError as err:
        raise ConfigError(f"cannot parse {key}={raw!r}: {err}") from err
    return raw.strip()


def load_config_file(path) -> dict:
    """Parse a key=value config file with [section] headers into a flat mapping."""
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep case
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_string("[_root]\n" + fh.read())
    except (OSError, configparser.Error) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    mapping: dict = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            if key in mapping:
                raise ConfigError(f"duplicate config key {key!r}")
            mapping[key] = value
    return mapping


def config_from_mapping(mapping: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base if base is not None else ExperimentConfig()
    for key, raw in mapping.items():
        if key not in _CONFIG_FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, _coerce(key, raw) if isinstance(raw, str) else raw)
    return cfg
