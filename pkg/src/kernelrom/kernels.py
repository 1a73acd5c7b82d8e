"""Kernels and Gram matrices: Matern-2.5, snapshot (empirical), and truncated forms.

The empirical kernel is defined by snapshot values on the collocation grid:
its Gram matrix equals ``scale * S @ S.T`` with one column of ``S`` per
snapshot instance (or per instance/time-slice pair for space-time libraries).
Off-grid evaluation interpolates the snapshot columns bilinearly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.spatial.distance import cdist

from .errors import InvalidParameterError, NumericError
from .geometry import CollocationSet

_SQRT5 = np.sqrt(5.0)

# Default nugget scales, relative to mean(diag(Gram)).  Snapshot Grams are
# rank-deficient whenever there are fewer columns than grid points, so they
# get a larger floor.
NUGGET_SCALE_MATERN = 1e-10
NUGGET_SCALE_EMPIRICAL = 1e-8


def matern52_eval(x, y, theta: float) -> float:
    """Matern kernel with smoothness 5/2 at lengthscale theta, K(x, x) = 1."""
    if theta <= 0:
        raise InvalidParameterError(f"theta must be positive, got {theta}")
    r = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))
                             - np.atleast_1d(np.asarray(y, dtype=float))))
    return float(_matern52_of_r(np.array(r), theta))


def _matern52_of_r(r: np.ndarray, theta: float) -> np.ndarray:
    q = r / theta
    return (1.0 + _SQRT5 * q + (5.0 / 3.0) * q * q) * np.exp(-_SQRT5 * q)


@dataclass(frozen=True)
class MaternKernel:
    """Stationary Matern-2.5 kernel with lengthscale theta (domain units)."""

    theta: float

    def __post_init__(self):
        if self.theta <= 0:
            raise InvalidParameterError(f"theta must be positive, got {self.theta}")

    def gram_entries(self, grid: CollocationSet) -> np.ndarray:
        r = cdist(grid.points, grid.points)
        return _matern52_of_r(r, self.theta)

    @property
    def default_nugget_scale(self) -> float:
        return NUGGET_SCALE_MATERN


@dataclass(frozen=True)
class EmpiricalKernel:
    """Snapshot kernel: K(x_i, x_j) = scale * sum_n S[i, n] * S[j, n].

    snapshot_values has shape (grid points, columns); scale defaults to
    1 / columns so the Gram is the average of rank-one snapshot products.
    """

    snapshot_values: np.ndarray
    scale: float = None  # type: ignore[assignment]

    def __post_init__(self):
        s = np.asarray(self.snapshot_values, dtype=float)
        object.__setattr__(self, "snapshot_values", s)
        if s.ndim != 2 or s.shape[1] == 0:
            raise InvalidParameterError("snapshot_values must be a nonempty (M, N) matrix")
        if self.scale is None:
            object.__setattr__(self, "scale", 1.0 / s.shape[1])

    @property
    def n_columns(self) -> int:
        return self.snapshot_values.shape[1]

    def gram_entries(self, grid: CollocationSet | None = None) -> np.ndarray:
        if grid is not None and grid.n_points != self.snapshot_values.shape[0]:
            raise InvalidParameterError(
                f"kernel has {self.snapshot_values.shape[0]} grid values, "
                f"grid has {grid.n_points} points")
        s = self.snapshot_values
        return self.scale * (s @ s.T)

    def eval_offgrid(self, grid: CollocationSet, x, y) -> float:
        """Kernel value at arbitrary points via bilinear snapshot interpolation."""
        fx = _interpolate_columns(grid, self.snapshot_values, np.atleast_2d(x))
        fy = _interpolate_columns(grid, self.snapshot_values, np.atleast_2d(y))
        return float(self.scale * (fx @ fy.T)[0, 0])

    @property
    def default_nugget_scale(self) -> float:
        return NUGGET_SCALE_EMPIRICAL


def empirical_eval(kernel: EmpiricalKernel, i: int, j: int) -> float:
    """Empirical kernel entry for a pair of grid indices."""
    s = kernel.snapshot_values
    return float(kernel.scale * np.dot(s[i], s[j]))


@dataclass(frozen=True)
class TruncatedKernel:
    """Rank-r kernel from orthonormal modes and non-increasing energies."""

    modes: np.ndarray
    energies: np.ndarray

    def __post_init__(self):
        if self.modes.shape[1] != self.energies.shape[0]:
            raise InvalidParameterError("modes and energies disagree on rank")
        if np.any(self.energies <= 0):
            raise InvalidParameterError("energies must be strictly positive")
        if np.any(np.diff(self.energies) > 0):
            raise InvalidParameterError("energies must be non-increasing")

    @property
    def rank(self) -> int:
        return self.energies.shape[0]

    def gram_entries(self, grid: CollocationSet | None = None) -> np.ndarray:
        if grid is not None and grid.n_points != self.modes.shape[0]:
            raise InvalidParameterError("mode rows do not match grid size")
        return (self.modes * self.energies) @ self.modes.T

    @property
    def default_nugget_scale(self) -> float:
        return NUGGET_SCALE_EMPIRICAL


def pod_truncate(kernel: EmpiricalKernel, r: int) -> TruncatedKernel:
    """Keep the top-r energy modes of an empirical kernel.

    Modes come from the SVD of sqrt(scale) * S; energies are the squared
    singular values.  If r exceeds the numerical rank, it is clamped with a
    warning.
    """
    if r < 1:
        raise InvalidParameterError(f"rank must be >= 1, got {r}")
    scaled = np.sqrt(kernel.scale) * kernel.snapshot_values
    u, sing, _ = np.linalg.svd(scaled, full_matrices=False)
    energies = sing ** 2
    max_rank = energies.shape[0]
    if r > max_rank:
        warnings.warn(f"rank {r} clamped to matrix rank {max_rank}")
        r = max_rank
    # numerical rank cut: anything below 1e-14 of the top energy is noise
    significant = int(np.sum(energies > 1e-14 * energies[0]))
    if r > significant:
        warnings.warn(f"rank {r} exceeds numerical rank {significant}; clamped")
        r = significant
    return TruncatedKernel(modes=u[:, :r].copy(), energies=energies[:r].copy())


@dataclass(frozen=True)
class GramMatrix:
    """Dense symmetric kernel matrix plus a diagonal nugget.

    entries excludes the nugget; dense() materializes entries + nugget * I.
    For finite-rank kernels, factor holds F with entries = F F^T; matvec then
    applies F (F^T v) + nugget v, which keeps products exactly inside the
    column span of F (rounding in the dense entries would otherwise leak out
    of it).
    """

    entries: np.ndarray
    nugget: float = 0.0
    factor: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.nugget < 0:
            raise InvalidParameterError(f"nugget must be nonnegative, got {self.nugget}")

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def dense(self) -> np.ndarray:
        out = self.entries.copy()
        if self.nugget > 0:
            out[np.diag_indices_from(out)] += self.nugget
        return out

    def matvec(self, v: np.ndarray) -> np.ndarray:
        if self.factor is not None:
            return self.factor @ (self.factor.T @ v) + self.nugget * v
        return self.entries @ v + self.nugget * v


def assemble_gram(kernel, grid: CollocationSet, nugget: float | None = None) -> GramMatrix:
    """Build the dense Gram matrix of a kernel on a collocation grid.

    The upper triangle is computed and mirrored so the result is exactly
    symmetric.  nugget=None picks the kernel family default relative to the
    mean diagonal.
    """
    if grid.n_points == 0:
        raise InvalidParameterError("grid is empty")
    raw = kernel.gram_entries(grid)
    if not np.all(np.isfinite(raw)):
        bad = np.argwhere(~np.isfinite(raw))[0]
        raise NumericError(f"non-finite kernel value at index pair {tuple(bad)}")
    upper = np.triu(raw)
    entries = upper + np.triu(raw, 1).T
    if nugget is None:
        nugget = kernel.default_nugget_scale * float(np.mean(np.diag(entries)))
    factor = None
    if isinstance(kernel, EmpiricalKernel):
        factor = np.sqrt(kernel.scale) * kernel.snapshot_values
    elif isinstance(kernel, TruncatedKernel):
        factor = kernel.modes * np.sqrt(kernel.energies)
    return GramMatrix(entries=entries, nugget=float(nugget), factor=factor)


def _interpolate_columns(grid: CollocationSet, columns: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of per-grid-point columns at query points.

    Returns (n_query, n_columns).
    """
    axes = grid.axes()
    if grid.periodic:
        axes = [np.append(ax, grid.domain_bounds[a, 1]) for a, ax in enumerate(axes)]
        values = columns.reshape(*grid.shape, columns.shape[1])
        for a in range(grid.dim):
            values = np.concatenate([values, values.take([0], axis=a)], axis=a)
    else:
        values = columns.reshape(*grid.shape, columns.shape[1])
    interp = RegularGridInterpolator(axes, values, method="linear", bounds_error=True)
    return interp(query)


# -- Gaussian random fields (forcing sampler) --------------------------------

_CHOL_CACHE: dict = {}
_CHOL_CACHE_LIMIT = 8


def _gaussian_cholesky(grid: CollocationSet, sigma: float) -> np.ndarray:
    key = (grid.points.tobytes(), float(sigma))
    hit = _CHOL_CACHE.get(key)
    if hit is not None:
        return hit
    d2 = cdist(grid.points, grid.points, metric="sqeuclidean")
    cov = np.exp(-d2 / (2.0 * sigma * sigma))
    m = cov.shape[0]
    jitter = 1e-12
    last_err = None
    while jitter <= 1e-6:
        try:
            chol = np.linalg.cholesky(cov + jitter * np.eye(m))
            if len(_CHOL_CACHE) >= _CHOL_CACHE_LIMIT:
                _CHOL_CACHE.clear()
            _CHOL_CACHE[key] = chol
            return chol
        except np.linalg.LinAlgError as err:
            last_err = err
            jitter *= 10.0
    raise NumericError(f"Gaussian covariance not factorizable up to jitter 1e-6: {last_err}")


def gp_sample_field(grid: CollocationSet, sigma: float, rng_seed) -> np.ndarray:
    """Zero-mean Gaussian field with squared-exponential covariance.

    cov(x, y) = exp(-|x - y|^2 / (2 sigma^2)); sampled through the Cholesky
    factor of the jittered covariance, deterministic given the seed.
    """
    if sigma <= 0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")
    chol = _gaussian_cholesky(grid, sigma)
    rng = np.random.default_rng(rng_seed)
    return chol @ rng.standard_normal(grid.n_points)
