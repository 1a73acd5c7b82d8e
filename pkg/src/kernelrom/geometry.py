"""Collocation grids, maximin point ordering, sparsity patterns, fill distance.

The solver pipeline orders collocation points coarse-to-fine (each new point is
the one farthest from all previously picked points) and derives a per-point
lengthscale from the selection distances.  Sparsity patterns for the precision
factor keep, in column ``j``, the earlier-ordered points within ``rho`` times
the lengthscale of point ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidGridError, InvalidParameterError

# Stored in place of the (infinite) lengthscale of the first ordered point.
LENGTHSCALE_SENTINEL = np.finfo(float).max


@dataclass(frozen=True)
class CollocationSet:
    """Spatial points with domain metadata.

    points: (M, d) coordinates; domain_bounds: (d, 2) per-axis [lo, hi];
    boundary_mask: True where a point lies on the domain boundary;
    shape: per-axis point counts of the tensor grid;
    periodic: half-open periodic grid (no boundary points).
    """

    points: np.ndarray
    domain_bounds: np.ndarray
    boundary_mask: np.ndarray
    shape: tuple
    periodic: bool = False

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def spacing(self) -> np.ndarray:
        """Per-axis grid spacing."""
        lo, hi = self.domain_bounds[:, 0], self.domain_bounds[:, 1]
        n = np.asarray(self.shape, dtype=float)
        if self.periodic:
            return (hi - lo) / n
        return (hi - lo) / (n - 1.0)

    def axes(self) -> list[np.ndarray]:
        """Per-axis coordinate arrays."""
        out = []
        for a, (lo, hi) in enumerate(self.domain_bounds):
            n = self.shape[a]
            if self.periodic:
                out.append(lo + (hi - lo) * np.arange(n) / n)
            else:
                out.append(np.linspace(lo, hi, n))
        return out

    @property
    def interior_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    @property
    def boundary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_mask)


@dataclass(frozen=True)
class MaximinOrdering:
    """Coarse-to-fine permutation with per-point lengthscales.

    perm[q] is the original index of the q-th ordered point.  lengthscales[0]
    is the sentinel standing in for infinity; lengthscales[q] for q >= 1 is the
    distance from point perm[q] to the set {perm[0..q-1]} at selection time,
    which equals the minimum distance to all earlier ordered points.
    """

    perm: np.ndarray
    lengthscales: np.ndarray
    seed_index: int

    @property
    def size(self) -> int:
        return self.perm.shape[0]


@dataclass(frozen=True)
class SparsityPattern:
    """Columnwise index sets for an upper-triangular factor.

    columns[j] holds the sorted ordered-space indices i <= j retained in
    column j; the diagonal index j is always present.
    """

    columns: list
    rho: float

    @property
    def size(self) -> int:
        return len(self.columns)

    @property
    def nnz(self) -> int:
        return int(sum(len(s) for s in self.columns))


def _normalize_bounds(domain_bounds) -> np.ndarray:
    b = np.atleast_2d(np.asarray(domain_bounds, dtype=float))
    if b.shape[1] != 2:
        raise InvalidGridError(f"domain bounds must be (d, 2), got shape {b.shape}")
    if np.any(b[:, 1] <= b[:, 0]):
        raise InvalidGridError("domain bounds must satisfy lo < hi on every axis")
    return b


def _normalize_resolution(resolution, dim) -> tuple:
    if np.isscalar(resolution):
        res = (int(resolution),) * dim
    else:
        res = tuple(int(r) for r in resolution)
    if len(res) != dim:
        raise InvalidGridError(f"resolution has {len(res)} axes, bounds have {dim}")
    return res


def make_grid(domain_bounds, resolution) -> CollocationSet:
    """Tensor-product equispaced grid including boundary points.

    boundary_mask marks points lying on any face of the box.  Requires at
    least 2 points per axis.
    """
    bounds = _normalize_bounds(domain_bounds)
    res = _normalize_resolution(resolution, bounds.shape[0])
    if any(r < 2 for r in res):
        raise InvalidGridError(f"each axis needs at least 2 points, got {res}")
    axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(bounds, res)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.column_stack([m.ravel() for m in mesh])
    on_face = np.zeros(points.shape[0], dtype=bool)
    for a, (lo, hi) in enumerate(bounds):
        on_face |= np.isclose(points[:, a], lo) | np.isclose(points[:, a], hi)
    return CollocationSet(points=points, domain_bounds=bounds,
                          boundary_mask=on_face, shape=res, periodic=False)


def make_periodic_grid(domain_bounds, resolution) -> CollocationSet:
    """Half-open tensor grid for periodic domains (upper endpoints excluded)."""
    bounds = _normalize_bounds(domain_bounds)
    res = _normalize_resolution(resolution, bounds.shape[0])
    if any(r < 2 for r in res):
        raise InvalidGridError(f"each axis needs at least 2 points, got {res}")
    axes = [lo + (hi - lo) * np.arange(n) / n for (lo, hi), n in zip(bounds, res)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.column_stack([m.ravel() for m in mesh])
    mask = np.zeros(points.shape[0], dtype=bool)
    return CollocationSet(points=points, domain_bounds=bounds,
                          boundary_mask=mask, shape=res, periodic=True)


def centroid_seed_index(points: CollocationSet | np.ndarray) -> int:
    """Index of the point closest to the domain centroid (deterministic seed)."""
    if isinstance(points, CollocationSet):
        centroid = points.domain_bounds.mean(axis=1)
        pts = points.points
    else:
        pts = np.asarray(points, dtype=float)
        centroid = pts.mean(axis=0)
    return int(np.argmin(np.linalg.norm(pts - centroid, axis=1)))


def maximin_order(points: CollocationSet | np.ndarray, seed_index: int | None = None) -> MaximinOrdering:
    """Order points by repeatedly picking the one farthest from those already picked.

    Equidistant candidates are broken by lowest original index.  The default
    seed is the point closest to the domain centroid.
    """
    pts = points.points if isinstance(points, CollocationSet) else np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    m = pts.shape[0]
    if m == 0:
        raise InvalidParameterError("cannot order an empty point set")
    if seed_index is None:
        seed_index = centroid_seed_index(points)
    if not (0 <= seed_index < m):
        raise InvalidParameterError(f"seed index {seed_index} out of range for {m} points")

    perm = np.empty(m, dtype=np.intp)
    lengths = np.empty(m, dtype=float)
    perm[0] = seed_index
    lengths[0] = LENGTHSCALE_SENTINEL
    dist = np.linalg.norm(pts - pts[seed_index], axis=1)
    dist[seed_index] = -np.inf
    for q in range(1, m):
        nxt = int(np.argmax(dist))  # first occurrence == lowest original index
        perm[q] = nxt
        lengths[q] = dist[nxt]
        dist = np.minimum(dist, np.linalg.norm(pts - pts[nxt], axis=1))
        dist[nxt] = -np.inf
    return MaximinOrdering(perm=perm, lengthscales=lengths, seed_index=int(seed_index))


def sparsity_pattern(ordering: MaximinOrdering, points: CollocationSet | np.ndarray,
                     rho: float) -> SparsityPattern:
    """Columnwise pattern s_j = {i <= j : |x_(i) - x_(j)| <= rho * l_j}.

    Indices are in ordered space.  The diagonal is always retained, and
    patterns at larger rho are columnwise supersets of those at smaller rho.
    """
    if rho <= 0:
        raise InvalidParameterError(f"rho must be positive, got {rho}")
    pts = points.points if isinstance(points, CollocationSet) else np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    ordered = pts[ordering.perm]
    columns = [np.array([0], dtype=np.intp)]
    for j in range(1, ordering.size):
        radius = rho * ordering.lengthscales[j]
        d = np.linalg.norm(ordered[: j + 1] - ordered[j], axis=1)
        columns.append(np.flatnonzero(d <= radius).astype(np.intp))
    return SparsityPattern(columns=columns, rho=float(rho))


def fill_distance(points: CollocationSet | np.ndarray, probe_resolution,
                  domain_bounds=None) -> float:
    """Approximate sup-inf distance from the domain to the point set.

    Evaluates max over a probe grid of the distance to the nearest collocation
    point.  The probe must be finer than the expected fill distance or the
    result is an underestimate.
    """
    if isinstance(points, CollocationSet):
        pts = points.points
        bounds = points.domain_bounds
    else:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if domain_bounds is None:
            raise InvalidParameterError("domain_bounds required for raw point arrays")
        bounds = _normalize_bounds(domain_bounds)
    probe = make_grid(bounds, probe_resolution)
    d, _ = cKDTree(pts).query(probe.points)
    return float(d.max())
