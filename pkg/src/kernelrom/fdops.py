"""Sparse finite-difference operators on tensor-product collocation grids.

All builders return CSR matrices mapping the full nodal vector (length M) to
functional values at a chosen subset of row points.  Nonperiodic rows require
the full stencil neighborhood to exist.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import StencilError
from .geometry import CollocationSet


def identity_rows(n_points: int, row_idx) -> sp.csr_matrix:
    """Dirac rows: one unit entry per row at the given nodal indices."""
    row_idx = np.asarray(row_idx, dtype=np.intp)
    r = len(row_idx)
    return sp.csr_matrix((np.ones(r), (np.arange(r), row_idx)), shape=(r, n_points))


def _multi_index(grid: CollocationSet, flat_idx: np.ndarray) -> np.ndarray:
    return np.column_stack(np.unravel_index(flat_idx, grid.shape))


def _neighbor_flat(grid: CollocationSet, mi: np.ndarray, axis: int, step: int) -> np.ndarray:
    """Flat indices of axis-neighbors; periodic grids wrap, others must stay in range."""
    shifted = mi.copy()
    shifted[:, axis] += step
    n = grid.shape[axis]
    if grid.periodic:
        shifted[:, axis] %= n
    else:
        bad = (shifted[:, axis] < 0) | (shifted[:, axis] >= n)
        if np.any(bad):
            raise StencilError(
                f"stencil row lacks a neighbor along axis {axis} "
                f"(first offending point index {int(np.flatnonzero(bad)[0])})")
    return np.ravel_multi_index(tuple(shifted.T), grid.shape)


def neg_laplacian_rows(grid: CollocationSet, row_idx) -> sp.csr_matrix:
    """Rows of the (2d+1)-point discrete -Laplacian at the given points."""
    row_idx = np.asarray(row_idx, dtype=np.intp)
    r = len(row_idx)
    mi = _multi_index(grid, row_idx)
    h = grid.spacing()
    rows, cols, data = [], [], []
    arange_r = np.arange(r)
    for a in range(grid.dim):
        inv_h2 = 1.0 / (h[a] * h[a])
        rows.append(arange_r); cols.append(row_idx); data.append(np.full(r, 2.0 * inv_h2))
        for step in (-1, 1):
            nb = _neighbor_flat(grid, mi, a, step)
            rows.append(arange_r); cols.append(nb); data.append(np.full(r, -inv_h2))
    return sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(r, grid.n_points))


def first_derivative_rows(grid: CollocationSet, axis: int, row_idx) -> sp.csr_matrix:
    """Central-difference first derivative along one axis."""
    row_idx = np.asarray(row_idx, dtype=np.intp)
    r = len(row_idx)
    mi = _multi_index(grid, row_idx)
    inv_2h = 1.0 / (2.0 * grid.spacing()[axis])
    plus = _neighbor_flat(grid, mi, axis, +1)
    minus = _neighbor_flat(grid, mi, axis, -1)
    arange_r = np.arange(r)
    rows = np.concatenate([arange_r, arange_r])
    cols = np.concatenate([plus, minus])
    data = np.concatenate([np.full(r, inv_2h), np.full(r, -inv_2h)])
    return sp.csr_matrix((data, (rows, cols)), shape=(r, grid.n_points))


def divergence_form_rows(grid: CollocationSet, coeff: np.ndarray, row_idx) -> sp.csr_matrix:
    """Rows of -div(k grad u) with harmonic-mean face coefficients.

    coeff holds nodal values of k > 0; the face value between adjacent nodes
    p, q is 2 k_p k_q / (k_p + k_q).
    """
    coeff = np.asarray(coeff, dtype=float)
    row_idx = np.asarray(row_idx, dtype=np.intp)
    r = len(row_idx)
    mi = _multi_index(grid, row_idx)
    h = grid.spacing()
    k_c = coeff[row_idx]
    rows, cols, data = [], [], []
    arange_r = np.arange(r)
    diag = np.zeros(r)
    for a in range(grid.dim):
        inv_h2 = 1.0 / (h[a] * h[a])
        for step in (-1, 1):
            nb = _neighbor_flat(grid, mi, a, step)
            k_face = 2.0 * k_c * coeff[nb] / (k_c + coeff[nb])
            rows.append(arange_r); cols.append(nb); data.append(-k_face * inv_h2)
            diag += k_face * inv_h2
    rows.append(arange_r); cols.append(row_idx); data.append(diag)
    return sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(r, grid.n_points))
