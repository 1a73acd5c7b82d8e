"""KL-optimal sparse upper-triangular factorization of the precision matrix.

Given a Gram matrix Theta, a maximin ordering P, and a columnwise sparsity
pattern, the factor U minimizes KL(N(0, Theta) || N(0, (U U^T)^-1)) over
upper-triangular matrices supported on the pattern.  Each column has the
closed form

    U[s_j, j] = Theta[s_j, s_j]^-1 e / sqrt(e^T Theta[s_j, s_j]^-1 e),

with e selecting the position of j inside s_j (the last position, since
patterns are sorted ascending and always contain the diagonal).  U U^T then
approximates the permuted precision matrix (P Theta P^T)^-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import (IllConditionedSubmatrixError, InvalidParameterError,
                     NumericError, SingularFactorError)
from .geometry import MaximinOrdering, SparsityPattern, LENGTHSCALE_SENTINEL
from .kernels import GramMatrix

# Dense triangular solves are faster than sparse ones at desk scale.
_DENSE_SOLVE_LIMIT = 3000


@dataclass
class SparseFactor:
    """Sparse upper-triangular factor in maximin-permuted ordering.

    perm[q] is the original index of the q-th ordered point; columns[j] is a
    pair (indices, values) with indices in ordered space.  Entries outside the
    pattern are never stored.  nugget records the diagonal regularization of
    the Gram matrix the factor was built from.
    """

    perm: np.ndarray
    columns: list
    size: int
    nugget: float = 0.0
    _csc: sp.csc_matrix = field(default=None, repr=False)
    _dense: np.ndarray = field(default=None, repr=False)

    def as_csc(self) -> sp.csc_matrix:
        if self._csc is None:
            rows = np.concatenate([s for s, _ in self.columns])
            vals = np.concatenate([v for _, v in self.columns])
            ptr = np.zeros(self.size + 1, dtype=np.intp)
            ptr[1:] = np.cumsum([len(s) for s, _ in self.columns])
            self._csc = sp.csc_matrix((vals, rows, ptr), shape=(self.size, self.size))
        return self._csc

    def dense_upper(self) -> np.ndarray:
        if self._dense is None:
            self._dense = self.as_csc().toarray()
        return self._dense

    @property
    def nnz(self) -> int:
        return int(sum(len(s) for s, _ in self.columns))

    def diagonal(self) -> np.ndarray:
        return np.array([v[-1] for _, v in self.columns])


def identity_ordering(m: int) -> MaximinOrdering:
    """Trivial ordering for factorizations that do not reorder points."""
    lengths = np.full(m, LENGTHSCALE_SENTINEL)
    return MaximinOrdering(perm=np.arange(m, dtype=np.intp), lengthscales=lengths,
                           seed_index=0)


def full_pattern(m: int) -> SparsityPattern:
    """Dense lower-triangular pattern: s_j = {0..j} for every column."""
    return SparsityPattern(columns=[np.arange(j + 1, dtype=np.intp) for j in range(m)],
                           rho=np.inf)


def kl_sparse_factor(theta: GramMatrix, pattern: SparsityPattern,
                     ordering: MaximinOrdering) -> SparseFactor:
    """Columnwise KL-optimal factor of the precision matrix under a pattern.

    Each |s_j| x |s_j| system is solved by a dense symmetric (Cholesky)
    factorization.  Requires Theta (including its nugget) positive definite on
    every pattern submatrix.
    """
    m = theta.size
    if pattern.size != m or ordering.size != m:
        raise InvalidParameterError("pattern/ordering size does not match the Gram matrix")
    tp = theta.dense()[np.ix_(ordering.perm, ordering.perm)]
    columns = []
    for j, s in enumerate(pattern.columns):
        sub = tp[np.ix_(s, s)]
        pos = len(s) - 1  # patterns are sorted ascending with j last
        e = np.zeros(len(s))
        e[pos] = 1.0
        try:
            cf = sla.cho_factor(sub, lower=True)
            w = sla.cho_solve(cf, e)
        except (sla.LinAlgError, ValueError) as err:
            raise IllConditionedSubmatrixError(j, f"column {j}: {err}") from err
        pivot = w[pos]
        if not np.isfinite(pivot) or pivot <= 0:
            raise IllConditionedSubmatrixError(j, f"column {j}: nonpositive pivot {pivot}")
        columns.append((np.asarray(s, dtype=np.intp), w / np.sqrt(pivot)))
    return SparseFactor(perm=np.asarray(ordering.perm, dtype=np.intp),
                        columns=columns, size=m, nugget=theta.nugget)


def kl_divergence(theta: GramMatrix, factor: SparseFactor) -> float:
    """KL(N(0, Theta) || N(0, (U U^T)^-1)), computed via log-diagonals and traces."""
    m = theta.size
    if factor.size != m:
        raise InvalidParameterError("factor size does not match the Gram matrix")
    tp = theta.dense()[np.ix_(factor.perm, factor.perm)]
    try:
        cf = sla.cho_factor(tp, lower=True)
    except sla.LinAlgError as err:
        raise NumericError(f"Gram matrix is not positive definite: {err}") from err
    logdet_theta = 2.0 * float(np.sum(np.log(np.diag(cf[0]))))
    trace = 0.0
    for s, v in factor.columns:
        trace += float(v @ tp[np.ix_(s, s)] @ v)
    logdet_uut = 2.0 * float(np.sum(np.log(factor.diagonal())))
    kl = 0.5 * (trace - m - logdet_uut - logdet_theta)
    if not np.isfinite(kl):
        raise NumericError("non-finite intermediate in KL computation")
    return kl


def _permute(v: np.ndarray, perm: np.ndarray) -> np.ndarray:
    return v[perm] if v.ndim == 1 else v[perm, :]


def _unpermute(w: np.ndarray, perm: np.ndarray) -> np.ndarray:
    out = np.empty_like(w)
    if w.ndim == 1:
        out[perm] = w
    else:
        out[perm, :] = w
    return out


def apply_precision(factor: SparseFactor, v: np.ndarray) -> np.ndarray:
    """Approximate Theta^-1 v in original index order: P^T U (U^T (P v))."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != factor.size:
        raise InvalidParameterError("vector length does not match factor size")
    u = factor.as_csc()
    w = u @ (u.T @ _permute(v, factor.perm))
    return _unpermute(w, factor.perm)


def apply_covariance(factor: SparseFactor, v: np.ndarray) -> np.ndarray:
    """Approximate Theta v in original index order via two triangular solves."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != factor.size:
        raise InvalidParameterError("vector length does not match factor size")
    if np.any(factor.diagonal() <= 0):
        raise SingularFactorError("factor has a nonpositive diagonal entry")
    vp = _permute(v, factor.perm)
    if factor.size <= _DENSE_SOLVE_LIMIT:
        u = factor.dense_upper()
        t = sla.solve_triangular(u, vp, lower=False)
        w = sla.solve_triangular(u.T, t, lower=True)
    else:
        u = factor.as_csc()
        t = sp.linalg.spsolve_triangular(u.tocsr(), vp, lower=False)
        w = sp.linalg.spsolve_triangular(u.T.tocsr(), t, lower=True)
    return _unpermute(w, factor.perm)


def frobenius_gap(theta: GramMatrix, factor: SparseFactor) -> float:
    """Exact Frobenius norm of Theta^-1 - P^T U U^T P (diagnostic, dense inverse)."""
    m = theta.size
    if m > 4096:
        raise InvalidParameterError("frobenius_gap is a diagnostic for M <= 4096")
    tp = theta.dense()[np.ix_(factor.perm, factor.perm)]
    try:
        inv = sla.cho_solve(sla.cho_factor(tp, lower=True), np.eye(m))
    except sla.LinAlgError as err:
        raise NumericError(f"dense inversion failed: {err}") from err
    u = factor.dense_upper()
    return float(np.linalg.norm(inv - u @ u.T, "fro"))


def save_factor(factor: SparseFactor, path) -> None:
    """Dump the factor as text: header 'KROMU M nnz', then 'j i value' lines.

    Indices are 1-based in the permuted (ordered) index space; values are the
    shortest round-trip decimals.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"KROMU {factor.size} {factor.nnz}\n")
        for j, (s, v) in enumerate(factor.columns):
            for i, val in zip(s, v):
                fh.write(f"{j + 1} {i + 1} {float(val)!r}\n")
