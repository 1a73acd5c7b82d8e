"""Random forcing and initial-condition samplers for snapshot generation.

All samplers own their random state (seed in, no globals) and are
deterministic given the seed.  Gaussian-process forcings live in
:mod:`kernelrom.kernels` (``gp_sample_field``) and are reused here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .geometry import CollocationSet


@dataclass(frozen=True)
class SamplerSpec:
    """Which distribution populates the library, its parameters, and the master seed."""

    kind: str  # gp_gaussian | trig_random | bandlimited_fourier
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        for name in ("sigma", "n_terms", "kmax", "modes"):
            value = self.params.get(name)
            if value is not None and value <= 0:
                raise InvalidParameterError(f"sampler parameter {name} must be positive")


@dataclass(frozen=True)
class TrigIC1D:
    """Random 1D trig sum: sum_i a_i (cos(b_i pi x) + sin(b_i pi x)).

    a_i are standard normal; b_i are drawn uniformly from {1, 2}, so every
    sample is 2-periodic in x.
    """

    a: np.ndarray
    b: np.ndarray

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        phase = np.pi * np.multiply.outer(self.b.astype(float), x)
        return self.a @ (np.cos(phase) + np.sin(phase))


def sample_trig_ic_1d(rng_seed, n_terms: int = 10) -> TrigIC1D:
    """Draw a random periodic 1D initial condition on [-1, 1]."""
    rng = np.random.default_rng(rng_seed)
    a = rng.standard_normal(n_terms)
    b = rng.integers(1, 3, size=n_terms)
    return TrigIC1D(a=a, b=b)


@dataclass(frozen=True)
class TrigIC2D:
    """Random 2D sine sum: sum_{n,m} a_nm sin(n x) sin(m y) on (0, 2 pi)^2.

    Vanishes on the boundary by construction.
    """

    amps: np.ndarray  # (modes, modes), amps[n-1, m-1] multiplies sin(nx) sin(my)

    def __call__(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        modes = np.arange(1, self.amps.shape[0] + 1, dtype=float)
        sx = np.sin(np.multiply.outer(x, modes))  # (..., n)
        sy = np.sin(np.multiply.outer(y, modes))  # (..., m)
        return np.einsum("...n,nm,...m->...", sx, self.amps, sy)


def sample_trig_ic_2d(rng_seed, modes: int = 5) -> TrigIC2D:
    """Draw a random boundary-vanishing 2D initial condition.

    Amplitudes for all modes n, m in {1..modes} are independent standard
    normals (the full mode square is used).
    """
    rng = np.random.default_rng(rng_seed)
    return TrigIC2D(amps=rng.standard_normal((modes, modes)))


def sample_bandlimited_fourier(rng_seed, grid: CollocationSet, kmax: int = 8) -> np.ndarray:
    """Zero-mean random band-limited field on a periodic grid.

    Real part of sum over wavevectors |k1|, |k2| <= kmax of
    Z_k / (1 + k1^2 + k2^2) * exp(i k . x) with Z_k = xi * exp(i phi),
    xi ~ N(0, 1), phi ~ Unif(0, pi).  The k = (0, 0) term is excluded so the
    field has exactly zero mean on the grid.
    """
    if not grid.periodic or grid.dim != 2:
        raise InvalidParameterError("a 2D periodic grid is required")
    rng = np.random.default_rng(rng_seed)
    ks = np.arange(-kmax, kmax + 1)
    xi = rng.standard_normal((ks.size, ks.size))
    phi = rng.uniform(0.0, np.pi, size=(ks.size, ks.size))
    amp = xi * np.exp(1j * phi)
    denom = 1.0 + ks[:, None] ** 2 + ks[None, :] ** 2
    coeff = amp / denom
    coeff[kmax, kmax] = 0.0  # drop the DC mode
    ax = grid.axes()
    e1 = np.exp(1j * np.multiply.outer(ks.astype(float), ax[0]))  # (k1, nx)
    e2 = np.exp(1j * np.multiply.outer(ks.astype(float), ax[1]))  # (k2, ny)
    field2 = np.real(np.einsum("ka,kl,lb->ab", e1, coeff, e2))
    return field2.ravel()


def bandlimited_pointwise_variance(kmax: int = 8) -> float:
    """Analytic per-point variance of the band-limited sampler (mode sum)."""
    ks = np.arange(-kmax, kmax + 1)
    denom = 1.0 + ks[:, None] ** 2 + ks[None, :] ** 2
    weights = 0.5 / denom ** 2
    weights[kmax, kmax] = 0.0
    return float(weights.sum())
