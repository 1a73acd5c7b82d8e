import numpy as np
import pytest

from kernelrom.experiments import ExperimentConfig, build_experiment_grid, _pde_instance
from kernelrom.geometry import make_grid
from kernelrom.kernels import gp_sample_field
from kernelrom.reference import solve_semilinear_elliptic
from kernelrom.sampling import SamplerSpec
from kernelrom.snapshots import build_library, shift_augment


@pytest.fixture(scope="session")
def grid32():
    return make_grid([[0.0, 1.0], [0.0, 1.0]], 32)


@pytest.fixture(scope="session")
def elliptic_library60(grid32):
    """Shared 60-instance elliptic library (master seed 0), used by several suites."""
    from kernelrom.reference import PDEInstance
    instance = PDEInstance("semilinear_elliptic", grid32, {"bc": 0.0})
    sampler = SamplerSpec("gp_gaussian", {"sigma": 0.15}, seed=0)
    return build_library(instance, sampler, 60)


@pytest.fixture(scope="session")
def burgers_setup():
    """Grid, shift-augmented library, and the refined reference for the 1D benchmark."""
    cfg = ExperimentConfig(pde="burgers", grid=512, kernel="empirical", n_snapshots=8,
                           rho=5.0, seed=0, ref_cells=4096).resolved()
    grid = build_experiment_grid(cfg)
    instance = _pde_instance(cfg, grid)
    from kernelrom.experiments import prepare_library, _reference_solution
    library = prepare_library(cfg, grid, instance)
    reference = _reference_solution(cfg, grid, instance)
    return cfg, grid, instance, library, reference


def make_snapshots(grid, n, sigma=0.15, seed_offset=0):
    """Independent small elliptic snapshot set for unit tests."""
    cols = [solve_semilinear_elliptic(gp_sample_field(grid, sigma, i + seed_offset),
                                      0.0, grid) for i in range(n)]
    return np.column_stack(cols)
