import numpy as np
import pytest

from kernelrom.errors import (FormatError, InvalidParameterError,
                              UnsupportedAugmentationError)
from kernelrom.geometry import make_grid
from kernelrom.reference import PDEInstance
from kernelrom.sampling import SamplerSpec
from kernelrom.snapshots import (SnapshotLibrary, build_library, greedy_select,
                                 load_library, save_library, shift_augment)


def synthetic_1d_library(n_cols, m=65, seed=0, n_times=1):
    grid = make_grid([[-1.0, 1.0]], m)
    rng = np.random.default_rng(seed)
    x = grid.points[:, 0]
    cols = []
    prov = []
    for c in range(n_cols):
        a, b = rng.standard_normal(2)
        u = a * np.sin(np.pi * x) + b * np.sin(2 * np.pi * x)
        cols.append(u)
        prov.append({"kind": "burgers", "instance": c // n_times, "seed": seed,
                     "time": float(c % n_times), "shift": 0.0})
    return SnapshotLibrary(values=np.column_stack(cols), grid=grid, provenance=prov,
                           n_instances=n_cols // n_times, n_times=n_times)


class TestBuildLibrary:
    def test_single_zero_forcing_elliptic(self, grid32):
        # degenerate sampler: sigma tiny still gives nonzero f; instead check shape
        instance = PDEInstance("semilinear_elliptic", grid32, {"bc": 0.0})
        lib = build_library(instance, SamplerSpec("gp_gaussian", {"sigma": 0.15}, seed=3), 1)
        assert lib.values.shape == (grid32.n_points, 1)
        assert lib.n_instances == 1 and lib.n_times == 1

    def test_deterministic_in_master_seed(self):
        g = make_grid([[0, 1], [0, 1]], 12)
        instance = PDEInstance("semilinear_elliptic", g, {"bc": 0.0})
        spec = SamplerSpec("gp_gaussian", {"sigma": 0.15}, seed=11)
        a = build_library(instance, spec, 5)
        b = build_library(instance, spec, 5)
        assert np.array_equal(a.values, b.values)

    def test_library_rank_equals_instances(self, elliptic_library60):
        sv = np.linalg.svd(elliptic_library60.values, compute_uv=False)
        assert np.sum(sv > 1e-10 * sv[0]) == 60

    def test_rejects_zero_instances(self, grid32):
        instance = PDEInstance("semilinear_elliptic", grid32, {"bc": 0.0})
        with pytest.raises(InvalidParameterError):
            build_library(instance, SamplerSpec("gp_gaussian", {"sigma": 0.15}), 0)

    def test_time_dependent_columns_counted(self):
        g = make_grid([[-1, 1]], 65)
        instance = PDEInstance("burgers", g, {"nu": 0.01, "t_final": 0.2,
                                              "slice_dt": 0.1, "snapshot_cells": 128})
        lib = build_library(instance, SamplerSpec("trig_random", seed=0), 2)
        assert lib.n_times == 3  # t = 0, 0.1, 0.2
        assert lib.n_columns == 6
        assert lib.values.shape == (65, 6)

    def test_prefix_instances_nested(self):
        g = make_grid([[0, 1], [0, 1]], 10)
        instance = PDEInstance("semilinear_elliptic", g, {"bc": 0.0})
        spec = SamplerSpec("gp_gaussian", {"sigma": 0.2}, seed=5)
        big = build_library(instance, spec, 6)
        small = big.prefix_instances(3)
        assert small.n_columns == 3
        assert np.array_equal(small.values, big.values[:, :3])


class TestShiftAugment:
    def test_zero_shift_copies_columns(self):
        lib = synthetic_1d_library(4)
        out = shift_augment(lib, [0.0])
        assert out.n_columns == 8
        assert np.allclose(out.values[:, 4:], lib.values, atol=1e-12)

    def test_full_period_shift_is_identity(self):
        lib = synthetic_1d_library(3)
        out = shift_augment(lib, [2.0])
        assert np.allclose(out.values[:, 3:], lib.values, atol=1e-10)

    def test_eighty_column_bookkeeping(self):
        lib = synthetic_1d_library(8)
        shifts = np.linspace(-0.8, 0.8, 9)
        out = shift_augment(lib, shifts)
        assert out.n_columns == 80  # originals plus one copy per shift value
        zero_shift = sum(1 for p in out.provenance if p["shift"] == 0.0)
        assert zero_shift == 16  # 8 originals + the 8 zero-shift copies

    def test_grid_aligned_shift_preserves_norms(self):
        lib = synthetic_1d_library(3, m=65)  # h = 2/64
        shift = 16 * (2.0 / 64)  # exactly 16 cells
        out = shift_augment(lib, [shift])
        for c in range(3):
            a = np.linalg.norm(lib.values[:-1, c])
            b = np.linalg.norm(out.values[:-1, 3 + c])
            assert np.isclose(a, b, rtol=1e-12)

    def test_shift_is_circular_translation(self):
        lib = synthetic_1d_library(1, m=65)
        x = lib.grid.points[:, 0]
        shift = 0.25
        out = shift_augment(lib, [shift])
        u = lib.values[:, 0]
        expected = np.interp((x - shift + 1) % 2 - 1, x, u)
        assert np.allclose(out.values[:, 1], expected, atol=1e-10)

    def test_rejects_2d_library(self):
        g = make_grid([[0, 1], [0, 1]], 5)
        lib = SnapshotLibrary(values=np.ones((25, 2)), grid=g,
                              provenance=[{}, {}], n_instances=2, n_times=1)
        with pytest.raises(UnsupportedAugmentationError):
            shift_augment(lib, [0.1])


class TestGreedySelect:
    def test_dominant_column_first(self):
        lib = synthetic_1d_library(5)
        lib.values += 0.02 * np.random.default_rng(9).standard_normal(lib.values.shape)
        lib.values[:, 3] *= 40.0
        picks = greedy_select(lib, 3)
        assert picks[0] == 3

    def test_full_selection_is_permutation(self):
        lib = synthetic_1d_library(4, seed=2)
        # make the columns genuinely independent
        rng = np.random.default_rng(0)
        lib.values += 0.01 * rng.standard_normal(lib.values.shape)
        picks = greedy_select(lib, 4)
        assert sorted(picks) == [0, 1, 2, 3]

    def test_residuals_non_increasing(self):
        lib = synthetic_1d_library(6, seed=3)
        rng = np.random.default_rng(1)
        lib.values += 0.05 * rng.standard_normal(lib.values.shape)
        resid = lib.values.copy()
        maxima = []
        for j in greedy_select(lib, 6):
            maxima.append(np.linalg.norm(resid, axis=0).max())
            q = resid[:, j] / np.linalg.norm(resid[:, j])
            resid -= np.outer(q, q @ resid)
        assert all(b <= a + 1e-12 for a, b in zip(maxima, maxima[1:]))

    def test_orthogonal_equal_norm_spans(self):
        g = make_grid([[0, 1]], 16)
        q, _ = np.linalg.qr(np.random.default_rng(4).standard_normal((16, 4)))
        lib = SnapshotLibrary(values=2.0 * q, grid=g, provenance=[{}] * 4,
                              n_instances=4, n_times=1)
        picks = greedy_select(lib, 3)
        sub = lib.values[:, picks]
        assert np.linalg.matrix_rank(sub) == 3

    def test_early_stop_on_rank_deficiency(self):
        g = make_grid([[0, 1]], 8)
        v = np.arange(1.0, 9.0)
        lib = SnapshotLibrary(values=np.column_stack([v, 2 * v, -0.5 * v]), grid=g,
                              provenance=[{}] * 3, n_instances=3, n_times=1)
        with pytest.warns(UserWarning, match="rank"):
            picks = greedy_select(lib, 3)
        assert len(picks) == 1


class TestPersistence:
    def test_roundtrip_bitwise(self, tmp_path):
        lib = synthetic_1d_library(5, n_times=1)
        lib.notes["pde"] = "burgers"
        path = tmp_path / "lib.kroms"
        save_library(lib, path)
        back = load_library(path)
        assert np.array_equal(back.values, lib.values)
        assert back.n_instances == lib.n_instances
        assert back.n_times == lib.n_times
        assert back.grid.shape == lib.grid.shape
        assert np.array_equal(back.grid.points, lib.grid.points)
        assert back.provenance[2]["shift"] == 0.0
        assert back.notes["pde"] == "burgers"

    def test_truncated_payload_rejected(self, tmp_path):
        lib = synthetic_1d_library(4)
        path = tmp_path / "lib.kroms"
        save_library(lib, path)
        raw = path.read_bytes()
        (tmp_path / "cut.kroms").write_bytes(raw[: len(raw) // 3])
        with pytest.raises(FormatError) as err:
            load_library(tmp_path / "cut.kroms")
        assert err.value.offset is not None

    def test_bad_magic_names_expected(self, tmp_path):
        path = tmp_path / "bad.kroms"
        path.write_bytes(b"NOTMAGIC 4 2 1 4\n" + b"\x00" * 64)
        with pytest.raises(FormatError, match="KROMS1"):
            load_library(path)


class TestDegenerateAndSweepShapes:
    def test_zero_forcing_gives_zero_column(self, grid32):
        from kernelrom.reference import PDEInstance
        from kernelrom.sampling import SamplerSpec
        instance = PDEInstance("semilinear_elliptic", grid32, {"bc": 0.0})
        spec = SamplerSpec("gp_gaussian", {"sigma": 0.15, "amplitude": 0.0}, seed=0)
        lib = build_library(instance, spec, 1)
        assert lib.n_columns == 1
        assert np.abs(lib.values).max() == 0.0

    def test_burgers_nsweep_column_counts(self):
        from kernelrom.experiments import ExperimentConfig, sweep
        cfg = ExperimentConfig(pde="burgers", grid=65, kernel="empirical",
                               dt=0.05, t_final=0.1, seed=0, ref_cells=256)
        rep = sweep(cfg, "N", [2, 3])
        assert [r["N"] for r in rep.rows] == [20, 30]  # 10x augmentation
        assert all(r["status"] == "ok" for r in rep.rows)
