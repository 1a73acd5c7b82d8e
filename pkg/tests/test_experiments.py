import os

import numpy as np
import pytest

from kernelrom.cli import main as cli_main
from kernelrom.errors import ConfigError, InvalidParameterError
from kernelrom.experiments import (REPORT_COLUMNS, ErrorReport, ExperimentConfig,
                                   checkerboard_coefficient, config_from_mapping,
                                   energy_spectrum, load_config_file,
                                   manufactured_elliptic, relative_l2_error,
                                   run_experiment, sweep)
from kernelrom.geometry import make_grid, make_periodic_grid
from kernelrom.snapshots import SnapshotLibrary


class TestRelativeL2:
    def test_exact_match(self):
        assert relative_l2_error([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_homogeneity(self):
        ref = np.array([3.0, -4.0])
        assert np.isclose(relative_l2_error(2.0 * ref, ref), 1.0)

    def test_hand_arithmetic(self):
        ref = np.array([3.0, 4.0])
        u = ref + np.array([5.0, 0.0])
        assert np.isclose(relative_l2_error(u, ref), 1.0)

    def test_zero_reference_flagged(self):
        with pytest.warns(UserWarning, match="zero"):
            val = relative_l2_error([3.0, 4.0], [0.0, 0.0])
        assert np.isclose(val, 5.0)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidParameterError):
            relative_l2_error([1.0], [1.0, 2.0])


class TestEnergySpectrum:
    def test_single_mode_single_shell(self):
        n = 32
        g = make_periodic_grid([[0, 2 * np.pi]] * 2, n)
        a = 1.7
        w = a * np.sin(3 * g.points[:, 0])
        spec = energy_spectrum(w, g)
        ks = spec[:, 0]
        nonzero = spec[spec[:, 1] > 1e-14 * spec[:, 1].max()]
        assert len(nonzero) == 1
        assert nonzero[0, 0] == 3.0
        # oracle: modes (+-3, 0) each carry |coef| = a/2
        expected = 0.5 * (2 * (a / 2) ** 2) / 9.0
        assert np.isclose(nonzero[0, 1], expected, rtol=1e-12)

    def test_zero_field(self):
        g = make_periodic_grid([[0, 2 * np.pi]] * 2, 16)
        spec = energy_spectrum(np.zeros(g.n_points), g)
        assert np.all(spec[:, 1] == 0.0)

    def test_parseval_consistency(self):
        n = 16
        g = make_periodic_grid([[0, 2 * np.pi]] * 2, n)
        rng = np.random.default_rng(0)
        w = rng.standard_normal(g.n_points)
        coef = np.fft.fft2(w.reshape(n, n)) / (n * n)
        assert np.isclose((np.abs(coef) ** 2).sum(), (w ** 2).sum() / (n * n))

    def test_requires_periodic_square(self):
        g = make_grid([[0, 1], [0, 1]], 8)
        with pytest.raises(InvalidParameterError):
            energy_spectrum(np.zeros(g.n_points), g)


class TestProblemData:
    def test_manufactured_solution_and_forcing_consistent(self):
        g = make_grid([[0, 1], [0, 1]], 40)
        ustar, f = manufactured_elliptic(g)
        # interior finite-difference residual of the closed-form pair is O(h^2)
        from kernelrom.fdops import neg_laplacian_rows
        rows = neg_laplacian_rows(g, g.interior_indices)
        resid = rows @ ustar + ustar[~g.boundary_mask] ** 3 - f[~g.boundary_mask]
        assert np.linalg.norm(resid, np.inf) <= 0.5  # h^2 * |u''''| scale

    def test_checkerboard_values(self):
        g = make_grid([[0, 1], [0, 1]], 17)
        k = checkerboard_coefficient(g)
        assert set(np.unique(k)) == {1.0, 100.0}
        # (0.05, 0.05) is in the first cell: floor(0.4) + floor(0.4) = 0 -> k = 1
        idx = np.argmin(np.linalg.norm(g.points - [0.05, 0.05], axis=1))
        assert k[idx] == 1.0


class TestRunExperiment:
    def test_row_schema_stable(self):
        cfg = ExperimentConfig(pde="semilinear_elliptic", grid=10, kernel="matern",
                               factorization="dense")
        rep = run_experiment(cfg)
        assert list(rep.rows[0].keys()) == list(REPORT_COLUMNS)
        csv = rep.to_csv()
        assert csv.splitlines()[0] == ",".join(REPORT_COLUMNS)

    def test_reproducible_modulo_timing(self):
        cfg = ExperimentConfig(pde="semilinear_elliptic", grid=12, kernel="empirical",
                               n_snapshots=6, seed=4)
        a = run_experiment(cfg).rows[0]
        b = run_experiment(cfg).rows[0]
        for key in REPORT_COLUMNS:
            if key != "wall_ms":
                assert a[key] == b[key], key

    def test_degenerate_zero_library(self):
        cfg = ExperimentConfig(pde="semilinear_elliptic", grid=10, kernel="empirical",
                               n_snapshots=1, seed=0).resolved()
        from kernelrom.experiments import build_experiment_grid
        grid = build_experiment_grid(cfg)
        zero_lib = SnapshotLibrary(values=np.zeros((grid.n_points, 1)), grid=grid,
                                   provenance=[{"instance": 0}], n_instances=1,
                                   n_times=1)
        row = run_experiment(cfg, library=zero_lib).rows[0]
        assert row["status"] == "ok"
        assert np.isclose(float(row["rel_l2"]), 1.0)

    def test_diagnostics_columns_filled(self):
        cfg = ExperimentConfig(pde="semilinear_elliptic", grid=10, kernel="empirical",
                               n_snapshots=5, seed=1, diagnostics=True)
        row = run_experiment(cfg).rows[0]
        assert row["fill_distance"] != ""
        assert row["span_residual"] != ""
        assert row["frobenius_gap"] != ""

    def test_truncated_kernel_runs(self):
        cfg = ExperimentConfig(pde="semilinear_elliptic", grid=10, kernel="truncated",
                               rank=4, n_snapshots=6, seed=2)
        row = run_experiment(cfg).rows[0]
        assert row["status"] == "ok"

    def test_emit_fields(self, tmp_path):
        cfg = ExperimentConfig(pde="semilinear_elliptic", grid=8, kernel="matern",
                               factorization="dense", emit_fields=True,
                               out_dir=str(tmp_path))
        run_experiment(cfg)
        path = tmp_path / "fields_semilinear_elliptic_matern.csv"
        lines = path.read_text().splitlines()
        assert lines[0] == "x0,x1,solution,reference,abs_error"
        assert len(lines) == 1 + 64


class TestSweep:
    def test_single_value_matches_run(self):
        cfg = ExperimentConfig(pde="semilinear_elliptic", grid=10, kernel="empirical",
                               n_snapshots=5, seed=3)
        single = sweep(cfg, "N", [5]).rows[0]
        direct = run_experiment(cfg).rows[0]
        assert single["rel_l2"] == direct["rel_l2"]

    def test_nested_n_sweep_runs(self):
        cfg = ExperimentConfig(pde="semilinear_elliptic", grid=10, kernel="empirical",
                               seed=0)
        rep = sweep(cfg, "N", [3, 6])
        assert [r["N"] for r in rep.rows] == [3, 6]
        assert all(r["status"] == "ok" for r in rep.rows)

    def test_unknown_axis(self):
        with pytest.raises(ConfigError):
            sweep(ExperimentConfig(), "theta", [1])


class TestConfigFiles:
    def test_parse_and_override(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("[experiment]\npde=darcy\ngrid=12\nkernel=matern\n"
                        "[solver]\nrho=3.5\ndiagnostics=true\n")
        cfg = config_from_mapping(load_config_file(path))
        assert cfg.pde == "darcy"
        assert cfg.grid == 12
        assert cfg.rho == 3.5
        assert cfg.diagnostics is True

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[x]\nnonsense=1\n")
        with pytest.raises(ConfigError):
            config_from_mapping(load_config_file(path))

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "dup.cfg"
        path.write_text("[a]\ngrid=4\n[b]\ngrid=8\n")
        with pytest.raises(ConfigError):
            load_config_file(path)

    def test_invalid_pde_rejected_at_resolve(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(pde="wave").resolved()


class TestCli:
    def test_solve_writes_report(self, tmp_path):
        rc = cli_main(["solve", "--pde", "semilinear_elliptic", "--grid", "10",
                       "--kernel", "matern", "--factorization", "dense",
                       "--out", str(tmp_path)])
        assert rc == 0
        text = (tmp_path / "report.csv").read_text()
        assert text.startswith(",".join(REPORT_COLUMNS))

    def test_gen_snapshots_then_load(self, tmp_path):
        rc = cli_main(["gen-snapshots", "--pde", "semilinear_elliptic", "--grid", "10",
                       "--n-snapshots", "3", "--seed", "5", "--out", str(tmp_path)])
        assert rc == 0
        lib_path = tmp_path / "library_semilinear_elliptic.kroms"
        assert lib_path.exists()
        rc = cli_main(["solve", "--pde", "semilinear_elliptic", "--grid", "10",
                       "--kernel", "empirical", "--library-path", str(lib_path),
                       "--out", str(tmp_path)])
        assert rc == 0

    def test_sweep_cli(self, tmp_path):
        rc = cli_main(["sweep", "--axis", "rho", "--values", "2,3",
                       "--pde", "semilinear_elliptic", "--grid", "10",
                       "--kernel", "matern", "--out", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "sweep_rho.csv").exists()

    def test_factor_diag_and_dump(self, tmp_path):
        rc = cli_main(["factor-diag", "--pde", "semilinear_elliptic", "--grid", "10",
                       "--kernel", "matern", "--rho", "3", "--dump-factor",
                       "--out", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "factor_diag.csv").exists()
        dump = (tmp_path / "factor.kromu").read_text().splitlines()
        assert dump[0].startswith("KROMU 100 ")

    def test_spectrum_cli(self, tmp_path):
        rc = cli_main(["spectrum", "--pde", "navier_stokes", "--grid", "12",
                       "--kernel", "empirical", "--n-snapshots", "2",
                       "--dt", "0.01", "--t-final", "0.05", "--seed", "0",
                       "--out", str(tmp_path)])
        assert rc == 0
        lines = (tmp_path / "spectrum.csv").read_text().splitlines()
        assert lines[0] == "k,E_reference,E_empirical"

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[a]\nnot_a_key=2\n")
        rc = cli_main(["solve", "--config", str(bad)])
        assert rc == 2


class TestFailurePaths:
    def test_mismatched_library_reports_stage(self):
        from kernelrom.geometry import make_grid
        from kernelrom.snapshots import SnapshotLibrary
        wrong = make_grid([[0, 1], [0, 1]], 6)
        lib = SnapshotLibrary(values=np.ones((36, 2)), grid=wrong,
                              provenance=[{}, {}], n_instances=2, n_times=1)
        cfg = ExperimentConfig(pde="semilinear_elliptic", grid=10, kernel="empirical",
                               n_snapshots=2)
        row = run_experiment(cfg, library=lib).rows[0]
        assert row["status"].startswith("error:gram")
        assert row["rel_l2"] == ""

    def test_missing_library_path_is_format_error(self):
        from kernelrom.errors import FormatError
        from kernelrom.snapshots import load_library
        with pytest.raises(FormatError):
            load_library("/nonexistent/never.kroms")

    def test_greedy_selection_in_pipeline(self):
        cfg = ExperimentConfig(pde="semilinear_elliptic", grid=10, kernel="empirical",
                               n_snapshots=6, greedy_m=4, seed=1)
        row = run_experiment(cfg).rows[0]
        assert row["status"] == "ok"
        assert row["N"] == 4
