"""Command-line harness: snapshot generation, solves, sweeps, spectra, diagnostics.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import ConfigError, KernelRomError, NumericError
from .experiments import (ExperimentConfig, build_experiment_grid,
                          build_operator, config_from_mapping, energy_spectrum,
                          factor_diagnostics, load_config_file, prepare_library,
                          run_experiment, sweep, _pde_instance, _reference_solution,
                          _solve_krom)
from .kernels import EmpiricalKernel, MaternKernel, assemble_gram, pod_truncate
from .recovery import GaussNewtonConfig
from .snapshots import save_library
from .sparse_cholesky import save_factor

_COMMON_FLAGS = (
    ("--pde", str, "problem kind"),
    ("--grid", int, "points per axis (total points for the 1D problem)"),
    ("--kernel", str, "empirical | matern | truncated"),
    ("--theta", float, "Matern lengthscale"),
    ("--rank", int, "kept modes for the truncated kernel"),
    ("--rho", float, "sparsity radius multiplier"),
    ("--n-snapshots", int, "sampled instances for the library"),
    ("--dt", float, "time step"),
    ("--t-final", float, "final time"),
    ("--seed", int, "master seed"),
    ("--nugget", float, "diagonal regularization of the Gram matrix"),
    ("--factorization", str, "sparse | dense"),
    ("--gn-iters", int, "Gauss-Newton iterations"),
    ("--library-path", str, "load a KROMS1 library instead of generating one"),
    ("--greedy-m", int, "greedy-select this many library columns"),
    ("--maximin-seed", int, "index of the first ordered point"),
    ("--ref-cells", int, "finite-volume cells for the refined reference"),
    ("--slice-dt", float, "snapshot slice spacing for time-dependent libraries"),
)


def _add_common(sub: argparse.ArgumentParser):
    sub.add_argument("--config", type=str, default=None, help="key=value config file")
    sub.add_argument("--out", type=str, default=None, help="output directory")
    for flag, typ, help_text in _COMMON_FLAGS:
        sub.add_argument(flag, type=typ, default=None, help=help_text)
    sub.add_argument("--diagnostics", action="store_true", default=None,
                     help="emit fill distance, span residual, Frobenius gap")
    sub.add_argument("--emit-fields", action="store_true", default=None,
                     help="write solution/reference/error fields as CSV")
    sub.add_argument("--no-augment", action="store_true",
                     help="skip shift augmentation of 1D libraries")
    sub.add_argument("--omit-boundary-rows", action="store_true",
                     help="drop boundary collocation rows (built-in-BC kernels)")


def _build_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        cfg = config_from_mapping(load_config_file(args.config), cfg)
    overrides = {}
    for flag, _, _ in _COMMON_FLAGS:
        key = flag.lstrip("-").replace("-", "_")
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if args.diagnostics:
        overrides["diagnostics"] = True
    if args.emit_fields:
        overrides["emit_fields"] = True
    if args.no_augment:
        overrides["augment"] = False
    if args.omit_boundary_rows:
        overrides["include_boundary_rows"] = False
    if args.out:
        overrides["out_dir"] = args.out
    cfg = config_from_mapping(overrides, cfg)
    return cfg


def _outdir(cfg: ExperimentConfig) -> str:
    out = cfg.out_dir or "."
    os.makedirs(out, exist_ok=True)
    return out


def _cmd_gen_snapshots(args) -> int:
    cfg = _build_config(args).resolved()
    grid = build_experiment_grid(cfg)
    lib = prepare_library(cfg, grid, _pde_instance(cfg, grid))
    path = os.path.join(_outdir(cfg), f"library_{cfg.pde}.kroms")
    save_library(lib, path)
    print(f"wrote {lib.n_columns} columns ({lib.n_instances} instances) to {path}")
    return 0


def _cmd_solve(args) -> int:
    cfg = _build_config(args)
    report = run_experiment(cfg)
    path = os.path.join(_outdir(cfg.resolved()), "report.csv")
    report.write(path)
    print(report.to_csv(), end="")
    row = report.rows[0]
    if str(row["status"]) != "ok":
        print(f"run failed at stage: {row['status']}", file=sys.stderr)
        return 3
    return 0


def _cmd_sweep(args) -> int:
    cfg = _build_config(args)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    report = sweep(cfg, args.axis, values)
    path = os.path.join(_outdir(cfg.resolved()), f"sweep_{args.axis}.csv")
    report.write(path)
    print(report.to_csv(), end="")
    return 0 if all(str(r["status"]) == "ok" for r in report.rows) else 3


def _cmd_spectrum(args) -> int:
    cfg = _build_config(args)
    cfg.pde = cfg.pde or "navier_stokes"
    rcfg = cfg.resolved()
    if rcfg.pde != "navier_stokes":
        raise ConfigError("spectrum requires the periodic vorticity problem")
    grid = build_experiment_grid(rcfg)
    instance = _pde_instance(rcfg, grid)
    reference = _reference_solution(rcfg, grid, instance)
    spec_ref = energy_spectrum(reference, grid)
    columns = {"reference": spec_ref}
    lib = prepare_library(rcfg, grid, instance) if rcfg.kernel != "matern" else None
    kernel = (MaternKernel(rcfg.theta) if rcfg.kernel == "matern"
              else EmpiricalKernel(lib.values))
    if rcfg.kernel == "truncated":
        kernel = pod_truncate(kernel, rcfg.rank or lib.n_columns)
    gram = assemble_gram(kernel, grid, nugget=rcfg.nugget)
    operator, _ = build_operator(rcfg, grid, gram)
    gn = GaussNewtonConfig(max_iters=rcfg.gn_iters, inner_nugget=rcfg.inner_nugget)
    solution, _, _ = _solve_krom(rcfg, grid, instance, operator, gn)
    columns[rcfg.kernel] = energy_spectrum(solution, grid)
    path = os.path.join(_outdir(rcfg), "spectrum.csv")
    names = list(columns)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["k"] + [f"E_{n}" for n in names]) + "\n")
        for i in range(len(spec_ref)):
            cells = [repr(float(spec_ref[i, 0]))]
            cells += [repr(float(columns[n][i, 1])) for n in names]
            fh.write(",".join(cells) + "\n")
    print(f"wrote {path}")
    return 0


def _cmd_factor_diag(args) -> int:
    cfg = _build_config(args)
    stats, factor = factor_diagnostics(cfg)
    out = _outdir(cfg.resolved())
    with open(os.path.join(out, "factor_diag.csv"), "w", encoding="utf-8") as fh:
        keys = list(stats)
        fh.write(",".join(keys) + "\n")
        fh.write(",".join(repr(v) if isinstance(v, float) else str(v)
                          for v in (stats[k] for k in keys)) + "\n")
    if args.dump_factor:
        save_factor(factor, os.path.join(out, "factor.kromu"))
    print(" ".join(f"{k}={stats[k]}" for k in stats))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kernelrom",
        description="Kernel reduced-order PDE benchmarks: snapshot kernels plus "
                    "sparse precision factors")
    subs = parser.add_subparsers(dest="command", required=True)
    sub = subs.add_parser("gen-snapshots", help="generate and save a snapshot library")
    _add_common(sub)
    sub.set_defaults(func=_cmd_gen_snapshots)
    sub = subs.add_parser("solve", help="run one benchmark and report errors")
    _add_common(sub)
    sub.set_defaults(func=_cmd_solve)
    sub = subs.add_parser("sweep", help="vary N, rho, or M with everything else fixed")
    _add_common(sub)
    sub.add_argument("--axis", required=True, choices=("N", "rho", "M"))
    sub.add_argument("--values", required=True, help="comma-separated axis values")
    sub.set_defaults(func=_cmd_sweep)
    sub = subs.add_parser("spectrum", help="energy spectra of reference and kernel solves")
    _add_common(sub)
    sub.set_defaults(func=_cmd_spectrum)
    sub = subs.add_parser("factor-diag", help="KL divergence and Frobenius gap of a factor")
    _add_common(sub)
    sub.add_argument("--dump-factor", action="store_true",
                     help="write the factor in KROMU text format")
    sub.set_defaults(func=_cmd_factor_diag)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except NumericError as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return 3
    except KernelRomError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
