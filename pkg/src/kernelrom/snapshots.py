"""Snapshot libraries: generation, augmentation, selection, persistence.

A library is a matrix with one column per solution field sampled on the
collocation grid; space-time problems store every saved time slice as its own
column.  Libraries define empirical kernels and are persisted in the KROMS1
binary format (ASCII header, little-endian float64 payload in column-major
order, UTF-8 provenance lines).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (FormatError, InvalidParameterError, LibraryGenerationError,
                     UnsupportedAugmentationError)
from .geometry import CollocationSet, make_grid, make_periodic_grid
from .kernels import gp_sample_field
from .reference import (burgers_cell_centers, solve_allen_cahn, solve_burgers,
                        solve_darcy, solve_ns_vorticity, solve_semilinear_elliptic,
                        PDEInstance)
from .sampling import (SamplerSpec, sample_bandlimited_fourier, sample_trig_ic_1d,
                       sample_trig_ic_2d)

MAGIC = "KROMS1"


@dataclass
class SnapshotLibrary:
    """Matrix of solution fields (grid points x columns) plus provenance.

    provenance has one dict per column; notes holds library-level records.
    For space-time libraries the column count equals n_instances * n_times.
    """

    values: np.ndarray
    grid: CollocationSet
    provenance: list
    n_instances: int
    n_times: int
    notes: dict = field(default_factory=dict)

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    def select_columns(self, idx) -> "SnapshotLibrary":
        idx = np.asarray(idx, dtype=np.intp)
        return SnapshotLibrary(values=self.values[:, idx].copy(), grid=self.grid,
                               provenance=[self.provenance[i] for i in idx],
                               n_instances=self.n_instances, n_times=self.n_times,
                               notes=dict(self.notes))

    def prefix_instances(self, n: int) -> "SnapshotLibrary":
        """First n instances (all their time slices), for nested sweeps."""
        cols = [c for c, p in enumerate(self.provenance) if p.get("instance", 0) < n]
        out = self.select_columns(cols)
        out.n_instances = n
        return out


def _instance_seeds(master_seed: int, n: int):
    """Documented stream split: one child seed sequence per sampled instance."""
    return np.random.SeedSequence(master_seed).spawn(n)


def _slice_times(t_final: float, slice_dt: float) -> np.ndarray:
    n = int(round(t_final / slice_dt))
    return slice_dt * np.arange(1, n + 1)


def build_library(instance_template: PDEInstance, sampler: SamplerSpec,
                  n: int) -> SnapshotLibrary:
    """Solve n sampled problem instances and collect their fields as columns.

    Stationary kinds contribute one column per instance; time-dependent kinds
    contribute one column per saved slice (including t = 0).  Generation is a
    pure function of (template, sampler spec, master seed).
    """
    if n < 1:
        raise InvalidParameterError(f"need at least one instance, got {n}")
    grid = instance_template.grid
    params = instance_template.params
    kind = instance_template.kind
    seeds = _instance_seeds(sampler.seed, n)
    columns, prov = [], []
    n_times = 1
    for i, child in enumerate(seeds):
        try:
            if kind in ("semilinear_elliptic", "darcy"):
                sigma = sampler.params.get("sigma", 0.15)
                amplitude = sampler.params.get("amplitude", 1.0)
                f = amplitude * gp_sample_field(grid, sigma, child)
                g = params.get("bc", 0.0)
                if kind == "darcy":
                    u = solve_darcy(params["coeff"], f, g, grid)
                else:
                    u = solve_semilinear_elliptic(f, g, grid)
                columns.append(u)
                prov.append({"kind": kind, "instance": i, "seed": sampler.seed,
                             "time": 0.0, "shift": 0.0})
            elif kind == "burgers":
                ic = sample_trig_ic_1d(child, sampler.params.get("n_terms", 10))
                cells = params.get("snapshot_cells", 4 * (grid.n_points - 1))
                save = _slice_times(params["t_final"], params["slice_dt"])
                traj = solve_burgers(ic, params["nu"], cells,
                                     params.get("dt", params["slice_dt"]),
                                     params["t_final"], save_times=save)
                centers = burgers_cell_centers(cells)
                x_nodes = grid.points[:, 0]
                for t, cell_field in zip(traj.times, traj.fields):
                    if t == 0.0:
                        col = ic(x_nodes)
                    else:
                        col = np.interp(x_nodes, centers, cell_field)
                        col[0] = 0.0
                        col[-1] = 0.0
                    columns.append(col)
                    prov.append({"kind": kind, "instance": i, "seed": sampler.seed,
                                 "time": float(t), "shift": 0.0})
                n_times = len(traj.times)
            elif kind == "allen_cahn":
                ic_fun = sample_trig_ic_2d(child, sampler.params.get("modes", 5))
                u0 = ic_fun(grid.points[:, 0], grid.points[:, 1])
                save = _slice_times(params["t_final"], params["slice_dt"])
                traj = solve_allen_cahn(u0, params["epsilon"], grid,
                                        params.get("dt", 1e-3), params["t_final"],
                                        save_times=save)
                for t, fld in zip(traj.times, traj.fields):
                    columns.append(fld)
                    prov.append({"kind": kind, "instance": i, "seed": sampler.seed,
                                 "time": float(t), "shift": 0.0})
                n_times = len(traj.times)
            elif kind == "navier_stokes":
                w0 = sample_bandlimited_fourier(child, grid,
                                                sampler.params.get("kmax", 8))
                save = _slice_times(params["t_final"], params["slice_dt"])
                traj = solve_ns_vorticity(w0, params["nu"], grid,
                                          params.get("dt", 1e-3), params["t_final"],
                                          save_times=save)
                for t, fld in zip(traj.times, traj.fields):
                    columns.append(fld)
                    prov.append({"kind": kind, "instance": i, "seed": sampler.seed,
                                 "time": float(t), "shift": 0.0})
                n_times = len(traj.times)
            else:
                raise InvalidParameterError(f"unknown problem kind {kind!r}")
        except InvalidParameterError:
            raise
        except Exception as err:
            raise LibraryGenerationError(
                f"instance {i} (master seed {sampler.seed}) failed: {err}") from err
    values = np.column_stack(columns)
    return SnapshotLibrary(values=values, grid=grid, provenance=prov,
                           n_instances=n, n_times=n_times,
                           notes={"pde": kind, "sampler": sampler.kind,
                                  "master_seed": sampler.seed})


def shift_augment(library: SnapshotLibrary, shifts) -> SnapshotLibrary:
    """Append circularly shifted copies of every column (1D libraries only).

    Exploits spatial translation invariance of the underlying equation;
    non-grid-aligned shifts use periodic linear interpolation.  The closed
    grid's duplicate endpoint is handled by wrapping the first value.
    """
    if library.grid.dim != 1:
        raise UnsupportedAugmentationError("shift augmentation needs a 1D library")
    shifts = np.atleast_1d(np.asarray(shifts, dtype=float))
    x = library.grid.points[:, 0]
    lo, hi = library.grid.domain_bounds[0]
    period = hi - lo
    m = library.grid.n_points
    n_unique = m - 1  # closed grid: last node duplicates the first under periodicity
    h = period / n_unique
    base = library.values
    cols = [base]
    prov = list(library.provenance)
    for s in shifts:
        frac = (s / h) % n_unique
        k = int(np.floor(frac))
        w = frac - k
        u = base[:n_unique]
        # u_shifted(x) = u(x - s): roll forward by k cells, blend for the remainder
        rolled = np.roll(u, k, axis=0)
        rolled_next = np.roll(u, k + 1, axis=0)
        shifted_unique = (1.0 - w) * rolled + w * rolled_next
        shifted = np.vstack([shifted_unique, shifted_unique[:1]])
        cols.append(shifted)
        for p in library.provenance:
            q = dict(p)
            q["shift"] = float(s)
            prov.append(q)
    notes = dict(library.notes)
    notes["shift_augmented"] = ",".join(f"{s:g}" for s in shifts)
    notes["shift_caveat"] = ("circular shifts assume periodicity of the "
                             "snapshot fields; Dirichlet data may be displaced")
    return SnapshotLibrary(values=np.hstack(cols), grid=library.grid,
                           provenance=prov, n_instances=library.n_instances,
                           n_times=library.n_times, notes=notes)


def greedy_select(library: SnapshotLibrary, m: int) -> list:
    """Strong-greedy column selection.

    Picks the largest-norm column first, then repeatedly the column with the
    largest L2 residual after projection onto the span of the picks.  Stops
    early (with a rank note) if all residuals fall below 1e-12.
    """
    if m > library.n_columns:
        raise InvalidParameterError(f"cannot select {m} of {library.n_columns} columns")
    resid = library.values.astype(float).copy()
    picks = []
    for _ in range(m):
        norms = np.linalg.norm(resid, axis=0)
        norms[picks] = -1.0
        j = int(np.argmax(norms))
        if norms[j] < 1e-12:
            warnings.warn(f"greedy selection stopped early at rank {len(picks)}")
            break
        picks.append(j)
        q = resid[:, j] / norms[j]
        resid -= np.outer(q, q @ resid)
    return picks


# -- persistence ---------------------------------------------------------------

def save_library(library: SnapshotLibrary, path) -> None:
    """Write the KROMS1 format: header, column-major float64 payload, provenance."""
    grid = library.grid
    header = " ".join([MAGIC, str(library.values.shape[0]), str(library.n_columns),
                       str(grid.dim)] + [str(s) for s in grid.shape])
    with open(path, "wb") as fh:
        fh.write((header + "\n").encode("ascii"))
        fh.write(np.asfortranarray(library.values, dtype="<f8").tobytes(order="F"))
        lines = []
        for a in range(grid.dim):
            lines.append(f"domain_lo_{a}={float(grid.domain_bounds[a, 0])!r}")
            lines.append(f"domain_hi_{a}={float(grid.domain_bounds[a, 1])!r}")
        lines.append(f"periodic={int(grid.periodic)}")
        lines.append(f"n_instances={library.n_instances}")
        lines.append(f"n_times={library.n_times}")
        for key, value in library.notes.items():
            lines.append(f"note.{key}={value}")
        for c, p in enumerate(library.provenance):
            for key, value in p.items():
                lines.append(f"col{c}.{key}={value}")
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))


def load_library(path) -> SnapshotLibrary:
    """Read a KROMS1 file; malformed headers or short payloads raise FormatError."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as err:
        raise FormatError(f"cannot read library {path}: {err}") from err
    newline = raw.find(b"\n")
    if newline < 0:
        raise FormatError("missing header line", offset=0)
    header = raw[:newline].decode("ascii", errors="replace").split()
    if not header or header[0] != MAGIC:
        raise FormatError(f"bad magic {header[:1]}, expected {MAGIC}", offset=0)
    try:
        m, n_cols, dim = int(header[1]), int(header[2]), int(header[3])
        shape = tuple(int(s) for s in header[4:4 + dim])
    except (IndexError, ValueError) as err:
        raise FormatError(f"unparseable header: {err}", offset=0) from err
    if len(shape) != dim:
        raise FormatError("header resolution does not match dimension", offset=0)
    payload_start = newline + 1
    payload_len = 8 * m * n_cols
    if len(raw) < payload_start + payload_len:
        raise FormatError("truncated payload", offset=len(raw))
    values = np.frombuffer(raw[payload_start:payload_start + payload_len],
                           dtype="<f8").reshape((m, n_cols), order="F").copy()
    meta: dict = {}
    text = raw[payload_start + payload_len:].decode("utf-8")
    for line in text.splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            meta[key] = value
    try:
        bounds = np.array([[float(meta[f"domain_lo_{a}"]), float(meta[f"domain_hi_{a}"])]
                           for a in range(dim)])
        periodic = bool(int(meta["periodic"]))
        n_instances = int(meta["n_instances"])
        n_times = int(meta["n_times"])
    except (KeyError, ValueError) as err:
        raise FormatError(f"missing or invalid metadata: {err}",
                          offset=payload_start + payload_len) from err
    grid = make_periodic_grid(bounds, shape) if periodic else make_grid(bounds, shape)
    if grid.n_points != m:
        raise FormatError("grid size does not match payload rows", offset=0)
    prov = [dict() for _ in range(n_cols)]
    notes = {}
    for key, value in meta.items():
        if key.startswith("note."):
            notes[key[5:]] = value
        elif key.startswith("col"):
            col_id, _, name = key.partition(".")
            c = int(col_id[3:])
            prov[c][name] = _parse_scalar(value)
    return SnapshotLibrary(values=values, grid=grid, provenance=prov,
                           n_instances=n_instances, n_times=n_times, notes=notes)


def _parse_scalar(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text
