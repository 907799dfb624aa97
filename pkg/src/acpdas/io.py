"""Run configuration files, statistics CSV, VTK snapshots and Matrix Market dumps.

Config files are flat ``key = value`` text, one key per line, ``#`` starts a
comment. Lists are comma separated; ``A`` is given row-major.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, fields

import numpy as np
import scipy.io
import scipy.sparse as sp

from .mesh import Mesh
from .model import ModelParams, PhaseState


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")
        self.key = key
        self.line = line


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


@dataclass
class RunConfig:
    dim: int = 2
    n: int = 32
    N: int = 2
    epsilon: float = 0.04
    tau0: float | None = None
    T: float = 0.5
    A: tuple | None = None
    Q: tuple | None = None
    c_mode: str = "auto"
    ic: str = "wellmixed"
    noise: float = 0.05
    seed: int = 0
    preconditioner: str = "p3"
    kblock: str = "direct"
    gmres_tol: float = 1e-10
    max_pdas: int = 50
    mass_constraint: str = "on"
    output_dir: str = "output"
    snapshot_times: tuple = ()
    max_steps: int = 0

    REQUIRED = ("dim", "n", "N", "epsilon")

    def validate(self) -> "RunConfig":
        if self.dim not in (2, 3):
            raise ConfigError(f"dim must be 2 or 3, got {self.dim}", "dim")
        if self.n < 1:
            raise ConfigError("n must be >= 1", "n")
        if self.tau0 is not None and not self.tau0 > 0:
            raise ConfigError("tau0 must be positive", "tau0")
        if not self.T > 0:
            raise ConfigError("T must be positive", "T")
        if self.c_mode != "auto":
            try:
                c = float(self.c_mode)
            except ValueError:
                raise ConfigError("c_mode must be 'auto' or a positive number", "c_mode") from None
            if not c > 0:
                raise ConfigError("c_mode must be positive", "c_mode")
        choices = {"ic": ("wellmixed", "quadruple"), "preconditioner": ("exact", "p1", "p2", "p3"),
                   "kblock": ("direct", "amg3"), "mass_constraint": ("on", "off")}
        for key, allowed in choices.items():
            if getattr(self, key) not in allowed:
                raise ConfigError(f"{key} must be one of {allowed}", key)
        if self.ic == "quadruple" and (self.N != 5 or self.dim != 2):
            raise ConfigError("ic = quadruple needs N = 5 and dim = 2", "ic")
        if not 0 <= self.noise <= 1.0 / self.N:
            raise ConfigError("noise must lie in [0, 1/N]", "noise")
        if not self.gmres_tol > 0:
            raise ConfigError("gmres_tol must be positive", "gmres_tol")
        if self.max_pdas < 1:
            raise ConfigError("max_pdas must be >= 1", "max_pdas")
        if self.max_steps < 0:
            raise ConfigError("max_steps must be >= 0", "max_steps")
        try:
            params = self.model_params()
            if np.linalg.eigvalsh(params.A).max() <= 0:
                raise ValueError("A must have at least one positive eigenvalue")
        except ValueError as exc:
            key = str(exc).split(" ", 1)[0]
            key = {"c": "c_mode"}.get(key, key)
            raise ConfigError(str(exc), key if hasattr(self, key) else None) from None
        return self

    def model_params(self) -> ModelParams:
        A = None
        if self.A is not None:
            if len(self.A) != self.N * self.N:
                raise ValueError(f"A needs {self.N * self.N} entries, got {len(self.A)}")
            A = np.array(self.A).reshape(self.N, self.N)
        c = None if self.c_mode == "auto" else float(self.c_mode)
        return ModelParams(N=self.N, epsilon=self.epsilon, A=A,
                           Q=None if self.Q is None else np.array(self.Q), c=c,
                           mass_constraint=self.mass_constraint == "on")


def _parse_value(name: str, text: str):
    if name in ("A", "Q", "snapshot_times"):
        return _floats(text)
    if name == "tau0":
        return None if text in ("", "auto") else float(text)
    if name in ("dim", "n", "N", "seed", "max_pdas", "max_steps"):
        return int(text)
    if name in ("epsilon", "T", "noise", "gmres_tol"):
        return float(text)
    return text


def _format_value(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_text(text: str, allow_lists: tuple = ()) -> tuple[dict, dict]:
    """Return ``(values, line_numbers)``; keys in ``allow_lists`` keep raw text."""
    known = {f.name for f in fields(RunConfig)}
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw!r}", line=lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", key, lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", key, lineno)
        if key in allow_lists:
            values[key] = val
        else:
            try:
                values[key] = _parse_value(key, val)
            except ValueError:
                raise ConfigError(f"bad value {val!r} for {key!r}", key, lineno) from None
        lines[key] = lineno
    return values, lines


def config_from_dict(values: dict, lines: dict | None = None) -> RunConfig:
    lines = lines or {}
    missing = [k for k in RunConfig.REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}", missing[0])
    cfg = RunConfig(**values)
    try:
        return cfg.validate()
    except ConfigError as exc:
        if exc.key in lines:
            raise ConfigError(str(exc), exc.key, lines[exc.key]) from None
        raise


def load_config(path) -> RunConfig:
    with open(path) as fh:
        values, lines = parse_config_text(fh.read())
    return config_from_dict(values, lines)


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w", newline="\n") as fh:
        for f in fields(RunConfig):
            fh.write(f"{f.name} = {_format_value(getattr(cfg, f.name))}\n")


# ------------------------------------------------------------------ stats CSV

CSV_HEADER = "step,time,tau,pdas_iters,max_gmres,avg_gmres,active_fraction,energy,retries"


def _g(x: float) -> str:
    return f"{x:.17g}"


def summarize(stats) -> tuple[int, float]:
    """Overall ``(max, average)`` GMRES count over every solve of every step."""
    counts = [c for s in stats for c in s.gmres_counts]
    return (max(counts), float(np.mean(counts))) if counts else (0, 0.0)


def write_stats_csv(stats, path) -> None:
    if not stats:
        raise ValueError("no statistics to write")
    with open(path, "w", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for s in stats:
            fh.write(",".join([str(s.step_index), _g(s.time), _g(s.tau), str(s.pdas_iters),
                               str(s.max_gmres), _g(s.avg_gmres), _g(s.active_fraction),
                               _g(s.energy), str(s.retries)]) + "\n")
        mx, avg = summarize(stats)
        fh.write(f"# max_gmres_overall={mx} avg_gmres_overall={_g(avg)}\n")


# ------------------------------------------------------------------ VTK

VTK_CELL_TYPE = {2: 5, 3: 10}


def write_vtk_snapshot(state: PhaseState, mesh: Mesh, path, title: str = "phase field") -> None:
    """Legacy ASCII VTK unstructured grid with per-node phase and multiplier fields."""
    nn, ne = mesh.n_nodes, mesh.n_elements
    k = mesh.dim + 1
    pts = np.zeros((nn, 3))
    pts[:, :mesh.dim] = mesh.nodes
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
           f"POINTS {nn} double"]
    out += [" ".join(_g(v) for v in p) for p in pts]
    out.append(f"CELLS {ne} {ne * (k + 1)}")
    out += [f"{k} " + " ".join(str(int(v)) for v in el) for el in mesh.elements]
    out.append(f"CELL_TYPES {ne}")
    out += [str(VTK_CELL_TYPE[mesh.dim])] * ne
    out.append(f"POINT_DATA {nn}")

    def scalars(name, values):
        out.extend([f"SCALARS {name} double 1", "LOOKUP_TABLE default"])
        out.extend(_g(v) for v in values)

    for i in range(state.N):
        scalars(f"phase_{i + 1}", state.u[i])
    scalars("Lambda", state.Lam)
    for i in range(state.N):
        scalars(f"mu_{i + 1}", state.mu[i])
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


# ------------------------------------------------------------------ Matrix Market

def write_system(system, matrix_path, rhs_path) -> None:
    """Dump an assembled saddle system: matrix in Matrix Market, rhs one value per line."""
    scipy.io.mmwrite(matrix_path, system.matrix(), symmetry="general")
    np.savetxt(rhs_path, system.rhs, fmt="%.17g")


def write_fem_matrices(fem, directory) -> None:
    os.makedirs(directory, exist_ok=True)
    scipy.io.mmwrite(os.path.join(directory, "L.mtx"), fem.L, symmetry="symmetric")
    scipy.io.mmwrite(os.path.join(directory, "M.mtx"), sp.diags(fem.M).tocoo(),
                     symmetry="symmetric")
