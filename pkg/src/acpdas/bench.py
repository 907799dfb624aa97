"""Problem setup from a RunConfig and the GMRES-count benchmark grid."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .fem import assemble
from .io import ConfigError, config_from_dict, parse_config_text, summarize
from .linalg import GmresConfig
from .mesh import build_uniform_mesh
from .model import initial_quadruple, initial_wellmixed
from .precond import PreconditionerKind
from .timeloop import StepFailure, run_simulation

GRID_KEYS = ("n", "epsilon", "N", "preconditioner", "kblock")


@dataclass
class Problem:
    cfg: object
    mesh: object
    fem: object
    params: object
    initial: object

    @property
    def precond(self) -> PreconditionerKind:
        return PreconditionerKind(self.cfg.preconditioner, self.cfg.kblock)

    @property
    def gmres(self) -> GmresConfig:
        return GmresConfig(rel_tol=self.cfg.gmres_tol)


def build_problem(cfg) -> Problem:
    mesh = build_uniform_mesh(cfg.n, cfg.dim)
    fem = assemble(mesh)
    params = cfg.model_params()
    tau0 = cfg.tau0 if cfg.tau0 is not None else cfg.epsilon**2
    if cfg.ic == "quadruple":
        initial = initial_quadruple(mesh, params, tau=tau0)
    else:
        initial = initial_wellmixed(mesh, params, cfg.noise, cfg.seed, tau=tau0)
    return Problem(cfg, mesh, fem, params, initial)


def run_problem(problem: Problem, callback=None):
    cfg = problem.cfg
    return run_simulation(problem.params, problem.mesh, problem.fem, problem.initial, cfg.T,
                          precond=problem.precond, gmres=problem.gmres,
                          max_pdas=cfg.max_pdas, max_steps=cfg.max_steps or None,
                          callback=callback)


def expand_grid(text: str) -> list:
    """Every RunConfig of a grid file; grid keys may hold comma-separated lists."""
    values, lines = parse_config_text(text, allow_lists=GRID_KEYS)
    axes = []
    for key in GRID_KEYS:
        raw = values.pop(key, None)
        if raw is None:
            axes.append([None])
            continue
        items = [v.strip() for v in raw.split(",") if v.strip()]
        if not items:
            raise ConfigError(f"empty list for {key!r}", key, lines.get(key))
        axes.append(items)
    if len(axes[GRID_KEYS.index("N")]) > 1 and ("A" in values or "Q" in values):
        raise ConfigError("A and Q cannot be given when N varies across the grid")
    configs = []
    base = dict(values)
    base.setdefault("dim", 2)
    for combo in itertools.product(*axes):
        cell = dict(base)
        for key, val in zip(GRID_KEYS, combo):
            if val is None:
                continue
            cell[key] = {"n": int, "N": int, "epsilon": float}.get(key, str)(val)
        configs.append(config_from_dict(cell, lines))
    return configs


def bench_table(configs) -> list:
    """Run every cell; failures are recorded in the cell and the grid continues."""
    rows = []
    for cfg in configs:
        row = {"n": cfg.n, "epsilon": cfg.epsilon, "N": cfg.N,
               "preconditioner": cfg.preconditioner, "kblock": cfg.kblock}
        try:
            _, stats = run_problem(build_problem(cfg))
            mx, avg = summarize(stats)
            row.update(max_gmres=mx, avg_gmres=avg, steps=len(stats),
                       cell=format_cell(mx, avg), status="ok")
        except (StepFailure, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
            row.update(max_gmres=None, avg_gmres=None, steps=len(getattr(exc, "stats", []) or []),
                       cell="failed", status=str(exc).replace(",", ";"))
        rows.append(row)
    return rows


def format_cell(mx: int, avg: float) -> str:
    """``max/avg`` with the average rounded to an integer; a single number if equal."""
    a = int(round(avg))
    return str(mx) if a == mx else f"{mx}/{a}"


COLUMNS = ("n", "epsilon", "N", "preconditioner", "kblock", "steps", "max_gmres", "avg_gmres",
           "cell", "status")


def table_csv(rows) -> str:
    lines = [",".join(COLUMNS)]
    for r in rows:
        lines.append(",".join("" if r.get(c) is None else
                              (f"{r[c]:.17g}" if isinstance(r[c], float) else str(r[c]))
                              for c in COLUMNS))
    return "\n".join(lines) + "\n"


def table_text(rows) -> str:
    cols = ("n", "epsilon", "N", "preconditioner", "kblock", "steps", "cell")
    cells = [[str(c) for c in cols]] + [[str(r.get(c, "")) for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    return "\n".join("  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells) + "\n"
