"""Command line: ``acpdas run|bench|spectrum|export-system``."""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .bench import bench_table, build_problem, expand_grid, run_problem, table_csv, table_text
from .io import ConfigError, load_config, write_stats_csv, write_system, write_vtk_snapshot
from .pdas import build_saddle_system, fix_known_values, init_active_sets, pdas_step
from .precond import SaddleSolver, build_schur_blocks, two_phase_spectrum
from .timeloop import StepFailure, conserving_params

log = logging.getLogger("acpdas")


def _first_step_state(problem):
    params = conserving_params(problem.params, problem.initial, problem.fem)
    state = problem.initial.copy()
    state.u_prev = state.u.copy()
    return state, params


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    problem = build_problem(cfg)
    out = args.output or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    pending = sorted(cfg.snapshot_times)

    def snapshot(state, stats):
        while pending and state.t >= pending[0]:
            t = pending.pop(0)
            write_vtk_snapshot(state, problem.mesh, os.path.join(out, f"snapshot_{t:g}.vtk"))

    if cfg.dim == 2 and 0.0 in pending:
        pending.remove(0.0)
        write_vtk_snapshot(problem.initial, problem.mesh, os.path.join(out, "snapshot_0.vtk"))
    try:
        state, stats = run_problem(problem, callback=snapshot if cfg.dim == 2 else None)
    except StepFailure as exc:
        if exc.stats:
            write_stats_csv(exc.stats, os.path.join(out, "stats.csv"))
        print(f"error: {exc}", file=sys.stderr)
        return 2
    write_stats_csv(stats, os.path.join(out, "stats.csv"))
    if cfg.dim == 2:
        write_vtk_snapshot(state, problem.mesh, os.path.join(out, "final.vtk"))
    mx = max(c for s in stats for c in s.gmres_counts)
    print(f"{len(stats)} steps to t={state.t:.6g}; max GMRES {mx}; output in {out}")
    return 0


def cmd_bench(args) -> int:
    with open(args.grid) as fh:
        configs = expand_grid(fh.read())
    rows = bench_table(configs)
    text = table_text(rows)
    print(text, end="")
    if args.output:
        os.makedirs(args.output, exist_ok=True)
        with open(os.path.join(args.output, "bench.csv"), "w", newline="\n") as fh:
            fh.write(table_csv(rows))
        with open(os.path.join(args.output, "bench.txt"), "w", newline="\n") as fh:
            fh.write(text)
    return 0 if all(r["status"] == "ok" for r in rows) else 1


def cmd_spectrum(args) -> int:
    cfg = load_config(args.config)
    if cfg.N != 2:
        raise ConfigError("spectrum needs N = 2", "N")
    problem = build_problem(cfg)
    state, params = _first_step_state(problem)
    sets = init_active_sets(state, params.threshold(problem.fem.h))
    st = fix_known_values(sets, state)
    system = build_saddle_system(sets, st, problem.fem, params)
    eig, a = two_phase_spectrum(system, build_schur_blocks(system))
    dist = np.minimum(np.abs(eig - 1.0), np.abs(eig - a))
    out = args.output or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "spectrum.csv")
    with open(path, "w", newline="\n") as fh:
        fh.write("real,imag\n")
        for z in eig:
            fh.write(f"{z.real:.17g},{z.imag:.17g}\n")
    print(f"a = {a:.17g}; {eig.size} eigenvalues; max distance to {{1, a}} = {dist.max():.3e}")
    print(f"eigenvalues written to {path}")
    return 0


def cmd_export(args) -> int:
    cfg = load_config(args.config)
    problem = build_problem(cfg)
    state, params = _first_step_state(problem)
    solver = SaddleSolver(problem.precond, problem.gmres)
    sets = init_active_sets(state, params.threshold(problem.fem.h))
    out = args.output or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    for k in range(args.step + 1):
        if k == args.step:
            st = fix_known_values(sets, state)
            system = build_saddle_system(sets, st, problem.fem, params)
            mpath, rpath = os.path.join(out, f"K_{k}.mtx"), os.path.join(out, f"rhs_{k}.txt")
            write_system(system, mpath, rpath)
            print(f"wrote {mpath} ({system.size} unknowns) and {rpath}")
            return 0
        state, nxt, _ = pdas_step(state, sets, problem.fem, params, solver)
        if nxt == sets:
            print(f"error: PDAS converged after {k + 1} sweeps; no system {args.step}",
                  file=sys.stderr)
            return 1
        sets = nxt
    return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acpdas", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one simulation")
    r.add_argument("config")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_run)
    b = sub.add_parser("bench", help="GMRES-count table over a parameter grid")
    b.add_argument("grid")
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_bench)
    s = sub.add_parser("spectrum", help="two-phase eigenvalues of K P3^-1")
    s.add_argument("config")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_spectrum)
    e = sub.add_parser("export-system", help="dump K^k and rhs of the first time step")
    e.add_argument("config")
    e.add_argument("--step", type=int, default=0)
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
