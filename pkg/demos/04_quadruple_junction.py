"""Four square grains inside a fifth phase.

The quadruple junction at the centre is unstable and splits into two triple
junctions. We follow the phase masses (conserved) and the energy, and write
VTK snapshots for inspection.
"""
import os
import tempfile

import numpy as np

from acpdas import (GmresConfig, ModelParams, PreconditionerKind, assemble, build_uniform_mesh,
                    energy, initial_quadruple, run_simulation)
from acpdas.io import write_stats_csv, write_vtk_snapshot

mesh = build_uniform_mesh(32)
fem = assemble(mesh)
params = ModelParams(5, 0.04)
initial = initial_quadruple(mesh, params)
print("initial phase masses:", np.round(initial.u @ fem.M, 6))
print("initial energy:", energy(initial, fem, params))

out = tempfile.mkdtemp(prefix="quadruple_")
marks = [0.01, 0.02, 0.04]


def snapshot(state, stat):
    while marks and state.t >= marks[0]:
        write_vtk_snapshot(state, mesh, os.path.join(out, f"t_{marks.pop(0):g}.vtk"))


final, stats = run_simulation(params, mesh, fem, initial, T=0.04,
                              precond=PreconditionerKind("p3"), gmres=GmresConfig(1e-10),
                              callback=snapshot)
write_stats_csv(stats, os.path.join(out, "stats.csv"))
print(f"{len(stats)} steps, t = {final.t:.4f}")
print("final phase masses:  ", np.round(final.u @ fem.M, 6))
print("energy at the end:", stats[-1].energy)
print("max GMRES per step:", [s.max_gmres for s in stats])
print("output written to", out)
