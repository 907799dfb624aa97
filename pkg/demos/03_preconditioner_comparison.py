"""GMRES counts of the block preconditioners during grain coarsening.

Runs a few time steps from well-mixed data for 2, 4 and 6 phases and prints
the ``max/avg`` GMRES count per preconditioner.
"""
from acpdas import (GmresConfig, ModelParams, PreconditionerKind, assemble, build_uniform_mesh,
                    initial_wellmixed, run_simulation)
from acpdas.bench import format_cell
from acpdas.io import summarize

mesh = build_uniform_mesh(24)
fem = assemble(mesh)

print("phases   p1      p2      p3      p3,amg")
for N in (2, 4, 6):
    params = ModelParams(N, 0.04)
    initial = initial_wellmixed(mesh, params, noise=0.05, seed=0)
    cells = []
    for kind, mode in (("p1", "direct"), ("p2", "direct"), ("p3", "direct"), ("p3", "amg3")):
        _, stats = run_simulation(params, mesh, fem, initial, T=1.0, max_steps=10,
                                  precond=PreconditionerKind(kind, mode),
                                  gmres=GmresConfig(1e-10))
        cells.append(format_cell(*summarize(stats)))
    print(f"{N:6d}   " + "".join(f"{c:8s}" for c in cells))
