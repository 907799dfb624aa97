"""Why two-phase GMRES needs three iterations.

For two phases the preconditioned saddle operator ``K P3^{-1}`` has only the
eigenvalues 1 and a single outlier ``a``, which we compute from the mass
vector and compare against a dense eigensolve.
"""
import numpy as np

from acpdas import (GmresConfig, ModelParams, PreconditionerKind, SaddleSolver, assemble,
                    build_uniform_mesh, initial_wellmixed)
from acpdas.pdas import build_saddle_system, fix_known_values, update_active_sets
from acpdas.precond import preconditioned_matrix, two_phase_spectrum

mesh = build_uniform_mesh(8)
fem = assemble(mesh)
params = ModelParams(2, 0.04)
state = initial_wellmixed(mesh, params, noise=0.0, tau=0.01)
sets = update_active_sets(state, params.threshold(fem.h))
system = build_saddle_system(sets, fix_known_values(sets, state), fem, params)
print(f"{system.size} unknowns, every node on the interface: {system.omega == 2 * mesh.n_nodes}")

eig, a = two_phase_spectrum(system)
dist = np.minimum(np.abs(eig - 1), np.abs(eig - a))
print(f"a = {a:.12f}")
print(f"largest distance of an eigenvalue to {{1, a}}: {dist.max():.2e}")

# The eigenvalue 1 is defective: a plain dense eigensolve of the same matrix
# smears it by roughly sqrt(machine epsilon).
raw = np.linalg.eigvals(preconditioned_matrix(system))
raw_dist = np.minimum(np.abs(raw - 1), np.abs(raw - a))
print(f"unstructured eigensolve distance: {raw_dist.max():.2e}")

for kind in ("p3", "p2", "p1", "exact"):
    _, its, res = SaddleSolver(PreconditionerKind(kind), GmresConfig(1e-10))(system)
    print(f"{kind:6s} GMRES iterations {its:3d}  residual {res:.1e}")
