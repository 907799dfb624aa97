"""P1 matrices on the unit square.

Builds the structured mesh, assembles the stiffness matrix and the lumped
mass, and checks a few properties by hand.
"""
import numpy as np

from acpdas import assemble, build_uniform_mesh, lumped_inner

mesh = build_uniform_mesh(1)
fem = assemble(mesh)
print("n = 1 nodes:\n", mesh.nodes)
print("stiffness:\n", fem.L.toarray())
print("lumped mass:", fem.M)

# Constants lie in the kernel of L and the masses add up to |Omega| = 1.
for n in (4, 16, 64):
    fem = assemble(build_uniform_mesh(n))
    print(f"n={n:3d}  |L 1|_max = {np.abs(fem.L @ np.ones(fem.n_nodes)).max():.1e}"
          f"  sum M = {fem.M.sum():.15f}")

# Dirichlet energy of sin(pi x) sin(pi y) converges to pi^2 / 2.
for n in (8, 16, 32, 64):
    mesh = build_uniform_mesh(n)
    fem = assemble(mesh)
    f = np.sin(np.pi * mesh.nodes[:, 0]) * np.sin(np.pi * mesh.nodes[:, 1])
    print(f"n={n:3d}  f^T L f = {f @ (fem.L @ f):.6f}   (pi^2/2 = {np.pi**2 / 2:.6f})"
          f"   (f, f)_h = {lumped_inner(f, f, fem.M):.6f}")
