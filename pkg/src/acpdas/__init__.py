"""Solver for multiphase obstacle Allen-Cahn systems with mean-value constraints.

A primal-dual active set outer iteration produces symmetric saddle-point
systems that are solved by GMRES with Schur-complement block preconditioners.
"""
from .fem import FemMatrices, assemble, assemble_lumped_mass, assemble_stiffness, lumped_inner
from .linalg import GmresConfig, amg_apply, amg_setup, direct_solve, gmres
from .mesh import Mesh, build_uniform_mesh
from .model import (ModelParams, PhaseState, energy, initial_quadruple, initial_wellmixed,
                    project_simplex)
from .pdas import ActiveSets, SaddleSystem, pdas_solve_timestep, pdas_step
from .precond import (PreconditionerKind, Preconditioner, SaddleSolver, build_schur_blocks,
                      two_phase_spectrum)
from .timeloop import SolveStats, adapt_tau, run_simulation

__all__ = [
    "FemMatrices", "assemble", "assemble_lumped_mass", "assemble_stiffness", "lumped_inner",
    "GmresConfig", "amg_apply", "amg_setup", "direct_solve", "gmres",
    "Mesh", "build_uniform_mesh",
    "ModelParams", "PhaseState", "energy", "initial_quadruple", "initial_wellmixed",
    "project_simplex",
    "ActiveSets", "SaddleSystem", "pdas_solve_timestep", "pdas_step",
    "PreconditionerKind", "Preconditioner", "SaddleSolver", "build_schur_blocks",
    "two_phase_spectrum",
    "SolveStats", "adapt_tau", "run_simulation",
]

__version__ = "0.1.0"
