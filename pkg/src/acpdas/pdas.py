"""Primal-dual active set iteration for one implicit time step.

Unknowns of the reduced saddle-point system are ordered as
``[u_1|D_1, ..., u_N|D_N, lam_1..lam_{N-1}, Lam|D]``. Every phase-field row
is multiplied by ``M_j`` so the assembled matrix is symmetric.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fem import FemMatrices
from .model import ModelParams, PhaseState


class PdasError(RuntimeError):
    """Base class for failures of the active-set iteration."""


class StructureError(PdasError):
    """Active sets that admit no consistent reduced system."""


class PdasNonConvergence(PdasError):
    def __init__(self, iterations: int):
        super().__init__(f"active sets did not settle within {iterations} iterations")
        self.iterations = iterations


@dataclass(frozen=True)
class ActiveSets:
    """Boolean masks of shape ``(N, n_nodes)``."""

    active: np.ndarray

    @property
    def inactive(self) -> np.ndarray:
        return ~self.active

    @property
    def interface(self) -> np.ndarray:
        inactive = self.inactive
        return inactive & (inactive.sum(axis=0) >= 2)[None, :]

    @property
    def interface_union(self) -> np.ndarray:
        return self.inactive.sum(axis=0) >= 2

    @property
    def omega(self) -> int:
        return int(self.interface.sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, ActiveSets) and np.array_equal(self.active, other.active)

    def __hash__(self):
        return hash(self.active.tobytes())


def update_active_sets(state: PhaseState, c: float) -> ActiveSets:
    """``A_i = {j : c u_ij - mu_ij < 0}``."""
    return ActiveSets(active=(c * state.u - state.mu) < 0)


init_active_sets = update_active_sets


def fix_known_values(sets: ActiveSets, state: PhaseState) -> PhaseState:
    """Pin ``u = 0`` on active nodes, ``u = 1`` on pure nodes, ``mu = 0`` on inactive ones."""
    out = state.copy()
    pure = sets.inactive & ~sets.interface
    out.u[sets.active] = 0.0
    out.u[pure] = 1.0
    out.mu[sets.inactive] = 0.0
    return out


@dataclass
class SaddleSystem:
    """Reduced system ``[[K, B1^T, B2^T], [B1, 0, 0], [B2, 0, 0]] x = rhs``."""

    Kblocks: list
    B1: sp.csr_matrix
    B2: sp.csr_matrix
    rhs: np.ndarray
    phase_nodes: list          # node indices of D_i, per phase
    interface_nodes: np.ndarray
    mass: list                 # restricted mass vectors m_i
    offsets: np.ndarray        # start of each phase block in x

    @property
    def N(self) -> int:
        return len(self.Kblocks)

    @property
    def omega(self) -> int:
        return int(self.offsets[-1])

    @property
    def n_lam(self) -> int:
        return self.B1.shape[0]

    @property
    def n_constraints(self) -> int:
        return self.B1.shape[0] + self.B2.shape[0]

    @property
    def size(self) -> int:
        return self.omega + self.n_constraints

    @property
    def trivial(self) -> bool:
        return self.omega == 0

    @property
    def Kdiag(self) -> sp.csr_matrix:
        return sp.block_diag(self.Kblocks, format="csr")

    @property
    def B(self) -> sp.csr_matrix:
        return sp.vstack([self.B1, self.B2], format="csr")

    def matrix(self) -> sp.csr_matrix:
        B = self.B
        return sp.bmat([[self.Kdiag, B.T], [B, None]], format="csr")

    def mass_on_interface(self) -> np.ndarray:
        """``M_j`` for the interface nodes, from the diagonal of ``B2 B2^T``."""
        counts = np.diff(self.B2.indptr)
        return np.sqrt(np.asarray(self.B2.multiply(self.B2).sum(axis=1)).ravel() / counts)

    def split(self, x: np.ndarray):
        """Return (per-phase u on D_i, lam_1..lam_{N-1}, Lam on D)."""
        w = self.omega
        us = [x[self.offsets[i]:self.offsets[i + 1]] for i in range(self.N)]
        return us, x[w:w + self.n_lam], x[w + self.n_lam:]


def _lam_full(lam_reduced: np.ndarray, N: int) -> np.ndarray:
    lam = np.zeros(N)
    if lam_reduced.size:
        lam[:N - 1] = lam_reduced
        lam[N - 1] = -lam_reduced.sum()
    return lam


def build_saddle_system(sets: ActiveSets, state: PhaseState, fem: FemMatrices,
                        params: ModelParams) -> SaddleSystem:
    """Assemble the reduced system for the current active sets.

    ``state`` must already carry the pinned values of :func:`fix_known_values`.
    """
    N = params.N
    inactive = sets.inactive
    n_free = inactive.sum(axis=0)
    if np.any(n_free == 0):
        j = int(np.flatnonzero(n_free == 0)[0])
        raise StructureError(f"node {j} is active in every phase")
    Dmask = sets.interface
    Dunion = n_free >= 2
    eps2 = params.epsilon ** 2
    tau = state.tau
    M, L = fem.M, fem.L

    phase_nodes = [np.flatnonzero(Dmask[i]) for i in range(N)]
    sizes = np.array([d.size for d in phase_nodes])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    omega = int(offsets[-1])
    dnodes = np.flatnonzero(Dunion)
    drow = np.full(fem.n_nodes, -1)
    drow[dnodes] = np.arange(dnodes.size)

    explicit = params.A @ state.u_prev
    fixed = np.where(Dmask, 0.0, state.u)

    Kblocks, mass, rhs_u = [], [], []
    for i, d in enumerate(phase_nodes):
        Ld = L[d]
        Kblocks.append((eps2 / tau * sp.diags(M[d]) + eps2 * Ld[:, d]).tocsr())
        mass.append(M[d].copy())
        rhs_u.append(M[d] * (eps2 / tau * state.u_prev[i, d] + explicit[i, d])
                     - eps2 * (Ld @ fixed[i]))

    rows, cols, vals = [], [], []
    rhs_lam = np.zeros(0)
    if params.mass_constraint:
        total = M.sum()
        fixed_mass = fixed @ M
        rhs_lam = np.empty(N - 1)
        for k in range(N - 1):
            d = phase_nodes[k]
            rows += [np.full(d.size, k)]
            cols += [offsets[k] + np.arange(d.size)]
            vals += [-M[d]]
            dN = phase_nodes[N - 1]
            rows += [np.full(dN.size, k)]
            cols += [offsets[N - 1] + np.arange(dN.size)]
            vals += [M[dN]]
            rhs_lam[k] = -(total * (params.Q[k] - params.Q[N - 1])
                           - fixed_mass[k] + fixed_mass[N - 1])
        B1 = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(N - 1, omega))
    else:
        B1 = sp.csr_matrix((0, omega))

    rows = np.concatenate([drow[d] for d in phase_nodes]) if omega else np.zeros(0, int)
    cols = np.arange(omega)
    vals = np.concatenate([-M[d] for d in phase_nodes]) if omega else np.zeros(0)
    B2 = sp.csr_matrix((vals, (rows, cols)), shape=(dnodes.size, omega))
    B2.sort_indices()
    B1.sort_indices()
    rhs_Lam = -M[dnodes] * (1.0 - np.where(Dmask, 0.0, state.u).sum(axis=0)[dnodes])

    if not omega and params.mass_constraint and np.abs(rhs_lam).max() > 1e-10 * M.sum():
        raise StructureError("no interface nodes left to meet the mean-value constraint")
    rhs = np.concatenate(rhs_u + [rhs_lam, rhs_Lam]) if omega else np.zeros(0)
    return SaddleSystem(Kblocks=Kblocks, B1=B1, B2=B2, rhs=rhs, phase_nodes=phase_nodes,
                        interface_nodes=dnodes, mass=mass, offsets=offsets)


def _residual_terms(state: PhaseState, fem: FemMatrices, params: ModelParams) -> np.ndarray:
    """Mass-normalised PDE residual without multipliers, shape (N, n_nodes)."""
    eps2 = params.epsilon ** 2
    Lu = (fem.L @ state.u.T).T
    return (eps2 / state.tau * (state.u - state.u_prev) + eps2 * Lu / fem.M[None, :]
            - params.A @ state.u_prev)


def recover_Lambda(sets: ActiveSets, state: PhaseState, fem: FemMatrices,
                   params: ModelParams) -> np.ndarray:
    """Saturation multiplier at pure-phase nodes, from the free phase's equation.

    Values on the interface are left as they are in ``state.Lam``.
    """
    inactive = sets.inactive
    n_free = inactive.sum(axis=0)
    if np.any(n_free == 0):
        raise StructureError(f"node {int(np.flatnonzero(n_free == 0)[0])} has no free phase")
    pure = np.flatnonzero(n_free == 1)
    phase = np.argmax(inactive[:, pure], axis=0)
    r = _residual_terms(state, fem, params)
    Lam = state.Lam.copy()
    Lam[pure] = r[phase, pure] - state.lam[phase]
    return Lam


def recover_mu(sets: ActiveSets, state: PhaseState, fem: FemMatrices,
               params: ModelParams) -> np.ndarray:
    """Obstacle multipliers on the active sets; zero elsewhere."""
    r = _residual_terms(state, fem, params)
    mu = r - state.lam[:, None] - state.Lam[None, :]
    return np.where(sets.active, mu, 0.0)


@dataclass
class SweepStats:
    gmres_iterations: int
    residual: float
    omega: int
    n_active: int


def kkt_report(state: PhaseState, fem: FemMatrices, params: ModelParams) -> dict:
    """Worst violations of saturation, sign, complementarity and the PDE rows."""
    M = fem.M
    r = _residual_terms(state, fem, params) - state.mu - state.lam[:, None] - state.Lam[None, :]
    return {
        "saturation": float(np.abs(state.u.sum(axis=0) - 1.0).max()),
        "min_u": float(state.u.min()),
        "min_mu": float(state.mu.min()),
        "complementarity": float(np.abs(np.einsum("ij,ij,j->", state.u, state.mu, M))),
        "pde_residual": float(np.abs(r).max()),
    }


def pdas_step(state: PhaseState, sets: ActiveSets, fem: FemMatrices, params: ModelParams,
              solver, dump=None) -> tuple[PhaseState, ActiveSets, SweepStats]:
    """One sweep with active sets ``sets``; returns the new iterate and next sets.

    ``solver(system) -> (x, iterations, residual)``.
    """
    st = fix_known_values(sets, state)
    system = build_saddle_system(sets, st, fem, params)
    if dump is not None:
        dump(system)
    if system.trivial:
        its, res = 0, 0.0
        st.lam[:] = 0.0
    else:
        x, its, res = solver(system)
        us, lam, Lam = system.split(x)
        for i, d in enumerate(system.phase_nodes):
            st.u[i, d] = us[i]
        st.lam = _lam_full(lam, params.N)
        st.Lam = st.Lam.copy()
        st.Lam[system.interface_nodes] = Lam
    st.Lam = recover_Lambda(sets, st, fem, params)
    st.mu = recover_mu(sets, st, fem, params)
    nxt = update_active_sets(st, params.threshold(fem.h))
    return st, nxt, SweepStats(its, res, system.omega, int(sets.active.sum()))


def pdas_solve_timestep(state: PhaseState, fem: FemMatrices, params: ModelParams, solver,
                        max_iter: int = 50, dump_dir: str | None = None):
    """Advance one implicit step of size ``state.tau`` from ``state.u``.

    Returns ``(new_state, sweeps, sweep_stats, final_sets)``; ``new_state.u_prev``
    holds the input field and ``new_state.t`` is not advanced.
    """
    current = state.copy()
    current.u_prev = state.u.copy()
    sets = init_active_sets(current, params.threshold(fem.h))
    history = []
    dump = None
    for k in range(max_iter):
        if dump_dir is not None:
            dump = _make_dump(dump_dir, k)
        current, nxt, stats = pdas_step(current, sets, fem, params, solver, dump=dump)
        history.append(stats)
        if nxt == sets:
            return current, k + 1, history, sets
        sets = nxt
    raise PdasNonConvergence(max_iter)


def _make_dump(directory: str, k: int):
    from .io import write_system

    def dump(system):
        write_system(system, os.path.join(directory, f"K_{k}.mtx"),
                     os.path.join(directory, f"rhs_{k}.txt"))
    return dump
