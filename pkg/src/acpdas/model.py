"""Model parameters, phase-field state, initial data and the energy diagnostic."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .fem import FemMatrices
from .mesh import Mesh


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the multiphase obstacle Allen-Cahn problem.

    ``A`` only has to be symmetric here (``A = 0`` is a useful test case);
    run configurations additionally require a positive eigenvalue.
    ``c`` is the active-set threshold; ``None`` means ``2 / h**2`` resolved
    against the mesh at solve time. With ``mass_constraint=False`` the
    non-conserved problem is solved (no mean-value rows, no ``lambda``).
    """

    N: int
    epsilon: float
    A: np.ndarray = None
    Q: np.ndarray = None
    c: float | None = None
    mass_constraint: bool = True

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"N must be an integer >= 2, got {self.N!r}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        N = int(self.N)
        A = np.eye(N) if self.A is None else np.array(self.A, dtype=float)
        Q = np.full(N, 1.0 / N) if self.Q is None else np.array(self.Q, dtype=float)
        if A.shape != (N, N):
            raise ValueError(f"A must be {N}x{N}, got shape {A.shape}")
        if not np.array_equal(A, A.T):
            raise ValueError("A must be symmetric")
        if Q.shape != (N,):
            raise ValueError(f"Q must have length {N}, got shape {Q.shape}")
        if Q.min() < 0 or abs(Q.sum() - 1.0) > 1e-12:
            raise ValueError("Q must lie in the Gibbs simplex (Q >= 0, sum(Q) = 1)")
        if self.c is not None and not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c!r}")
        A.setflags(write=False)
        Q.setflags(write=False)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Q", Q)

    def threshold(self, h: float) -> float:
        return self.c if self.c is not None else 2.0 / h**2


@dataclass
class PhaseState:
    """Nodal phase fields ``u`` (N x n_nodes) with their multipliers.

    ``lam`` holds all N mean-value multipliers; the last one is always
    minus the sum of the others.
    """

    u: np.ndarray
    u_prev: np.ndarray
    mu: np.ndarray
    lam: np.ndarray
    Lam: np.ndarray
    t: float = 0.0
    tau: float = 0.0

    @property
    def N(self) -> int:
        return self.u.shape[0]

    def copy(self) -> "PhaseState":
        return PhaseState(
            u=self.u.copy(), u_prev=self.u_prev.copy(), mu=self.mu.copy(),
            lam=self.lam.copy(), Lam=self.Lam.copy(), t=self.t, tau=self.tau,
        )

    @classmethod
    def from_fields(cls, u, tau: float = 0.0, t: float = 0.0) -> "PhaseState":
        u = np.array(u, dtype=float)
        N, nn = u.shape
        return cls(u=u, u_prev=u.copy(), mu=np.zeros((N, nn)), lam=np.zeros(N),
                   Lam=np.zeros(nn), t=t, tau=tau)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum(x) = 1}``.

    Works row-wise on 2-D input.
    """
    v = np.asarray(v, dtype=float)
    x = np.atleast_2d(v)
    n = x.shape[1]
    s = -np.sort(-x, axis=1)
    css = np.cumsum(s, axis=1) - 1.0
    k = np.arange(1, n + 1)
    cond = s - css / k > 0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(x.shape[0]), rho] / (rho + 1)
    out = np.maximum(x - theta[:, None], 0.0)
    # tidy the sum for exactness
    out /= out.sum(axis=1, keepdims=True)
    return out.reshape(v.shape)


def initial_wellmixed(mesh: Mesh, params: ModelParams, noise: float = 0.05,
                      seed: int = 0, tau: float | None = None) -> PhaseState:
    """Random perturbation of ``Q`` at every node, projected onto the simplex."""
    N = params.N
    if not 0 <= noise <= 1.0 / N:
        raise ValueError(f"noise must lie in [0, 1/N], got {noise!r}")
    rng = np.random.default_rng(seed)
    xi = rng.uniform(-noise, noise, size=(mesh.n_nodes, N))
    if noise == 0:
        u = np.tile(params.Q[:, None], (1, mesh.n_nodes))
    else:
        u = project_simplex(params.Q[None, :] + xi).T.copy()
    return PhaseState.from_fields(u, tau=params.epsilon**2 if tau is None else tau)


def initial_quadruple(mesh: Mesh, params: ModelParams, tau: float | None = None) -> PhaseState:
    """Four square phases in ``[1/4, 3/4]^2`` surrounded by a fifth phase.

    Quadrants are numbered lower-left, lower-right, upper-left, upper-right.
    Cells are half-open, so a boundary node belongs to the region on its
    upper/right side.
    """
    if params.N != 5:
        raise ValueError(f"quadruple-junction data needs N = 5, got {params.N}")
    if mesh.dim != 2:
        raise ValueError("quadruple-junction data is two-dimensional")
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    inside = (x >= 0.25) & (x < 0.75) & (y >= 0.25) & (y < 0.75)
    quadrant = (x >= 0.5).astype(int) + 2 * (y >= 0.5).astype(int)
    u = np.zeros((5, mesh.n_nodes))
    u[4, ~inside] = 1.0
    u[quadrant[inside], np.flatnonzero(inside)] = 1.0
    return PhaseState.from_fields(u, tau=params.epsilon**2 if tau is None else tau)


def mean_values(u: np.ndarray, fem: FemMatrices) -> np.ndarray:
    """Per-phase discrete mean ``sum_j M_j u_ij / |Omega|``."""
    return (u @ fem.M) / fem.M.sum()


def energy(state: PhaseState, fem: FemMatrices, params: ModelParams,
           tol: float = 1e-6) -> float:
    """Ginzburg-Landau energy with the multi-obstacle potential.

    Diagnostic only: a state off the simplex triggers a warning but the
    smooth part of the energy is still returned.
    """
    u = state.u
    off = np.abs(u.sum(axis=0) - 1.0).max() > tol or u.min() < -tol
    if off:
        warnings.warn("energy evaluated at a state outside the Gibbs simplex", RuntimeWarning,
                      stacklevel=2)
    eps = params.epsilon
    grad = 0.5 * eps * float(np.einsum("ij,ij->", u, (fem.L @ u.T).T))
    pot = -0.5 * np.einsum("ij,ik,kj->j", u, params.A, u)
    return grad + float(fem.M @ pot) / eps
