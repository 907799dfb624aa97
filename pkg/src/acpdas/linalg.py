"""Inner solvers: right-preconditioned GMRES, sparse LU, smoothed-aggregation AMG."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class GmresError(RuntimeError):
    """GMRES hit ``max_iter``; carries the best iterate."""

    def __init__(self, x, iterations, residual):
        super().__init__(f"GMRES did not converge in {iterations} iterations "
                         f"(relative residual {residual:.3e})")
        self.x = x
        self.iterations = iterations
        self.residual = residual


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, pivot: int, message: str = "matrix is singular"):
        super().__init__(f"{message} (pivot {pivot})")
        self.pivot = pivot


@dataclass(frozen=True)
class GmresConfig:
    rel_tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


class GmresResult(NamedTuple):
    x: np.ndarray
    iterations: int
    residual: float
    history: list


def _as_action(op) -> Callable[[np.ndarray], np.ndarray]:
    if op is None:
        return lambda v: v
    if callable(op) and not hasattr(op, "shape"):
        return op
    return lambda v: op @ v


def gmres(A, b, precond=None, cfg: GmresConfig = GmresConfig()) -> GmresResult:
    """Full (unrestarted) GMRES with right preconditioning and zero start.

    ``A`` and ``precond`` may be matrices or callables. Arnoldi uses modified
    Gram-Schmidt with a second orthogonalisation pass. Convergence is
    declared on the true residual ``||b - A x|| / ||b||``.
    """
    matvec = _as_action(A)
    apply_p = _as_action(precond)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    beta = np.linalg.norm(b)
    if beta == 0.0:
        return GmresResult(np.zeros(n), 0, 0.0, [0.0])

    m = cfg.max_iter
    V = np.zeros((m + 1, n))
    H = np.zeros((m + 1, m))
    cs = np.zeros(m)
    sn = np.zeros(m)
    g = np.zeros(m + 1)
    g[0] = beta
    V[0] = b / beta
    history = [1.0]
    x = np.zeros(n)
    res = 1.0

    for j in range(m):
        w = matvec(apply_p(V[j]))
        for _ in range(2):
            for i in range(j + 1):
                hij = V[i] @ w
                H[i, j] += hij
                w -= hij * V[i]
        H[j + 1, j] = np.linalg.norm(w)
        breakdown = H[j + 1, j] <= 1e-14 * np.abs(H[: j + 1, j]).max(initial=beta)
        if not breakdown:
            V[j + 1] = w / H[j + 1, j]

        for i in range(j):
            t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = t
        r = np.hypot(H[j, j], H[j + 1, j])
        cs[j], sn[j] = H[j, j] / r, H[j + 1, j] / r
        H[j, j] = r
        H[j + 1, j] = 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        est = abs(g[j + 1]) / beta
        history.append(est)

        if est <= cfg.rel_tol or breakdown or j == m - 1:
            y = sla.solve_triangular(H[: j + 1, : j + 1], g[: j + 1])
            x = apply_p(V[: j + 1].T @ y)
            res = np.linalg.norm(b - matvec(x)) / beta
            if res <= cfg.rel_tol:
                return GmresResult(x, j + 1, res, history)
            if breakdown:
                break
    raise GmresError(x, len(history) - 1, res)


def _check_pivots(lu, n: int) -> None:
    d = np.abs(lu.U.diagonal())
    scale = d.max(initial=0.0)
    small = np.flatnonzero(d <= 1e-13 * scale) if scale > 0 else np.arange(n)
    if small.size:
        raise SingularMatrixError(int(lu.perm_c[small[0]]))


def factorize(A):
    """Sparse LU with a singularity check; returns the ``solve`` callable."""
    A = sp.csc_matrix(A)
    n = A.shape[0]
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SingularMatrixError(-1, str(exc)) from None
    _check_pivots(lu, n)
    return lu.solve


def direct_solve(A, b) -> np.ndarray:
    """Solve ``A x = b`` by sparse LU; singular matrices raise."""
    return factorize(A)(np.asarray(b, dtype=float))


# ---------------------------------------------------------------- AMG


@dataclass
class AmgLevel:
    A: sp.csr_matrix
    P: sp.csr_matrix | None = None
    R: sp.csr_matrix | None = None
    forward: Callable | None = None
    backward: Callable | None = None


@dataclass
class AmgHierarchy:
    levels: list
    coarse_solve: Callable
    cycles_per_apply: int = 3

    @property
    def n_levels(self) -> int:
        return len(self.levels)


def strength_graph(A: sp.csr_matrix, theta: float = 0.08) -> sp.csr_matrix:
    """Symmetric strength of connection, ``|a_ij| >= theta sqrt(a_ii a_jj)``."""
    C = sp.coo_matrix(A)
    d = np.abs(A.diagonal())
    keep = (C.row != C.col) & (np.abs(C.data) >= theta * np.sqrt(d[C.row] * d[C.col]))
    S = sp.csr_matrix((np.ones(keep.sum()), (C.row[keep], C.col[keep])), shape=A.shape)
    S.sort_indices()
    return S


def standard_aggregation(S: sp.csr_matrix) -> np.ndarray:
    """Greedy aggregation: seeds with fully free neighbourhoods, then attach."""
    n = S.shape[0]
    ptr, idx = S.indptr, S.indices
    agg = np.full(n, -1, dtype=np.int64)
    count = 0
    for i in range(n):
        if agg[i] >= 0:
            continue
        nb = idx[ptr[i]:ptr[i + 1]]
        if nb.size and np.all(agg[nb] < 0):
            agg[i] = count
            agg[nb] = count
            count += 1
    for i in range(n):
        if agg[i] >= 0:
            continue
        nb = idx[ptr[i]:ptr[i + 1]]
        owned = nb[agg[nb] >= 0]
        if owned.size:
            agg[i] = -2 - agg[owned[0]]  # mark, resolve after the pass
    marked = agg <= -2
    agg[marked] = -2 - agg[marked]
    for i in range(n):
        if agg[i] < 0:
            agg[i] = count
            nb = idx[ptr[i]:ptr[i + 1]]
            agg[nb[agg[nb] < 0]] = count
            count += 1
    return agg


def _spectral_radius_dinv_a(A: sp.csr_matrix, iters: int = 20) -> float:
    dinv = 1.0 / A.diagonal()
    rng = np.random.default_rng(0)
    v = rng.standard_normal(A.shape[0])
    lam = 1.0
    for _ in range(iters):
        w = dinv * (A @ v)
        lam = np.linalg.norm(w) / np.linalg.norm(v)
        v = w / np.linalg.norm(w)
    return lam


def amg_setup(A, max_levels: int = 25, max_coarse: int = 64, theta: float = 0.08,
              cycles: int = 3) -> AmgHierarchy:
    """Smoothed-aggregation hierarchy with Galerkin coarse operators.

    Smoother is Gauss-Seidel (forward before, backward after the coarse
    correction), so one V-cycle is a symmetric operator.
    """
    A = sp.csr_matrix(A, dtype=float)
    A.sort_indices()
    if np.any(A.diagonal() <= 0):
        raise ValueError("AMG needs an SPD matrix: non-positive diagonal entry found")

    levels = []
    while A.shape[0] > max_coarse and len(levels) < max_levels - 1:
        agg = standard_aggregation(strength_graph(A, theta))
        nc = int(agg.max()) + 1
        if 2 * nc > A.shape[0]:
            break
        sizes = np.bincount(agg, minlength=nc)
        T = sp.csr_matrix((1.0 / np.sqrt(sizes[agg]), (np.arange(A.shape[0]), agg)),
                          shape=(A.shape[0], nc))
        omega = (4.0 / 3.0) / _spectral_radius_dinv_a(A)
        P = (T - omega * (sp.diags(1.0 / A.diagonal()) @ (A @ T))).tocsr()
        R = P.T.tocsr()
        lower = spla.splu(sp.tril(A, format="csc"), permc_spec="NATURAL",
                          diag_pivot_thresh=0.0, options={"SymmetricMode": True})
        upper = spla.splu(sp.triu(A, format="csc"), permc_spec="NATURAL",
                          diag_pivot_thresh=0.0, options={"SymmetricMode": True})
        levels.append(AmgLevel(A=A, P=P, R=R, forward=lower.solve, backward=upper.solve))
        A = (R @ A @ P).tocsr()
        A.sort_indices()
    levels.append(AmgLevel(A=A))
    lu = sla.lu_factor(A.toarray())
    return AmgHierarchy(levels=levels, coarse_solve=lambda r: sla.lu_solve(lu, r),
                        cycles_per_apply=cycles)


def _vcycle(h: AmgHierarchy, lvl: int, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    level = h.levels[lvl]
    if lvl == h.n_levels - 1:
        return h.coarse_solve(b)
    A = level.A
    x = x + level.forward(b - A @ x)
    xc = _vcycle(h, lvl + 1, level.R @ (b - A @ x), np.zeros(level.R.shape[0]))
    x = x + level.P @ xc
    x = x + level.backward(b - A @ x)
    return x


def amg_apply(h: AmgHierarchy, b) -> np.ndarray:
    """Fixed number of V(1,1) cycles from a zero start (a linear operator)."""
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b)
    for _ in range(h.cycles_per_apply):
        x = _vcycle(h, 0, b, x)
    return x
