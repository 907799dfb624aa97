"""Block preconditioners for the PDAS saddle-point systems.

Every preconditioner has the form ``P = [[K, B^T], [0, -S]]`` with ``S`` an
approximation of ``B K^{-1} B^T``; its inverse is applied as
``K^{-1}`` on the first block after a back-substitution through ``B^T``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .linalg import GmresConfig, SingularMatrixError, amg_apply, amg_setup, factorize, gmres
from .pdas import SaddleSystem

KINDS = ("exact", "p1", "p2", "p3")
KBLOCK_MODES = ("direct", "amg3")
EXACT_MAX_CONSTRAINTS = 5000


@dataclass(frozen=True)
class PreconditionerKind:
    kind: str = "p3"
    kblock_mode: str = "direct"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown preconditioner {self.kind!r}; expected one of {KINDS}")
        if self.kblock_mode not in KBLOCK_MODES:
            raise ValueError(f"unknown kblock mode {self.kblock_mode!r}; "
                             f"expected one of {KBLOCK_MODES}")

    @property
    def label(self) -> str:
        return self.kind if self.kblock_mode == "direct" else f"{self.kind},amg"


@dataclass
class SchurBlocks:
    """Pieces of ``D = B B^T`` and ``B K B^T``."""

    D11: np.ndarray           # (N-1, N-1) dense
    D12: np.ndarray           # (N-1, |D|) dense
    D21: np.ndarray
    D22: np.ndarray           # diagonal entries, length |D|
    BKB: sp.csr_matrix
    a: float | None = None


def build_schur_blocks(sys: SaddleSystem) -> SchurBlocks:
    if sys.trivial:
        raise ValueError("empty interface: no saddle-point system to precondition")
    B1, B2 = sys.B1, sys.B2
    D11 = (B1 @ B1.T).toarray()
    D12 = (B1 @ B2.T).toarray()
    D22 = np.asarray((B2.multiply(B2)).sum(axis=1)).ravel()
    B = sys.B
    BKB = (B @ sys.Kdiag @ B.T).tocsr()
    a = two_phase_scalar(sys) if sys.N == 2 and sys.n_lam == 1 else None
    return SchurBlocks(D11=D11, D12=D12, D21=D12.T.copy(), D22=D22, BKB=BKB, a=a)


def two_phase_scalar(sys: SaddleSystem) -> float:
    """``(m^T K^{-1} m)(m^T K m) / (m^T m)^2`` for the phase-1 block."""
    m = sys.mass[0]
    K1 = sys.Kblocks[0]
    mKinvm = m @ factorize(K1)(m)
    mm = m @ m
    return float(mKinvm * (m @ (K1 @ m)) / mm**2)


class BlockSolver:
    """Action of ``K^{-1}`` for the block-diagonal (1,1) block."""

    def __init__(self, sys: SaddleSystem, mode: str = "direct"):
        self.offsets = sys.offsets
        self.mode = mode
        if mode == "direct":
            self._solves = [factorize(Kb) for Kb in sys.Kblocks]
        else:
            self._solves = []
            for Kb in sys.Kblocks:
                hier = amg_setup(Kb)
                self._solves.append(lambda r, hier=hier: amg_apply(hier, r))

    def __call__(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        o = self.offsets
        for i, solve in enumerate(self._solves):
            if o[i + 1] > o[i]:
                out[o[i]:o[i + 1]] = solve(v[o[i]:o[i + 1]])
        return out


class Preconditioner:
    """Inverse action of one of the block preconditioners.

    Parameters
    ----------
    kind : PreconditionerKind
    blocks : SchurBlocks
    sys : SaddleSystem
    """

    def __init__(self, kind: PreconditionerKind, blocks: SchurBlocks, sys: SaddleSystem):
        self.kind = kind
        self.blocks = blocks
        self.sys = sys
        self.B = sys.B
        self.BT = self.B.T.tocsr()
        self.omega = sys.omega
        self.n1 = sys.n_lam
        self.kinv = BlockSolver(sys, kind.kblock_mode)
        getattr(self, f"_setup_{kind.kind}")()

    # -- Schur approximations -------------------------------------------------

    def _setup_exact(self):
        if self.sys.n_constraints > EXACT_MAX_CONSTRAINTS:
            raise ValueError("exact Schur preconditioner is limited to desk-scale systems")
        solve = BlockSolver(self.sys, "direct")
        Bd = self.B.toarray()
        KinvBt = np.column_stack([solve(col) for col in Bd]) if Bd.size else Bd.T
        self._S = Bd @ KinvBt
        try:
            self._S_lu = sla.lu_factor(self._S, check_finite=True)
        except sla.LinAlgError:
            raise SingularMatrixError(-1, "exact Schur complement is singular") from None
        self._check_lu(self._S_lu, "exact Schur complement")

    def _setup_p3(self):
        b = self.blocks
        if np.any(b.D22 <= 0):
            raise SingularMatrixError(int(np.argmin(b.D22)), "D22 has a zero diagonal entry")
        self._d22inv = 1.0 / b.D22
        if self.n1:
            Z = b.D11 - (b.D12 * self._d22inv[None, :]) @ b.D21
            self._Z_lu = sla.lu_factor(Z)
            self._check_lu(self._Z_lu, "D11 - D12 D22^-1 D21")

    def _setup_p2(self):
        b = self.blocks
        if np.any(b.D22 <= 0):
            raise SingularMatrixError(int(np.argmin(b.D22)), "D22 has a zero diagonal entry")
        self._d22inv = 1.0 / b.D22
        n1 = self.n1
        self._B1KB1 = b.BKB[:n1, :n1].toarray()
        self._B2KB2 = b.BKB[n1:, n1:].tocsr()
        if n1:
            self._D11_lu = sla.lu_factor(b.D11)
            self._check_lu(self._D11_lu, "D11")

    def _setup_p1(self):
        n1 = self.n1
        N = self.sys.N
        if n1:
            B1d = self.sys.B1.toarray()
            KinvB1t = np.column_stack([self.kinv(row) for row in B1d])
            S11 = (B1d @ KinvB1t) / N
            S11 = 0.5 * (S11 + S11.T)
            self._S11_lu = sla.lu_factor(S11)
            self._check_lu(self._S11_lu, "S11")
        # S22 = M^(1/2) (1 1^T + I) M^(1/2) on the interface nodes
        self._sqrt_m = np.sqrt(self.sys.mass_on_interface())
        self._nD = self.sys.n_constraints - n1

    @staticmethod
    def _check_lu(lu, name: str):
        d = np.abs(np.diag(lu[0]))
        if d.size and d.min() <= 1e-14 * d.max():
            raise SingularMatrixError(int(np.argmin(d)), f"{name} is singular")

    def _apply_D_inv(self, w: np.ndarray) -> np.ndarray:
        """``D^{-1} w`` through the 2x2 block factorisation of ``D``."""
        b, n1 = self.blocks, self.n1
        w1, w2 = w[:n1], w[n1:]
        if n1:
            y1 = sla.lu_solve(self._Z_lu, w1 - b.D12 @ (self._d22inv * w2))
            y2 = self._d22inv * (w2 - b.D21 @ y1)
            return np.concatenate([y1, y2])
        return self._d22inv * w2

    def schur_inverse(self, w: np.ndarray) -> np.ndarray:
        """Apply ``S^{-1}`` for the configured kind."""
        kind, n1 = self.kind.kind, self.n1
        if kind == "exact":
            return sla.lu_solve(self._S_lu, w)
        if kind == "p3":
            return self._apply_D_inv(self.blocks.BKB @ self._apply_D_inv(w))
        if kind == "p2":
            w1, w2 = w[:n1], w[n1:]
            y1 = (sla.lu_solve(self._D11_lu, self._B1KB1 @ sla.lu_solve(self._D11_lu, w1))
                  if n1 else w1)
            y2 = self._d22inv * (self._B2KB2 @ (self._d22inv * w2))
            return np.concatenate([y1, y2])
        # p1: (1 1^T + I)^{-1} = I - 1 1^T / (|D| + 1)
        w1, w2 = w[:n1], w[n1:]
        y1 = sla.lu_solve(self._S11_lu, w1) if n1 else w1
        z = w2 / self._sqrt_m
        y2 = (z - z.sum() / (self._nD + 1)) / self._sqrt_m
        return np.concatenate([y1, y2])

    def schur_matrix(self) -> np.ndarray:
        """Dense ``S`` (desk scale only; used for checks)."""
        m = self.sys.n_constraints
        return np.linalg.inv(np.column_stack([self.schur_inverse(e) for e in np.eye(m)]))

    def __call__(self, v: np.ndarray) -> np.ndarray:
        w = self.omega
        y2 = self.schur_inverse(v[w:])
        y1 = self.kinv(v[:w] + self.BT @ y2)
        return np.concatenate([y1, -y2])

    def matrix(self) -> np.ndarray:
        """Dense ``P = [[K, B^T], [0, -S]]`` (desk scale only)."""
        m = self.sys.n_constraints
        P = np.zeros((self.omega + m, self.omega + m))
        P[:self.omega, :self.omega] = self.sys.Kdiag.toarray()
        P[:self.omega, self.omega:] = self.BT.toarray()
        P[self.omega:, self.omega:] = -self.schur_matrix()
        return P


def apply_preconditioner_inverse(kind: PreconditionerKind, blocks: SchurBlocks,
                                 sys: SaddleSystem, v: np.ndarray) -> np.ndarray:
    """One-shot ``P^{-1} v``; build a :class:`Preconditioner` to reuse setup."""
    return Preconditioner(kind, blocks, sys)(v)


def preconditioned_matrix(sys: SaddleSystem, kind: PreconditionerKind = PreconditionerKind(),
                          blocks: SchurBlocks | None = None) -> np.ndarray:
    """Dense ``K P^{-1}`` (desk scale only)."""
    blocks = build_schur_blocks(sys) if blocks is None else blocks
    P = Preconditioner(kind, blocks, sys).matrix()
    K = sys.matrix().toarray()
    return np.linalg.solve(P.T, K.T).T


def block_triangular_eigenvalues(A: np.ndarray, split: int, tol: float = 1e-10):
    """Eigenvalues of ``A`` whose upper-right block vanishes up to roundoff.

    Eigenvalue 1 of ``K P^{-1}`` is defective, so an unstructured eigensolve
    only resolves it to about sqrt(machine eps); the diagonal blocks are
    well conditioned. Raises if ``||A[:split, split:]|| > tol ||A||``.
    """
    coupling = np.linalg.norm(A[:split, split:]) / np.linalg.norm(A)
    if coupling > tol:
        raise ValueError(f"matrix is not block lower triangular (relative coupling {coupling:.2e})")
    return np.concatenate([np.linalg.eigvals(A[:split, :split]),
                           np.linalg.eigvals(A[split:, split:])])


def two_phase_spectrum(sys: SaddleSystem, blocks: SchurBlocks | None = None,
                       max_size: int = 2000):
    """Eigenvalues of the dense ``K P3^{-1}`` and the predicted outlier ``a``."""
    if sys.N != 2:
        raise ValueError(f"two-phase spectrum needs N = 2, got N = {sys.N}")
    if sys.size > max_size:
        raise ValueError(f"system of size {sys.size} too large for a dense eigensolve")
    A = preconditioned_matrix(sys, PreconditionerKind("p3", "direct"), blocks)
    return block_triangular_eigenvalues(A, sys.omega), two_phase_scalar(sys)


@dataclass
class SaddleSolver:
    """GMRES on ``K`` right-preconditioned by the chosen block preconditioner."""

    kind: PreconditionerKind = PreconditionerKind()
    gmres: GmresConfig = GmresConfig()

    def __call__(self, sys: SaddleSystem):
        blocks = build_schur_blocks(sys)
        P = Preconditioner(self.kind, blocks, sys)
        K = sys.matrix()
        res = gmres(K, sys.rhs, P, self.gmres)
        return res.x, res.iterations, res.residual


def direct_saddle_solver(sys: SaddleSystem):
    """Sparse LU on the whole saddle matrix; a reference solver for tests."""
    K = sys.matrix()
    x = factorize(K)(sys.rhs)
    r = np.linalg.norm(K @ x - sys.rhs) / max(np.linalg.norm(sys.rhs), 1e-300)
    return x, 0, r
