"""P1 finite element matrices: stiffness, lumped mass, lumped inner product."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh


class AssemblyError(ValueError):
    """Raised for degenerate elements."""

    def __init__(self, element: int, message: str = "degenerate element"):
        super().__init__(f"{message} (element {element})")
        self.element = element


@dataclass(frozen=True)
class FemMatrices:
    """Lumped mass diagonal ``M``, stiffness ``L`` and the mesh size ``h``."""

    M: np.ndarray
    L: sp.csr_matrix
    h: float

    @property
    def m(self) -> np.ndarray:
        """Lumped mass vector (identical to the diagonal of ``M``)."""
        return self.M

    @property
    def n_nodes(self) -> int:
        return self.M.shape[0]


def _element_geometry(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    x = mesh.nodes[mesh.elements]
    edges = x[:, 1:, :] - x[:, :1, :]
    det = np.linalg.det(edges)
    vol = np.abs(det) / math.factorial(mesh.dim)
    scale = mesh.h ** mesh.dim if mesh.h > 0 else 1.0
    bad = np.flatnonzero(vol <= 1e-14 * scale)
    if bad.size:
        raise AssemblyError(int(bad[0]))
    return edges, vol


def assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """Stiffness matrix ``l_ij = int grad(chi_j) . grad(chi_i)``."""
    edges, vol = _element_geometry(mesh)
    d = mesh.dim
    # gradients of barycentric coordinates 1..d are rows of inv(edges)^T
    inv = np.linalg.inv(edges)  # (ne, d, d): inv[:, :, k] is grad of lambda_{k+1}
    grads = np.empty((mesh.n_elements, d + 1, d))
    grads[:, 1:, :] = np.transpose(inv, (0, 2, 1))
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
    local = np.einsum("eak,ebk->eab", grads, grads) * vol[:, None, None]
    # symmetrise the local matrices exactly
    local = 0.5 * (local + np.transpose(local, (0, 2, 1)))

    el = mesh.elements
    rows = np.repeat(el, d + 1, axis=1).ravel()
    cols = np.tile(el, (1, d + 1)).ravel()
    L = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2).tocsr()
    L.sum_duplicates()
    L.eliminate_zeros()
    L.sort_indices()
    return L


def assemble_lumped_mass(mesh: Mesh) -> np.ndarray:
    """Lumped mass ``M_j``: each element gives ``vol / (dim + 1)`` to its vertices."""
    _, vol = _element_geometry(mesh)
    share = np.repeat(vol / (mesh.dim + 1), mesh.dim + 1)
    return np.bincount(mesh.elements.ravel(), weights=share, minlength=mesh.n_nodes)


def assemble(mesh: Mesh) -> FemMatrices:
    return FemMatrices(M=assemble_lumped_mass(mesh), L=assemble_stiffness(mesh), h=mesh.h)


def lumped_inner(f, g, M) -> float:
    """Discrete inner product ``sum_j M_j f_j g_j``."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    M = np.asarray(M, dtype=float)
    if not (f.shape == g.shape == M.shape):
        raise ValueError(f"length mismatch: {f.shape}, {g.shape}, {M.shape}")
    return float(np.dot(M * f, g))
