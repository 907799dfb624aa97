"""Structured simplicial meshes of the unit square and unit cube."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Uniform simplicial mesh.

    ``nodes`` is ``(n_nodes, dim)``; ``elements`` is ``(n_elements, dim + 1)``
    with positively oriented vertex order.
    """

    dim: int
    n: int
    nodes: np.ndarray
    elements: np.ndarray
    h: float

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def volumes(self) -> np.ndarray:
        """Signed element volumes."""
        x = self.nodes[self.elements]
        edges = x[:, 1:, :] - x[:, :1, :]
        return np.linalg.det(edges) / math.factorial(self.dim)


def _grid_index(n: int, dim: int, idx: tuple[int, ...]) -> int:
    # lexicographic with x fastest
    out = 0
    for d in reversed(range(dim)):
        out = out * (n + 1) + idx[d]
    return out


def build_uniform_mesh(n: int, dim: int = 2) -> Mesh:
    """Build the uniform mesh with ``n`` cells per axis.

    In 2D each cell is split along the diagonal from ``(x+h, y)`` to
    ``(x, y+h)``, so every interior node touches six triangles. In 3D each
    cube is split into six tetrahedra along the main diagonal (Kuhn split).
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if dim not in (2, 3):
        raise ValueError(f"unsupported dimension {dim!r}")
    n = int(n)

    axis = np.linspace(0.0, 1.0, n + 1)
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    # x varies fastest, then y, then z
    nodes = np.stack([g.transpose(tuple(reversed(range(dim)))).ravel() for g in grids], axis=1)

    cells = itertools.product(range(n), repeat=dim)
    elements = []
    if dim == 2:
        for j, i in cells:
            a = _grid_index(n, 2, (i, j))
            b = _grid_index(n, 2, (i + 1, j))
            c = _grid_index(n, 2, (i, j + 1))
            d = _grid_index(n, 2, (i + 1, j + 1))
            elements.append((a, b, c))
            elements.append((d, c, b))
        h = math.sqrt(2.0) / n
    else:
        for k, j, i in cells:
            base = (i, j, k)
            for perm in itertools.permutations(range(3)):
                corner = list(base)
                tet = [_grid_index(n, 3, tuple(corner))]
                for axis_id in perm:
                    corner[axis_id] += 1
                    tet.append(_grid_index(n, 3, tuple(corner)))
                elements.append(tuple(tet))
        h = math.sqrt(3.0) / n

    elements = np.asarray(elements, dtype=np.int64)
    mesh = Mesh(dim=dim, n=n, nodes=nodes, elements=elements, h=h)
    # orient every simplex positively
    neg = mesh.volumes() < 0
    if neg.any():
        elements[neg, 0], elements[neg, 1] = elements[neg, 1].copy(), elements[neg, 0].copy()
    nodes.setflags(write=False)
    elements.setflags(write=False)
    return mesh
