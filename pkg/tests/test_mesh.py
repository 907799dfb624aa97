import numpy as np
import pytest

from acpdas import build_uniform_mesh


@pytest.mark.parametrize("n,nodes,elems", [(1, 4, 2), (2, 9, 8), (32, 1089, 2048)])
def test_counts(n, nodes, elems):
    m = build_uniform_mesh(n)
    assert m.n_nodes == nodes
    assert m.n_elements == elems


def test_n1_mesh_size():
    m = build_uniform_mesh(1)
    assert m.h == pytest.approx(np.sqrt(2))
    np.testing.assert_array_equal(m.nodes, [[0, 0], [1, 0], [0, 1], [1, 1]])


@pytest.mark.parametrize("n", [1, 3, 8, 17, 64, 128])
def test_volumes_tile_square(n):
    m = build_uniform_mesh(n)
    vol = m.volumes()
    assert vol.min() > 0
    assert abs(vol.sum() - 1.0) <= 1e-14
    assert m.h == pytest.approx(np.sqrt(2) / n)


def test_signed_volumes_positive():
    m = build_uniform_mesh(5)
    P = m.nodes[m.elements]
    e1, e2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
    signed = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    assert signed.min() > 0


def test_lexicographic_order():
    m = build_uniform_mesh(4)
    key = m.nodes[:, 1] * 10 + m.nodes[:, 0]
    assert np.all(np.diff(key) > 0)


def test_interior_valence_six():
    n = 6
    m = build_uniform_mesh(n)
    counts = np.bincount(m.elements.ravel(), minlength=m.n_nodes)
    x, y = m.nodes.T
    interior = (x > 0) & (x < 1) & (y > 0) & (y < 1)
    assert np.all(counts[interior] == 6)


def test_each_edge_shared_at_most_twice():
    m = build_uniform_mesh(5)
    edges = np.sort(np.concatenate([m.elements[:, [0, 1]], m.elements[:, [1, 2]],
                                    m.elements[:, [0, 2]]]), axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    assert counts.max() == 2


def test_three_dimensional():
    m = build_uniform_mesh(3, dim=3)
    assert m.n_nodes == 64
    assert m.n_elements == 6 * 27
    vol = m.volumes()
    assert vol.min() > 0
    assert abs(vol.sum() - 1.0) < 1e-14
    assert m.h == pytest.approx(np.sqrt(3) / 3)


def test_immutable():
    m = build_uniform_mesh(2)
    with pytest.raises(ValueError):
        m.nodes[0, 0] = 5.0


@pytest.mark.parametrize("n,dim", [(0, 2), (-1, 2), (2, 1), (2, 4)])
def test_rejects_bad_input(n, dim):
    with pytest.raises(ValueError):
        build_uniform_mesh(n, dim)
