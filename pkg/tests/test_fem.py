import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from acpdas import assemble, assemble_lumped_mass, assemble_stiffness, build_uniform_mesh, lumped_inner
from acpdas.fem import AssemblyError
from acpdas.mesh import Mesh
from oracles import p1_stiffness_reference


def test_stiffness_n1_hand_values():
    L = assemble_stiffness(build_uniform_mesh(1)).toarray()
    expected = [[1, -.5, -.5, 0], [-.5, 1, 0, -.5], [-.5, 0, 1, -.5], [0, -.5, -.5, 1]]
    np.testing.assert_allclose(L, expected, atol=1e-15)


def test_lumped_mass_hand_values():
    np.testing.assert_allclose(assemble_lumped_mass(build_uniform_mesh(1)),
                               [1 / 6, 1 / 3, 1 / 3, 1 / 6], atol=1e-15)
    M = assemble_lumped_mass(build_uniform_mesh(2))
    assert M[4] == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("n", [2, 5, 9])
def test_stiffness_matches_elementwise_loop(n):
    m = build_uniform_mesh(n)
    ref = p1_stiffness_reference(m.nodes, m.elements)
    np.testing.assert_allclose(assemble_stiffness(m).toarray(), ref, atol=1e-13)


def test_stiffness_3d_matches_loop():
    m = build_uniform_mesh(2, dim=3)
    ref = p1_stiffness_reference(m.nodes, m.elements)
    np.testing.assert_allclose(assemble_stiffness(m).toarray(), ref, atol=1e-13)


@pytest.mark.parametrize("n,dim", [(1, 2), (7, 2), (16, 2), (3, 3)])
def test_invariants(n, dim):
    fem = assemble(build_uniform_mesh(n, dim))
    L = fem.L
    assert sp.isspmatrix_csr(L) or isinstance(L, sp.csr_array)
    assert abs(L - L.T).max() <= 1e-14
    assert np.all(L.data != 0)
    for i in range(L.shape[0]):
        cols = L.indices[L.indptr[i]:L.indptr[i + 1]]
        assert np.all(np.diff(cols) > 0)
    assert np.abs(L @ np.ones(L.shape[0])).max() <= 1e-12
    assert abs(fem.M.sum() - 1.0) <= 1e-12
    assert fem.M.min() > 0
    np.testing.assert_array_equal(fem.m, fem.M)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_stiffness_positive_on_nonconstant(n, seed):
    L = assemble_stiffness(build_uniform_mesh(n))
    x = np.random.default_rng(seed).standard_normal(L.shape[0])
    x -= x.mean()
    assert x @ (L @ x) > 0


def test_energy_convergence_under_refinement():
    vals = []
    for n in (32, 64):
        m = build_uniform_mesh(n)
        f = np.sin(np.pi * m.nodes[:, 0]) * np.sin(np.pi * m.nodes[:, 1])
        vals.append(f @ (assemble_stiffness(m) @ f))
    assert abs(vals[1] - vals[0]) / vals[1] < 0.05
    assert vals[1] == pytest.approx(np.pi**2 / 2, rel=0.01)


def test_deterministic():
    m = build_uniform_mesh(12)
    a, b = assemble(m), assemble(m)
    np.testing.assert_array_equal(a.L.data, b.L.data)
    np.testing.assert_array_equal(a.L.indices, b.L.indices)
    np.testing.assert_array_equal(a.M, b.M)


def test_degenerate_element_reported():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 1.0]])
    elements = np.array([[0, 1, 3], [0, 1, 2]])
    mesh = Mesh(dim=2, n=1, nodes=nodes, elements=elements, h=1.0)
    with pytest.raises(AssemblyError) as info:
        assemble_stiffness(mesh)
    assert info.value.element == 1
    with pytest.raises(AssemblyError):
        assemble_lumped_mass(mesh)


def test_lumped_inner():
    M = assemble_lumped_mass(build_uniform_mesh(4))
    one = np.ones_like(M)
    assert lumped_inner(one, one, M) == pytest.approx(1.0)
    assert lumped_inner(one, np.zeros_like(M), M) == 0.0
    e = np.zeros_like(M)
    e[7] = 1.0
    assert lumped_inner(e, e, M) == M[7]
    with pytest.raises(ValueError):
        lumped_inner(one, one[:-1], M)
