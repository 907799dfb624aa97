import dataclasses

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from acpdas import GmresConfig, PreconditionerKind, Preconditioner, SaddleSolver, build_schur_blocks
from acpdas import ModelParams, PhaseState, assemble, build_uniform_mesh
from acpdas.pdas import ActiveSets, build_saddle_system
from acpdas.precond import (apply_preconditioner_inverse, block_triangular_eigenvalues,
                            direct_saddle_solver, preconditioned_matrix, two_phase_scalar,
                            two_phase_spectrum)
from conftest import make_system

KINDS = ["exact", "p1", "p2", "p3"]


def random_active(N, n_nodes, frac, seed):
    rng = np.random.default_rng(seed)
    active = rng.random((N, n_nodes)) < frac
    active[0, active.all(axis=0)] = False
    return active


def test_two_phase_blocks_decouple():
    sys, _, _ = make_system(n=6, N=2)
    b = build_schur_blocks(sys)
    assert not b.D12.any() and not b.D21.any()
    assert b.a is not None and b.a >= 1


def test_D11_uniform_masses():
    n = 4
    nn = (n + 1) ** 2
    idx = np.arange(nn)
    x, y = idx % (n + 1), idx // (n + 1)
    boundary = (x == 0) | (y == 0) | (x == n) | (y == n)
    active = np.zeros((3, nn), bool)
    active[:2, boundary] = True
    sys, fem, _ = make_system(n=n, N=3, active=active)
    d = int((~boundary).sum())
    mbar = fem.M[~boundary][0]
    np.testing.assert_allclose(fem.M[~boundary], mbar)
    alpha = d * mbar**2
    b = build_schur_blocks(sys)
    np.testing.assert_allclose(b.D11, [[2 * alpha, alpha], [alpha, 2 * alpha]], rtol=1e-14)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_D22_entries(N):
    sys, fem, _ = make_system(n=5, N=N, active=random_active(N, 36, 0.4, N))
    b = build_schur_blocks(sys)
    count = np.zeros(36)
    for d in sys.phase_nodes:
        count[d] += 1
    j = sys.interface_nodes
    np.testing.assert_allclose(b.D22, count[j] * fem.M[j] ** 2, rtol=1e-14)
    assert b.D22.min() > 0
    np.testing.assert_allclose(b.D11, b.D11.T)


def test_empty_interface_rejected():
    fem = assemble(build_uniform_mesh(2))
    u = np.zeros((2, 9))
    u[0] = 1
    sets = ActiveSets(np.vstack([np.zeros(9, bool), np.ones(9, bool)]))
    sys = build_saddle_system(sets, PhaseState.from_fields(u, tau=0.01), fem,
                              ModelParams(2, 0.1, mass_constraint=False))
    with pytest.raises(ValueError):
        build_schur_blocks(sys)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("N,seed", [(2, 0), (3, 1), (4, 2)])
def test_inverse_round_trip(kind, N, seed, rng):
    sys, _, _ = make_system(n=5, N=N, active=random_active(N, 36, 0.3, seed))
    blocks = build_schur_blocks(sys)
    P = Preconditioner(PreconditionerKind(kind), blocks, sys)
    v = rng.standard_normal(sys.size)
    y = P(v)
    assert np.linalg.norm(P.matrix() @ y - v) / np.linalg.norm(v) <= 1e-10
    np.testing.assert_allclose(apply_preconditioner_inverse(PreconditionerKind(kind), blocks, sys, v),
                               y, rtol=1e-12, atol=1e-14)


def test_two_phase_p2_equals_p3(rng):
    sys, _, _ = make_system(n=8, N=2, active=random_active(2, 81, 0.2, 3))
    blocks = build_schur_blocks(sys)
    p2 = Preconditioner(PreconditionerKind("p2"), blocks, sys)
    p3 = Preconditioner(PreconditionerKind("p3"), blocks, sys)
    for _ in range(5):
        v = rng.standard_normal(sys.size)
        a, b = p2(v), p3(v)
        assert np.abs(a - b).max() <= 1e-12 * np.abs(b).max()


@pytest.mark.parametrize("n,N,seed", [(4, 2, 0), (8, 3, 1), (16, 4, 2), (16, 2, 3), (8, 4, 4)])
def test_exact_two_iterations(n, N, seed):
    nn = (n + 1) ** 2
    sys, _, _ = make_system(n=n, N=N, active=random_active(N, nn, 0.3, seed))
    x, its, res = SaddleSolver(PreconditionerKind("exact"), GmresConfig(1e-10))(sys)
    assert its <= 2


@pytest.mark.parametrize("kind,mode", [(k, "direct") for k in KINDS] + [("p3", "amg3"), ("p1", "amg3")])
@pytest.mark.parametrize("N", [2, 4])
def test_true_residual(kind, mode, N):
    sys, _, _ = make_system(n=8, N=N, active=random_active(N, 81, 0.25, N))
    x, its, res = SaddleSolver(PreconditionerKind(kind, mode), GmresConfig(1e-10))(sys)
    K = sys.matrix()
    assert np.linalg.norm(K @ x - sys.rhs) / np.linalg.norm(sys.rhs) <= 1e-10
    xd, _, _ = direct_saddle_solver(sys)
    assert np.abs(x - xd).max() <= 1e-6 * np.abs(xd).max()


@pytest.mark.parametrize("N,seed", [(2, 0), (3, 1), (4, 2), (6, 3)])
def test_p3_not_worse_than_p1(N, seed):
    sys, _, _ = make_system(n=12, N=N, epsilon=0.05, active=random_active(N, 169, 0.3, seed))
    its = {k: SaddleSolver(PreconditionerKind(k), GmresConfig(1e-10))(sys)[1] for k in ("p1", "p3")}
    assert its["p3"] <= its["p1"]


def test_tight_gmres_matches_direct():
    sys, _, _ = make_system(n=8, N=3, active=random_active(3, 81, 0.3, 7))
    x, _, _ = SaddleSolver(PreconditionerKind("exact"), GmresConfig(1e-13))(sys)
    xd, _, _ = direct_saddle_solver(sys)
    assert np.abs(x - xd).max() <= 1e-9


def test_identity_block_collapses_spectrum():
    sys, _, _ = make_system(n=4, N=2, noise=0.0)
    eye = [sp.identity(k.shape[0], format="csr") for k in sys.Kblocks]
    sys = dataclasses.replace(sys, Kblocks=eye)
    assert two_phase_scalar(sys) == pytest.approx(1.0, abs=1e-14)
    eig, a = two_phase_spectrum(sys)
    assert np.abs(eig - 1).max() <= 1e-10


def test_spectrum_all_interface():
    sys, _, _ = make_system(n=8, N=2, epsilon=0.04, tau=0.01, noise=0.0)
    assert sys.omega == 2 * 81
    eig, a = two_phase_spectrum(sys)
    assert eig.size == sys.size
    dist = np.minimum(np.abs(eig - 1), np.abs(eig - a))
    assert dist.max() <= 1e-8
    m = sys.mass[0]
    K1 = sys.Kblocks[0].toarray()
    ref = (m @ np.linalg.solve(K1, m)) * (m @ K1 @ m) / (m @ m) ** 2
    assert a == pytest.approx(ref, rel=1e-12)
    assert a > 1 + 1e-3
    assert np.sum(np.abs(eig - a) < 1e-8) >= 1


def test_minimal_polynomial_degree_three(rng):
    sys, _, _ = make_system(n=6, N=2, epsilon=0.05, active=random_active(2, 49, 0.2, 5))
    Mx = preconditioned_matrix(sys)
    r = rng.standard_normal(sys.size)
    cols = [r / np.linalg.norm(r)]
    for _ in range(3):
        w = Mx @ cols[-1]
        cols.append(w / np.linalg.norm(w))
    V = np.column_stack(cols)
    s = np.linalg.svd(V, compute_uv=False)
    assert s[-1] <= 1e-8 * s[0]
    assert s[2] > 1e-6 * s[0]


def test_unstructured_eig_and_coupling_check():
    sys, _, _ = make_system(n=4, N=2, noise=0.0)
    A = preconditioned_matrix(sys)
    assert np.linalg.norm(A[:sys.omega, sys.omega:]) <= 1e-12 * np.linalg.norm(A)
    B = A.copy()
    B[0, -1] = 1.0
    with pytest.raises(ValueError):
        block_triangular_eigenvalues(B, sys.omega)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.floats(0.02, 0.5), st.floats(1e-4, 1.0), st.integers(0, 10**6))
def test_outlier_at_least_one(n, eps, tau, seed):
    nn = (n + 1) ** 2
    sys, _, _ = make_system(n=n, N=2, epsilon=eps, tau=tau, active=random_active(2, nn, 0.3, seed))
    if sys.trivial:
        return
    assert two_phase_scalar(sys) >= 1 - 1e-12


def test_spectrum_needs_two_phases():
    sys, _, _ = make_system(n=3, N=3)
    with pytest.raises(ValueError):
        two_phase_spectrum(sys)


def test_kind_validation():
    with pytest.raises(ValueError):
        PreconditionerKind("p4")
    with pytest.raises(ValueError):
        PreconditionerKind("p3", "ilu")
    assert PreconditionerKind("p3", "amg3").label == "p3,amg"


@pytest.mark.parametrize("kind", ["p3", "p2", "p1"])
@pytest.mark.parametrize("N", [2, 4])
def test_schur_inverse_matches_dense_formula(kind, N):
    sys, _, _ = make_system(n=6, N=N, active=random_active(N, 49, 0.3, N))
    P = Preconditioner(PreconditionerKind(kind), build_schur_blocks(sys), sys)
    B, K = sys.B.toarray(), sys.Kdiag.toarray()
    n1 = sys.n_lam
    if kind == "p3":
        Dinv = np.linalg.inv(B @ B.T)
        ref = Dinv @ B @ K @ B.T @ Dinv
    elif kind == "p2":
        B1, B2 = B[:n1], B[n1:]
        d11, d22 = np.linalg.inv(B1 @ B1.T), np.linalg.inv(B2 @ B2.T)
        ref = np.zeros((sys.n_constraints,) * 2)
        ref[:n1, :n1] = d11 @ B1 @ K @ B1.T @ d11
        ref[n1:, n1:] = d22 @ B2 @ K @ B2.T @ d22
    else:
        B1 = B[:n1]
        m = np.sqrt(sys.mass_on_interface())
        nd = m.size
        S22 = m[:, None] * (np.ones((nd, nd)) + np.eye(nd)) * m[None, :]
        ref = np.zeros((sys.n_constraints,) * 2)
        ref[:n1, :n1] = np.linalg.inv(B1 @ np.linalg.solve(K, B1.T) / N)
        ref[n1:, n1:] = np.linalg.inv(S22)
    got = np.column_stack([P.schur_inverse(e) for e in np.eye(sys.n_constraints)])
    assert np.abs(got - ref).max() <= 1e-10 * np.abs(ref).max()
