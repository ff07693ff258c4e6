import numpy as np
import pytest
from hypothesis import given, strategies as st

from repstab.errors import (ClusterEmptyError, ContractError, DimensionError, NotNormalError,
                            SingularityError)
from repstab.linalg import (dag, hermitian_eig, normal_eig, operator_norm, polar, quasimode)
from repstab.qtorus import clock_shift


def rand_c(rng, n):
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


def rand_herm(rng, n):
    G = rand_c(rng, n)
    return (G + dag(G)) / 2


def rand_unitary(rng, n):
    Q, R = np.linalg.qr(rand_c(rng, n))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def power_norm(A, tol=1e-12, iters=20000):
    """Independent oracle: power iteration on A*A."""
    G = dag(A) @ A
    v = np.ones(len(A), complex)
    lam = 0.0
    for _ in range(iters):
        w = G @ v
        new = np.linalg.norm(w)
        v = w / new
        if abs(new - lam) <= tol * new:
            break
        lam = new
    return np.sqrt(new)


def test_operator_norm_diag_and_zero():
    assert operator_norm(np.diag([1, -2, 0.5])) == pytest.approx(2.0, abs=1e-14)
    assert operator_norm(np.zeros((3, 3))) == 0.0


def test_operator_norm_matches_power_iteration(rng):
    A = rand_c(rng, 8)
    assert abs(operator_norm(A) - power_norm(A)) <= 1e-9


def test_operator_norm_rejects_nonsquare():
    with pytest.raises(DimensionError):
        operator_norm(np.zeros((2, 3)))


def test_hermitian_eig_small_cases():
    d = hermitian_eig(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_allclose(d.eigenvalues, [1, 2, 3])
    d = hermitian_eig(np.array([[0, 1], [1, 0]], complex))
    np.testing.assert_allclose(d.eigenvalues, [-1, 1], atol=1e-15)
    for col, sign in zip(d.basis.T, (-1, 1)):
        v = col / col[0] * abs(col[0])
        np.testing.assert_allclose(v, np.array([1, sign]) / np.sqrt(2), atol=1e-15)


def test_hermitian_eig_reconstructs(rng):
    A = rand_herm(rng, 16)
    d = hermitian_eig(A)
    assert operator_norm(d.basis @ np.diag(d.eigenvalues) @ dag(d.basis) - A) <= 1e-10


def test_hermitian_eig_rejects_non_hermitian():
    with pytest.raises(ContractError):
        hermitian_eig(np.array([[0, 1], [0, 0]], complex))


def test_normal_eig_ordering():
    d = normal_eig(np.diag([1, 1j, -1]))
    np.testing.assert_allclose(d.eigenvalues, [-1, 1j, 1], atol=1e-15)


def test_normal_eig_agrees_with_hermitian(rng):
    A = rand_herm(rng, 10)
    np.testing.assert_allclose(np.sort(normal_eig(A).eigenvalues.real),
                               hermitian_eig(A).eigenvalues, atol=1e-10)


def test_normal_eig_unitary_reconstruction(rng):
    U = rand_unitary(rng, 12)
    d = normal_eig(U)
    assert operator_norm(d.basis @ np.diag(d.eigenvalues) @ dag(d.basis) - U) <= 1e-9
    assert operator_norm(dag(d.basis) @ d.basis - np.eye(12)) <= 1e-9


def test_normal_eig_degenerate_clock_power():
    # X1^2 for n=8 has every eigenvalue doubly degenerate
    X1, _ = clock_shift(8)
    A = X1 @ X1
    d = normal_eig(A)
    assert operator_norm(d.basis @ np.diag(d.eigenvalues) @ dag(d.basis) - A) <= 1e-12


def test_normal_eig_rejects_non_normal():
    with pytest.raises(NotNormalError):
        normal_eig(np.array([[0, 1], [0, 0]], complex))


def test_polar_cases():
    U0 = rand_unitary(np.random.default_rng(3), 5)
    P, U = polar(U0)
    assert operator_norm(P - np.eye(5)) <= 1e-12 and operator_norm(U - U0) <= 1e-12
    P, U = polar(2 * np.eye(3))
    assert operator_norm(P - 2 * np.eye(3)) <= 1e-14 and operator_norm(U - np.eye(3)) <= 1e-14
    X1, _ = clock_shift(4)
    P, U = polar((1 + 1e-3) * X1)
    assert operator_norm(U - X1) <= 1e-12
    assert operator_norm(P - (1 + 1e-3) * np.eye(4)) <= 1e-12


def test_polar_singular():
    with pytest.raises(SingularityError) as err:
        polar(np.diag([1.0, 0.0]))
    assert err.value.sigma_min == 0.0


def test_quasimode_examples():
    A = np.diag([0.0, 1.0])
    q = quasimode(A, np.array([1, 0]), 0.0, 0.5)
    assert q.lam == 0 and q.bound == 0 and q.cluster_dim == 1
    np.testing.assert_allclose(q.unit_vector, [1, 0])
    q = quasimode(A, np.array([1, 0]), 0.4, 0.5)
    assert q.lam == 0 and q.bound == pytest.approx(0.4) and abs(q.lam - 0.4) <= q.bound


def test_quasimode_noisy_eigenvector(rng):
    A = rand_herm(rng, 10)
    w, V = np.linalg.eigh(A)
    i = 4
    gap = min(w[i] - w[i - 1], w[i + 1] - w[i])
    noise = rand_c(rng, 10)[:, 0]
    noise -= V[:, i] * np.vdot(V[:, i], noise)
    v = V[:, i] + 1e-3 * noise / np.linalg.norm(noise)
    q = quasimode(A, v, w[i], gap / 2)
    wnorm = np.linalg.norm(A @ v - w[i] * v)
    brute = np.min(np.abs(w - w[i]))
    assert brute <= abs(q.lam - w[i]) + 1e-15
    assert abs(q.lam - w[i]) <= wnorm / np.linalg.norm(v)
    assert q.projection_error <= 2 * wnorm / (gap / 2)


def test_quasimode_errors():
    A = np.diag([0.0, 1.0])
    with pytest.raises(ClusterEmptyError) as err:
        quasimode(A, np.array([1, 1]), 0.5, 0.4)
    assert err.value.distance == pytest.approx(0.5)
    with pytest.raises(ContractError):
        quasimode(A, np.zeros(2), 0.0, 0.5)
    with pytest.raises(ContractError):
        quasimode(A, np.ones(2), 0.0, 0.0)


@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_operator_norm_properties(n, seed):
    r = np.random.default_rng(seed)
    A, B = rand_c(r, n), rand_c(r, n)
    U = rand_unitary(r, n)
    nA = operator_norm(A)
    assert operator_norm(A + B) <= nA + operator_norm(B) + 1e-10
    assert abs(operator_norm(U @ A @ dag(U)) - nA) <= 1e-10 * nA
    assert abs(operator_norm(dag(A)) - nA) <= 1e-10 * nA


@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_polar_properties(n, seed):
    A = rand_c(np.random.default_rng(seed), n)
    P, U = polar(A)
    assert operator_norm(P @ U - A) <= 1e-9 * operator_norm(A)
    assert operator_norm(U @ dag(U) - np.eye(n)) <= 1e-9
    assert np.linalg.eigvalsh(P)[0] > 0
