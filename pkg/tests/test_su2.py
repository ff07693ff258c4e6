import numpy as np
import pytest
from hypothesis import given, strategies as st

from repstab.errors import ChainBreakError, DimensionError, InconsistencyError
from repstab.linalg import comm, dag, operator_norm
from repstab.su2 import (Su2Triple, build_exact_su2, casimir, conjugate_triple, ladder,
                         perturbed_triple, stabilize_su2, su2_defects, su2_distance)


def block_triple(n1, n2, k, c=0.0):
    a, b = build_exact_su2(n1), build_exact_su2(n2)
    x = []
    for A, B in zip(a.X, b.X):
        M = np.zeros((n1 + n2,) * 2, complex)
        M[:n1, :n1], M[n1:, n1:] = A, B
        x.append(M)
    return Su2Triple(*x, k, c)


def rand_unitary(rng, n):
    Q, R = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def check_irrep(rep, tol=1e-10):
    X = rep.X
    n = rep.n
    for j in range(3):
        assert operator_norm(X[j] + dag(X[j])) <= tol
        assert operator_norm(comm(X[j], X[(j + 1) % 3]) - X[(j + 2) % 3]) <= tol * max(n, 1)
    assert operator_norm(casimir(*X) + (n * n - 1) / 4 * np.eye(n)) <= tol * n * n


def test_n1_is_zero():
    rep = build_exact_su2(1)
    assert all(operator_norm(X) == 0 for X in rep.X)


def test_n2_chain_order():
    rep = build_exact_su2(2)
    np.testing.assert_allclose(rep.X3, np.diag([-0.5j, 0.5j]))
    yp, ym = ladder(Su2Triple.from_irrep(rep))
    np.testing.assert_allclose(ym @ [0, 1], [1, 0], atol=1e-15)
    np.testing.assert_allclose(yp @ [1, 0], [0, -1], atol=1e-15)
    np.testing.assert_allclose(casimir(*rep.X), -0.75 * np.eye(2), atol=1e-15)


@pytest.mark.parametrize("n", [3, 5, 16])
def test_irrep_invariants(n):
    check_irrep(build_exact_su2(n))


def test_build_rejects_zero():
    with pytest.raises(DimensionError):
        build_exact_su2(0)


def test_defects_examples():
    t = Su2Triple.from_irrep(build_exact_su2(8))
    r1, r2, n = su2_defects(t)
    assert r1 == pytest.approx(0.25, abs=1e-12) and r2 <= 1e-12 and n == 8
    z = np.zeros((4, 4))
    assert su2_defects(Su2Triple(z, z, z, 4, 0.0))[:2] == (4.0, 0.0)
    t = Su2Triple.from_irrep(build_exact_su2(64), k=64, c=0.5)
    assert su2_defects(t)[0] == pytest.approx(64 * 0.5 / 2 + 0.25, abs=1e-9)


def test_ladder_examples(rng):
    z = np.zeros((3, 3))
    yp, ym = ladder(Su2Triple(z, z, np.eye(3), 3))
    assert operator_norm(yp) == 0 and operator_norm(ym) == 0
    x = [rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5)) for _ in range(3)]
    x = [(a - dag(a)) / 2 for a in x]
    yp, ym = ladder(Su2Triple(*x, 5))
    assert operator_norm(dag(yp) + ym) <= 1e-14


def test_stabilize_exact_fixed_point():
    r = stabilize_su2(Su2Triple.from_irrep(build_exact_su2(16)))
    assert max(r.distances) <= 1e-9
    np.testing.assert_allclose(r.chain_eigenvalues, np.arange(15, -16, -2) / 2, atol=1e-9)
    check_irrep(r.rep)


def test_stabilize_perturbed_k32():
    t = perturbed_triple(32, 32, 1 / 32**2, np.random.default_rng(0))
    r = stabilize_su2(t)
    assert max(r.distances) <= 0.1 and r.rep.n == 32
    # frozen regression of the seeded run
    assert max(r.distances) == pytest.approx(6.178886311761e-3, rel=1e-9)
    assert su2_distance(t, r.rep) == pytest.approx(max(r.distances), abs=1e-15)


def test_stabilize_rejects_two_blocks_at_bound():
    with pytest.raises(InconsistencyError):
        stabilize_su2(block_triple(16, 16, 16))


@pytest.mark.parametrize("n1,n2", [(4, 4), (5, 3)])
def test_stabilize_rejects_block_inputs(n1, n2):
    with pytest.raises(InconsistencyError):
        stabilize_su2(block_triple(n1, n2, 8))


def test_half_integer_c_rejected():
    t = Su2Triple.from_irrep(build_exact_su2(16), k=16, c=0.5)
    with pytest.raises(InconsistencyError, match="half-integer"):
        stabilize_su2(t)


def test_chain_break_on_wrong_scale():
    # a triple scaled by 3 moves ladder images away from every eigenvalue cluster
    rep = build_exact_su2(6)
    t = Su2Triple(*(3 * X for X in rep.X), 6, 0.0)
    with pytest.raises((ChainBreakError, InconsistencyError)):
        stabilize_su2(t, delta=0.2)


def test_distance_conjugated(rng):
    rep = build_exact_su2(8)
    U = rand_unitary(rng, 8)
    t = conjugate_triple(Su2Triple.from_irrep(rep), U)
    direct = max(operator_norm(dag(U) @ X @ U - X) for X in rep.X)
    assert su2_distance(t, rep) == pytest.approx(direct, abs=1e-14)
    assert su2_distance(Su2Triple.from_irrep(rep), rep) == 0.0


def test_distance_dimension_mismatch():
    with pytest.raises(DimensionError):
        su2_distance(Su2Triple.from_irrep(build_exact_su2(3)), build_exact_su2(4))


@given(st.integers(2, 24), st.integers(0, 2**32 - 1))
def test_stabilize_is_conjugation_covariant(n, seed):
    r = np.random.default_rng(seed)
    U = rand_unitary(r, n)
    t = conjugate_triple(Su2Triple.from_irrep(build_exact_su2(n)), U)
    rep = stabilize_su2(t)
    assert max(rep.distances) <= 1e-9
    assert operator_norm(dag(rep.rep.basis) @ rep.rep.basis - np.eye(n)) <= 1e-9


@given(st.integers(4, 20), st.integers(0, 2**32 - 1))
def test_stabilized_output_is_exact_irrep(n, seed):
    t = perturbed_triple(n, n, 0.5 / n**2, np.random.default_rng(seed))
    rep = stabilize_su2(t)
    check_irrep(rep.rep, tol=1e-9)
