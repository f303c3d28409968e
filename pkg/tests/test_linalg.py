import numpy as np
import pytest

from retrodict import linalg

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)


def kron_oracle(a, b):
    # direct four-index definition, naive loops
    ra, ca = a.shape
    rb, cb = b.shape
    out = np.zeros((ra * rb, ca * cb), dtype=complex)
    for i in range(ra):
        for j in range(ca):
            for k in range(rb):
                for l in range(cb):
                    out[i * rb + k, j * cb + l] = a[i, j] * b[k, l]
    return out


def partial_trace_oracle_keep_first(m, d1, d2):
    # sum entries M[(i,k),(j,k)] over the traced index k
    out = np.zeros((d1, d1), dtype=complex)
    for i in range(d1):
        for j in range(d1):
            for k in range(d2):
                out[i, j] += m[i * d2 + k, j * d2 + k]
    return out


def test_tensor_identity():
    np.testing.assert_array_equal(linalg.tensor(np.eye(2), np.eye(2)), np.eye(4))


def test_tensor_basis_kets():
    ket01 = linalg.tensor(linalg.basis_ket(2, 0), linalg.basis_ket(2, 1))
    np.testing.assert_array_equal(ket01, np.array([0, 1, 0, 0], dtype=complex))


def test_tensor_pauli_entries_against_oracle():
    result = linalg.tensor(X, Z)
    np.testing.assert_array_equal(result, kron_oracle(X, Z))
    assert result[0, 2] == 1
    assert result[1, 3] == -1


def test_tensor_associative_on_integer_matrices():
    rng = np.random.default_rng(0)
    a, b, c = (rng.integers(-3, 4, (2, 2)).astype(complex) for _ in range(3))
    left = linalg.tensor(linalg.tensor(a, b), c)
    right = linalg.tensor(a, linalg.tensor(b, c))
    np.testing.assert_array_equal(left, right)


def test_partial_trace_product_state():
    rho = linalg.random_density_matrix(2, 1)
    sigma = linalg.random_density_matrix(3, 2)
    reduced = linalg.partial_trace(linalg.tensor(rho, sigma), (2, 3), keep=[0])
    np.testing.assert_allclose(reduced, rho, atol=1e-12)


def test_partial_trace_scales_with_trace_of_discarded_factor():
    rho = linalg.random_density_matrix(2, 3)
    sigma = 2.5 * linalg.random_density_matrix(2, 4)
    reduced = linalg.partial_trace(linalg.tensor(rho, sigma), (2, 2), keep=[0])
    np.testing.assert_allclose(reduced, rho * np.trace(sigma), atol=1e-12)


def test_partial_trace_bell_state():
    bell = (linalg.tensor(linalg.basis_ket(2, 0), linalg.basis_ket(2, 0))
            + linalg.tensor(linalg.basis_ket(2, 1), linalg.basis_ket(2, 1))) / np.sqrt(2)
    reduced = linalg.partial_trace(linalg.projector(bell), (2, 2), keep=[1])
    np.testing.assert_allclose(reduced, np.eye(2) / 2, atol=1e-12)


def test_partial_trace_against_index_oracle():
    rng = np.random.default_rng(7)
    m = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    m = m + m.conj().T
    np.testing.assert_allclose(
        linalg.partial_trace(m, (2, 3), keep=[0]),
        partial_trace_oracle_keep_first(m, 2, 3),
        atol=1e-12,
    )


def test_partial_trace_preserves_trace():
    m = linalg.random_density_matrix(12, 5)
    for keep in ([0], [1], [0, 1], [2], [0, 2]):
        reduced = linalg.partial_trace(m, (2, 3, 2), keep=keep)
        assert abs(np.trace(reduced) - np.trace(m)) < 1e-12


def test_partial_trace_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        linalg.partial_trace(np.eye(5), (2, 3), keep=[0])


def test_haar_scalar_case():
    u = linalg.haar_random_unitary(1, 123)
    assert abs(abs(u[0, 0]) - 1.0) < 1e-12


def test_haar_deterministic():
    np.testing.assert_array_equal(
        linalg.haar_random_unitary(4, 7), linalg.haar_random_unitary(4, 7)
    )


def test_haar_unitary_and_determinant():
    for d in range(2, 9):
        u = linalg.haar_random_unitary(d, d)
        assert np.max(np.abs(u.conj().T @ u - np.eye(d))) < 1e-10
        assert abs(abs(np.linalg.det(u)) - 1.0) < 1e-9


def test_basis_kets():
    np.testing.assert_array_equal(linalg.basis_ket(2, 0), [1, 0])
    np.testing.assert_array_equal(linalg.basis_ket(2, 1), [0, 1])
    np.testing.assert_array_equal(linalg.basis_ket(3, 2), [0, 0, 1])


def test_basis_kets_orthonormal_exactly():
    kets = [linalg.basis_ket(4, i) for i in range(4)]
    for i, u in enumerate(kets):
        for j, v in enumerate(kets):
            assert np.vdot(u, v) == (1.0 if i == j else 0.0)


def test_basis_ket_out_of_range():
    with pytest.raises(ValueError):
        linalg.basis_ket(3, 3)
    with pytest.raises(ValueError):
        linalg.basis_ket(3, -1)


def test_permutation_matrix_swaps_factors():
    perm = linalg.permutation_matrix((2, 3), (1, 0))
    v = linalg.tensor(linalg.basis_ket(2, 1), linalg.basis_ket(3, 2))
    swapped = linalg.tensor(linalg.basis_ket(3, 2), linalg.basis_ket(2, 1))
    np.testing.assert_array_equal(perm @ v, swapped)
    assert linalg.is_unitary(perm)


def test_complete_to_unitary_preserves_columns():
    rng = np.random.default_rng(3)
    raw = rng.standard_normal((6, 2)) + 1j * rng.standard_normal((6, 2))
    q, _ = np.linalg.qr(raw)
    u = linalg.complete_to_unitary(q[:, :2], [0, 3])
    assert linalg.is_unitary(u)
    np.testing.assert_allclose(u[:, 0], q[:, 0], atol=1e-12)
    np.testing.assert_allclose(u[:, 3], q[:, 1], atol=1e-12)


def test_complete_to_unitary_is_deterministic():
    v = linalg.basis_ket(4, 2)
    np.testing.assert_array_equal(
        linalg.complete_to_unitary(v, [0]), linalg.complete_to_unitary(v, [0])
    )


def test_complete_to_unitary_rejects_non_orthonormal():
    cols = np.ones((3, 2), dtype=complex)
    with pytest.raises(ValueError):
        linalg.complete_to_unitary(cols, [0, 1])
