#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest
import scipy.sparse as sp

from numerics.errors import SingularSystemError
from numerics.linalg import (
    check_symmetric,
    condition_estimate,
    factorize_sparse,
    generalized_eigs,
    qr,
    solve_dense,
    solve_sparse_complex,
    svd,
)


def laplacian_1d(n: int) -> sp.csr_matrix:
    main = 2.0 * np.ones(n)
    off = -np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def test_check_symmetric():
    check_symmetric(laplacian_1d(5))
    bad = laplacian_1d(5).tolil()
    bad[0, 1] = 3.0
    with pytest.raises(ValueError):
        check_symmetric(bad)


@pytest.mark.parametrize("n", [50, 600])
def test_generalized_eigs_dense_and_lanczos(n):
    K = laplacian_1d(n)
    M = sp.identity(n, format="csr")
    values, vectors = generalized_eigs(K, M, 4, shift=-0.01)
    expected = 2 - 2 * np.cos(np.arange(1, 5) * np.pi / (n + 1))
    assert np.allclose(values, expected, rtol=1e-7, atol=1e-12)
    assert np.allclose(vectors.T @ vectors, np.eye(4), atol=1e-9)


def test_generalized_eigs_mass_normalised():
    n = 30
    K = laplacian_1d(n)
    M = sp.diags(np.linspace(1.0, 2.0, n), format="csr")
    values, vectors = generalized_eigs(K, M, 3)
    gram = vectors.T @ (M @ vectors)
    assert np.allclose(gram, np.eye(3), atol=1e-10)
    assert np.all(np.diff(values) > 0)


def test_generalized_eigs_rejects_too_many():
    with pytest.raises(ValueError):
        generalized_eigs(laplacian_1d(3), sp.identity(3), 5)


def test_svd_and_qr():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(6, 4)) + 1j * rng.normal(size=(6, 4))
    U, sigma, V = svd(A)
    assert np.allclose(U * sigma @ V.conj().T, A)
    assert np.all(np.diff(sigma) <= 0)
    Q, R = qr(A)
    assert Q.shape == (6, 4)
    assert np.allclose(Q @ R, A)
    assert np.allclose(Q.conj().T @ Q, np.eye(4))


def test_solve_dense_and_singular_detection():
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    x = solve_dense(A, np.array([1.0, 2.0]))
    assert np.allclose(A @ x, [1.0, 2.0])
    assert condition_estimate(np.array([[1.0, np.nan], [0.0, 1.0]])) == float("inf")
    with pytest.raises(SingularSystemError):
        solve_dense(np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([1.0, 0.0]))


def test_sparse_complex_solve_reuses_factorisation():
    S = (laplacian_1d(20) - (0.3 + 0.2j) * sp.identity(20)).tocsc()
    lu = factorize_sparse(S)
    rhs = np.eye(20, 3, dtype=complex)
    x = solve_sparse_complex(S, rhs, factorization=lu)
    assert np.allclose(S @ x, rhs)


def test_sparse_singular_raises():
    S = sp.csc_matrix(np.zeros((3, 3)))
    with pytest.raises(SingularSystemError):
        factorize_sparse(S)
