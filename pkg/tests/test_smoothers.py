import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from amgtune.amg import SMOOTHER_NAMES, SmootherKind, smooth
from amgtune.amg.smoothers import FCF_WEIGHT
from helpers import random_m_matrix, random_spd

A2 = sparse.csr_matrix(np.array([[2.0, -1.0], [-1.0, 2.0]]))


def test_names_and_one_hot_order():
    assert SMOOTHER_NAMES == ["sor-jacobi", "l1-jacobi", "l1-sor-jacobi", "fcf-jacobi"]
    for k, kind in enumerate(SmootherKind):
        assert np.array_equal(kind.one_hot(), np.eye(4)[k])
        assert SmootherKind.from_one_hot(kind.one_hot()) is kind
        assert SmootherKind.parse(kind.label) is kind


def test_parse_and_one_hot_errors():
    with pytest.raises(ValueError):
        SmootherKind.parse("chebyshev")
    with pytest.raises(ValueError):
        SmootherKind.from_one_hot([1, 1, 0, 0])


def test_l1_jacobi_example():
    u = smooth("l1-jacobi", A2, np.zeros(2), np.ones(2))
    assert np.allclose(u, [1 / 3, 1 / 3], rtol=0, atol=1e-15)


def test_sor_jacobi_example():
    u = smooth("sor-jacobi", A2, np.zeros(2), np.ones(2))
    assert np.array_equal(u, [0.5, 0.75])


@pytest.mark.parametrize("kind", ["sor-jacobi", "l1-jacobi", "l1-sor-jacobi"])
def test_identity_solved_in_one_sweep(kind, rng):
    f = rng.standard_normal(5)
    assert np.array_equal(smooth(kind, sparse.identity(5, format="csr"), np.zeros(5), f), f)


def test_fcf_on_identity_is_exact_after_full_stage():
    # each masked weighted step removes 2/3 of the remaining error
    f = np.ones(4)
    u = smooth("fcf-jacobi", sparse.identity(4, format="csr"), np.zeros(4), f,
               f_mask=np.array([True, False, True, False]))
    w = FCF_WEIGHT
    assert np.allclose(u, [1 - (1 - w) ** 2, w, 1 - (1 - w) ** 2, w])


@pytest.mark.parametrize("kind", SMOOTHER_NAMES)
def test_zero_sweeps_is_identity(kind, rng):
    A = random_m_matrix(10, rng)
    u0 = rng.standard_normal(10)
    assert np.array_equal(smooth(kind, A, u0, rng.standard_normal(10), nu=0), u0)


@pytest.mark.parametrize("kind", SMOOTHER_NAMES)
def test_linearity(kind, rng):
    A = random_m_matrix(20, rng)
    mask = rng.random(20) < 0.6
    u, f = rng.standard_normal(20), rng.standard_normal(20)
    a = smooth(kind, A, u, f, nu=2, f_mask=mask)
    b = smooth(kind, A, 3.5 * u, 3.5 * f, nu=2, f_mask=mask)
    assert np.allclose(b, 3.5 * a, rtol=1e-13, atol=1e-13)


def test_zero_diagonal_names_row():
    A = sparse.csr_matrix(np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 1.0]]))
    with pytest.raises(ZeroDivisionError, match="row 1"):
        smooth("sor-jacobi", A, np.zeros(3), np.ones(3))


def test_fcf_needs_splitting():
    with pytest.raises(ValueError):
        smooth("fcf-jacobi", A2, np.zeros(2), np.ones(2))


def test_negative_sweeps_rejected():
    with pytest.raises(ValueError):
        smooth("l1-jacobi", A2, np.zeros(2), np.ones(2), nu=-1)


def test_size_mismatch():
    with pytest.raises(ValueError):
        smooth("l1-jacobi", A2, np.zeros(3), np.ones(3))


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 100), st.integers(0, 2 ** 31 - 1))
def test_l1_jacobi_error_propagation_contracts_in_a_norm(n, seed):
    r = np.random.default_rng(seed)
    A = random_spd(n, r)
    d = np.abs(A).sum(axis=1)
    E = np.eye(n) - A / d[:, None]
    # A-norm of E equals the 2-norm of A^{1/2} E A^{-1/2}
    w, V = np.linalg.eigh(A)
    half = V @ np.diag(np.sqrt(w)) @ V.T
    inv_half = V @ np.diag(1 / np.sqrt(w)) @ V.T
    assert np.linalg.norm(half @ E @ inv_half, 2) <= 1.0 + 1e-12
    # and the smoother realizes E
    e0 = r.standard_normal(n)
    e1 = -smooth("l1-jacobi", sparse.csr_matrix(A), -e0, np.zeros(n))
    assert np.allclose(e1, E @ e0, atol=1e-12)


def test_l1_diagonal_dominates(rng):
    A = random_spd(30, rng)
    assert np.all(np.abs(A).sum(axis=1) >= np.diag(A))


def masked_jacobi(A, u, f, rows, w):
    r = f - A @ u
    u = u.copy()
    u[rows] += w * r[rows] / A.diagonal()[rows]
    return u


def test_fcf_is_composition_of_masked_jacobi(rng):
    A = random_m_matrix(30, rng)
    mask = rng.random(30) < 0.5
    u, f = rng.standard_normal(30), rng.standard_normal(30)
    F, C = np.flatnonzero(mask), np.flatnonzero(~mask)
    ref = masked_jacobi(A, u, f, F, FCF_WEIGHT)
    ref = masked_jacobi(A, ref, f, C, FCF_WEIGHT)
    ref = masked_jacobi(A, ref, f, F, FCF_WEIGHT)
    assert np.array_equal(smooth("fcf-jacobi", A, u, f, f_mask=mask), ref)


def test_sor_is_gauss_seidel(rng):
    A = random_m_matrix(25, rng)
    u, f = rng.standard_normal(25), rng.standard_normal(25)
    Ad = A.toarray()
    L = np.tril(Ad)
    ref = u + np.linalg.solve(L, f - Ad @ u)
    assert np.allclose(smooth("sor-jacobi", A, u, f), ref, rtol=1e-12, atol=1e-12)
    U = np.triu(Ad)
    back = u + np.linalg.solve(U, f - Ad @ u)
    assert np.allclose(smooth("sor-jacobi", A, u, f, backward=True), back, rtol=1e-12, atol=1e-12)


def test_l1_sor_uses_l1_diagonal(rng):
    A = random_m_matrix(25, rng)
    u, f = rng.standard_normal(25), rng.standard_normal(25)
    Ad = A.toarray()
    L = np.tril(Ad, -1) + np.diag(np.abs(Ad).sum(axis=1))
    ref = u + np.linalg.solve(L, f - Ad @ u)
    assert np.allclose(smooth("l1-sor-jacobi", A, u, f), ref, rtol=1e-12, atol=1e-12)


def test_input_vector_untouched(rng):
    u = np.zeros(2)
    smooth("sor-jacobi", A2, u, np.ones(2))
    assert np.array_equal(u, [0.0, 0.0])
