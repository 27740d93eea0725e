import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from amgtune.sparse import (MatrixMarketError, canonical, from_coo, is_symmetric, matvec, read_matrix_market,
                            read_vector, transpose, triple_product, write_matrix_market, write_vector)
from helpers import laplacian_1d


def test_matvec_identity():
    assert np.array_equal(matvec(sparse.identity(3, format="csr"), [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])


def test_matvec_tridiag():
    assert np.array_equal(matvec(laplacian_1d(3), np.ones(3)), [1.0, 0.0, 1.0])


def test_matvec_random_dense_oracle(rng):
    A = sparse.random(50, 50, density=0.2, random_state=rng, format="csr")
    x = rng.standard_normal(50)
    assert np.max(np.abs(matvec(A, x) - A.toarray() @ x)) < 1e-12


def test_matvec_size_mismatch():
    with pytest.raises(ValueError):
        matvec(sparse.identity(3, format="csr"), np.ones(4))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 200), st.integers(0, 2 ** 31 - 1))
def test_matvec_matches_dense(n, seed):
    r = np.random.default_rng(seed)
    A = sparse.random(n, n, density=min(1.0, 5.0 / n), random_state=r, format="csr")
    x = r.standard_normal(n)
    ref = A.toarray() @ x
    scale = max(1.0, np.max(np.abs(ref)))
    assert np.max(np.abs(matvec(A, x) - ref)) <= 1e-12 * scale


def test_triple_product_identity(rng):
    A = sparse.random(6, 6, density=0.5, random_state=rng, format="csr")
    eye = sparse.identity(6, format="csr")
    assert np.array_equal(triple_product(eye, A, eye).toarray(), A.toarray())


def test_triple_product_1d_galerkin():
    A = laplacian_1d(5)
    P = sparse.csr_matrix(np.array([[1, 0, 0], [0.5, 0.5, 0], [0, 1, 0], [0, 0.5, 0.5], [0, 0, 1]]))
    Ac = triple_product(P.T, A, P).toarray()
    # hand computation: interior row (-1/2, 1, -1/2); the ends keep 3/2
    expected = np.array([[1.5, -0.5, 0.0], [-0.5, 1.0, -0.5], [0.0, -0.5, 1.5]])
    assert np.array_equal(Ac, expected)


def test_triple_product_random_oracle(rng):
    M = rng.standard_normal((30, 30))
    A = sparse.csr_matrix(M @ M.T)
    P = sparse.random(30, 12, density=0.3, random_state=rng, format="csr")
    Ac = triple_product(P.T, A, P)
    ref = P.toarray().T @ A.toarray() @ P.toarray()
    assert np.max(np.abs(Ac.toarray() - ref)) < 1e-12 * max(1.0, np.abs(ref).max())
    assert is_symmetric(Ac)


def test_triple_product_shape_mismatch():
    with pytest.raises(ValueError):
        triple_product(sparse.identity(3), sparse.identity(4), sparse.identity(4))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.integers(1, 20), st.integers(0, 2 ** 31 - 1))
def test_triple_product_exactly_symmetric(n, nc, seed):
    r = np.random.default_rng(seed)
    B = sparse.random(n, n, density=0.3, random_state=r)
    A = sparse.csr_matrix(B + B.T)
    P = sparse.random(n, nc, density=0.4, random_state=r, format="csr")
    Ac = triple_product(transpose(P), A, P).toarray()
    assert np.array_equal(Ac, Ac.T)


def test_transpose_examples(rng):
    A = laplacian_1d(4)
    assert np.array_equal(transpose(A).toarray(), A.toarray())
    S = sparse.csr_matrix(([5.0], ([0], [2])), shape=(3, 3))
    T = transpose(S)
    assert T.nnz == 1 and T[2, 0] == 5.0
    R = sparse.random(7, 5, density=0.4, random_state=rng, format="csr")
    assert np.array_equal(transpose(transpose(R)).toarray(), R.toarray())


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5), st.floats(-10, 10)), min_size=1, max_size=30),
       st.randoms())
def test_construction_independent_of_entry_order(entries, rnd):
    uniq = {(i, j): v for i, j, v in entries}
    items = list(uniq.items())
    r1, c1, v1 = zip(*[(i, j, v) for (i, j), v in items])
    rnd.shuffle(items)
    r2, c2, v2 = zip(*[(i, j, v) for (i, j), v in items])
    A = from_coo(r1, c1, v1, 6)
    B = from_coo(r2, c2, v2, 6)
    assert np.array_equal(A.indptr, B.indptr)
    assert np.array_equal(A.indices, B.indices)
    assert np.array_equal(A.data, B.data)


def test_canonical_sorts_indices():
    A = sparse.csr_matrix((np.array([1.0, 2.0]), np.array([2, 0]), np.array([0, 2])), shape=(1, 3))
    C = canonical(A)
    assert C.has_sorted_indices and list(C.indices) == [0, 2]


def test_matrix_market_round_trip(tmp_path, rng):
    A = sparse.random(20, 15, density=0.3, random_state=rng, format="csr")
    write_matrix_market(A, tmp_path / "a.mtx")
    B = read_matrix_market(tmp_path / "a.mtx")
    assert np.array_equal(A.toarray(), B.toarray())


def test_matrix_market_one_based_and_symmetric(tmp_path):
    p = tmp_path / "s.mtx"
    p.write_text("%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 3\n1 1 2.0\n3 1 -1.0\n3 3 4\n")
    A = read_matrix_market(p).toarray()
    assert A[0, 0] == 2.0 and A[2, 0] == -1.0 and A[0, 2] == -1.0 and A[2, 2] == 4.0
    assert np.count_nonzero(A) == 4


def test_matrix_market_symmetric_write(tmp_path):
    A = laplacian_1d(6)
    write_matrix_market(A, tmp_path / "l.mtx", symmetric=True)
    assert "symmetric" in (tmp_path / "l.mtx").read_text().splitlines()[0]
    assert np.array_equal(read_matrix_market(tmp_path / "l.mtx").toarray(), A.toarray())
    with pytest.raises(ValueError):
        write_matrix_market(sparse.csr_matrix(np.array([[1.0, 2.0], [0.0, 1.0]])), tmp_path / "x.mtx", symmetric=True)


@pytest.mark.parametrize("body", [
    "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n",
    "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n",
    "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n1 1 2.0\n",
    "%%MatrixMarket matrix coordinate complex general\n2 2 1\n1 1 1.0 0.0\n",
    "not a header\n",
])
def test_matrix_market_rejects_bad_files(tmp_path, body):
    p = tmp_path / "bad.mtx"
    p.write_text(body)
    with pytest.raises(MatrixMarketError):
        read_matrix_market(p)


def test_vector_round_trip(tmp_path, rng):
    x = rng.standard_normal(17)
    write_vector(x, tmp_path / "v.mtx")
    assert np.array_equal(read_vector(tmp_path / "v.mtx"), x)
