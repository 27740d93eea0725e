"""Sparse matrix helpers and Matrix Market I/O.

Matrices are plain :class:`scipy.sparse.csr_matrix` objects kept in a
canonical form: float64 values, sorted column indices, no duplicate
coordinates.  Explicit zeros that were stored on purpose are kept.
"""
from __future__ import annotations

import os

import numpy as np
from scipy import sparse

__all__ = [
    "MatrixMarketError",
    "canonical",
    "from_coo",
    "matvec",
    "transpose",
    "triple_product",
    "is_symmetric",
    "read_matrix_market",
    "write_matrix_market",
    "read_vector",
    "write_vector",
]


class MatrixMarketError(ValueError):
    """Raised for malformed or unsupported Matrix Market files."""


def canonical(A) -> sparse.csr_matrix:
    """Return ``A`` as a float64 CSR matrix with sorted, summed entries."""
    if sparse.issparse(A):
        A = sparse.csr_matrix(A, dtype=np.float64, copy=True)
    else:
        A = sparse.csr_matrix(np.asarray(A, dtype=np.float64))
    A.sum_duplicates()
    A.sort_indices()
    return A


def from_coo(rows, cols, vals, n, m=None) -> sparse.csr_matrix:
    """Build a CSR matrix from coordinate triplets; duplicates are summed."""
    m = n if m is None else m
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= m):
        raise IndexError("coordinate index out of range")
    A = sparse.coo_matrix((np.asarray(vals, dtype=np.float64), (rows, cols)), shape=(n, m))
    return canonical(A.tocsr())


def matvec(A, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != A.shape[1]:
        raise ValueError(f"dimension mismatch: matrix is {A.shape}, vector has length {x.shape}")
    return A @ x


def transpose(A) -> sparse.csr_matrix:
    return canonical(A.T.tocsr())


def is_symmetric(A) -> bool:
    """Exact entrywise symmetry test on the stored pattern and values."""
    if A.shape[0] != A.shape[1]:
        return False
    A = canonical(A)
    T = canonical(A.T)
    return (
        np.array_equal(A.indptr, T.indptr)
        and np.array_equal(A.indices, T.indices)
        and np.array_equal(A.data, T.data)
    )


def _same(A, B) -> bool:
    return (
        A.shape == B.shape
        and np.array_equal(A.indptr, B.indptr)
        and np.array_equal(A.indices, B.indices)
        and np.array_equal(A.data, B.data)
    )


def triple_product(R, A, P) -> sparse.csr_matrix:
    """Return ``R @ A @ P`` with exact zeros dropped.

    When ``R`` is exactly ``P.T`` and ``A`` is symmetric the result is
    symmetrised so the coarse operator is entrywise symmetric; the
    averaging only touches the last bit of mismatched round-off.
    """
    if A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if R.shape[1] != A.shape[0] or P.shape[0] != A.shape[1]:
        raise ValueError(
            f"dimension mismatch: R {R.shape}, A {A.shape}, P {P.shape}"
        )
    R = canonical(R)
    A = canonical(A)
    P = canonical(P)
    C = canonical(R @ (A @ P))
    if R.shape[0] == P.shape[1] and _same(R, canonical(P.T)) and is_symmetric(A):
        C = canonical((C + C.T) * 0.5)
    C.eliminate_zeros()
    return C


# --------------------------------------------------------------------------
# Matrix Market
# --------------------------------------------------------------------------

_BANNER = "%%matrixmarket"


def _data_lines(fh):
    for line in fh:
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        yield s


def read_matrix_market(path) -> sparse.csr_matrix:
    """Read a real coordinate Matrix Market file (general or symmetric).

    Duplicate coordinates and out-of-range indices are rejected rather
    than silently summed.
    """
    with open(path, "r") as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[0].lower() != _BANNER:
            raise MatrixMarketError(f"{path}: malformed header")
        _, obj, fmt, field, symm = (h.lower() for h in header)
        if obj != "matrix" or fmt != "coordinate":
            raise MatrixMarketError(f"{path}: only 'matrix coordinate' is supported")
        if field not in ("real", "integer", "double"):
            raise MatrixMarketError(f"{path}: unsupported field '{field}'")
        if symm not in ("general", "symmetric"):
            raise MatrixMarketError(f"{path}: unsupported symmetry '{symm}'")
        lines = _data_lines(fh)
        try:
            nr, nc, nnz = (int(t) for t in next(lines).split())
        except (StopIteration, ValueError) as exc:
            raise MatrixMarketError(f"{path}: malformed size line") from exc
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.float64)
        k = 0
        for s in lines:
            if k >= nnz:
                raise MatrixMarketError(f"{path}: more entries than declared")
            parts = s.split()
            if len(parts) != 3:
                raise MatrixMarketError(f"{path}: malformed entry line '{s}'")
            rows[k] = int(parts[0]) - 1
            cols[k] = int(parts[1]) - 1
            vals[k] = float(parts[2])
            k += 1
        if k != nnz:
            raise MatrixMarketError(f"{path}: expected {nnz} entries, found {k}")
    if nnz and (rows.min() < 0 or cols.min() < 0 or rows.max() >= nr or cols.max() >= nc):
        raise MatrixMarketError(f"{path}: index out of range")
    key = rows * nc + cols
    if np.unique(key).size != nnz:
        raise MatrixMarketError(f"{path}: duplicate entries")
    if symm == "symmetric":
        if np.any(rows < cols):
            raise MatrixMarketError(f"{path}: symmetric file stores upper-triangle entries")
        off = rows != cols
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, vals[off]]),
        )
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(nr, nc))
    A.sort_indices()
    return A


def write_matrix_market(A, path, symmetric: bool = False) -> None:
    """Write ``A`` in coordinate format with 17 significant digits."""
    A = canonical(A)
    coo = A.tocoo()
    rows, cols, vals = coo.row, coo.col, coo.data
    kind = "general"
    if symmetric:
        if not is_symmetric(A):
            raise ValueError("matrix is not symmetric")
        keep = rows >= cols
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
        kind = "symmetric"
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate real {kind}\n")
        fh.write(f"{A.shape[0]} {A.shape[1]} {len(vals)}\n")
        for i, j, v in zip(rows.tolist(), cols.tolist(), vals.tolist()):
            fh.write(f"{i + 1} {j + 1} {v:.17g}\n")
    os.replace(tmp, path)


def write_vector(x, path) -> None:
    """Write a dense vector as a Matrix Market ``array`` file."""
    x = np.asarray(x, dtype=np.float64).ravel()
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix array real general\n")
        fh.write(f"{x.size} 1\n")
        for v in x.tolist():
            fh.write(f"{v:.17g}\n")


def read_vector(path) -> np.ndarray:
    with open(path, "r") as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[0].lower() != _BANNER or header[2].lower() != "array":
            raise MatrixMarketError(f"{path}: not a Matrix Market array file")
        lines = _data_lines(fh)
        try:
            n, m = (int(t) for t in next(lines).split())
        except (StopIteration, ValueError) as exc:
            raise MatrixMarketError(f"{path}: malformed size line") from exc
        if m != 1:
            raise MatrixMarketError(f"{path}: expected a single column")
        vals = [float(s) for s in lines]
    if len(vals) != n:
        raise MatrixMarketError(f"{path}: expected {n} values, found {len(vals)}")
    return np.asarray(vals, dtype=np.float64)
