"""Matrix-to-image pooling and logarithmic normalisation.

A sparse matrix of any size becomes an ``m x m x 4`` image whose channels
hold, per block of rows and columns: the largest positive entry, the
largest negative magnitude, the sum of entries and the number of stored
entries.  Leading blocks are one row longer when ``m`` does not divide
``n``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy import sparse

N_FEATURES = 4
_MAGIC = b"AMGP"


@dataclass
class PooledTensor:
    values: np.ndarray  # (m, m, 4)
    normalized: bool = False

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def save(self, path) -> None:
        """Binary dump: magic, m, f (uint32 LE), then float32 LE, channel by channel."""
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<II", self.m, self.values.shape[2]))
            fh.write(np.ascontiguousarray(np.moveaxis(self.values, 2, 0), dtype="<f4").tobytes())

    @classmethod
    def load(cls, path, normalized: bool = True) -> "PooledTensor":
        with open(path, "rb") as fh:
            if fh.read(4) != _MAGIC:
                raise ValueError(f"{path}: not a pooled tensor file")
            m, f = struct.unpack("<II", fh.read(8))
            raw = np.frombuffer(fh.read(), dtype="<f4")
        if raw.size != m * m * f:
            raise ValueError(f"{path}: truncated tensor data")
        vals = np.moveaxis(raw.reshape(f, m, m), 0, 2).astype(np.float64)
        return cls(vals, normalized)


def block_index(idx: np.ndarray, n: int, m: int) -> np.ndarray:
    """Block of each row/column index: the first ``n mod m`` blocks hold q+1 rows."""
    q, rem = divmod(n, m)
    t = (q + 1) * rem
    idx = np.asarray(idx, dtype=np.int64)
    out = np.empty_like(idx)
    lo = idx < t
    out[lo] = idx[lo] // (q + 1)
    if q > 0:
        out[~lo] = (idx[~lo] - t) // q + rem
    return out


def pool(A, m: int = 32) -> PooledTensor:
    """Pool a square sparse matrix into an ``m x m x 4`` tensor in O(nnz)."""
    if m < 1:
        raise ValueError("m must be positive")
    A = sparse.coo_matrix(A)
    n = A.shape[0]
    V = np.zeros((m, m, N_FEATURES))
    if A.nnz == 0:
        return PooledTensor(V)
    bi = block_index(A.row, n, m)
    bj = block_index(A.col, n, m)
    flat = bi * m + bj
    val = A.data.astype(np.float64)
    ch = V.reshape(m * m, N_FEATURES)
    c0 = np.zeros(m * m)
    c1 = np.zeros(m * m)
    c2 = np.zeros(m * m)
    c3 = np.zeros(m * m)
    np.maximum.at(c0, flat, np.maximum(val, 0.0))
    np.maximum.at(c1, flat, np.maximum(-val, 0.0))
    np.add.at(c2, flat, val)
    np.add.at(c3, flat, 1.0)
    ch[:, 0], ch[:, 1], ch[:, 2], ch[:, 3] = c0, c1, c2, c3
    return PooledTensor(V)


def normalize(V: PooledTensor) -> PooledTensor:
    """Per channel: sign(v) log(|v| + 1) / max |log(|v| + 1)|; zero channels stay zero."""
    if V.normalized:
        raise ValueError("tensor is already normalized")
    v = V.values
    mag = np.log1p(np.abs(v))
    out = np.zeros_like(v)
    for f in range(v.shape[2]):
        top = mag[:, :, f].max()
        if top > 0.0:
            out[:, :, f] = np.sign(v[:, :, f]) * mag[:, :, f] / top
    return PooledTensor(out, normalized=True)


def pooled_features(A, m: int = 32) -> np.ndarray:
    """Normalized ``(m, m, 4)`` array ready for the surrogate."""
    return normalize(pool(A, m)).values
