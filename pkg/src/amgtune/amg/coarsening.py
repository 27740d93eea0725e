"""Strength of connection, CLJP C/F splitting and classical interpolation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from amgtune.amg import _kernels
from amgtune.sparse import canonical

C_PT = _kernels.C_PT
F_PT = _kernels.F_PT


@dataclass(frozen=True)
class StrengthGraph:
    """Strong dependencies of every row.

    ``S`` has a stored one at (i, j) when i strongly depends on j; ``ST``
    is its transpose, so row j of ``ST`` lists the points j influences.
    """

    S: sparse.csr_matrix
    ST: sparse.csr_matrix
    theta: float

    @property
    def n(self) -> int:
        return self.S.shape[0]

    def depends(self, i: int) -> set:
        return set(self.S.indices[self.S.indptr[i]:self.S.indptr[i + 1]].tolist())

    def influences(self, i: int) -> set:
        return set(self.ST.indices[self.ST.indptr[i]:self.ST.indptr[i + 1]].tolist())


@dataclass(frozen=True)
class CfSplitting:
    """Per-point labels (1 = C, 0 = F) and the C-point to coarse index map."""

    labels: np.ndarray
    coarse_index: np.ndarray

    @classmethod
    def from_labels(cls, labels) -> "CfSplitting":
        labels = np.asarray(labels, dtype=np.int8)
        is_c = labels == C_PT
        coarse_index = np.full(labels.size, -1, dtype=np.int64)
        coarse_index[is_c] = np.arange(int(is_c.sum()))
        return cls(labels, coarse_index)

    @property
    def n_coarse(self) -> int:
        return int(np.count_nonzero(self.labels == C_PT))

    @property
    def c_mask(self) -> np.ndarray:
        return self.labels == C_PT

    @property
    def f_mask(self) -> np.ndarray:
        return self.labels == F_PT


def build_strength(A, theta: float) -> StrengthGraph:
    """Strong dependencies: j is in S_i when -a_ij >= theta * max_{l != i}(-a_il).

    Rows whose largest negated off-diagonal is not positive have no strong
    dependencies.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    if A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    A = canonical(A)
    n = A.shape[0]
    sp, sj = _kernels.strength(A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data, float(theta))
    S = sparse.csr_matrix((np.ones(sj.size), sj, sp), shape=(n, n))
    ST = canonical(S.T)
    return StrengthGraph(S, ST, float(theta))


def cljp_split(G: StrengthGraph, seed=0) -> CfSplitting:
    """Cleary-Luby-Jones-Plassmann splitting with seeded tie-break weights."""
    n = G.n
    rng = np.random.default_rng(seed)
    rnd = rng.random(n)
    S, ST = G.S, G.ST
    sp = S.indptr.astype(np.int64)
    sj = S.indices.astype(np.int64)
    # position in S of every edge listed by ST
    edge_id = sparse.csr_matrix((np.arange(sj.size, dtype=np.float64) + 1.0, sj, sp), shape=(n, n))
    T = canonical(edge_id.T)
    tpos = T.data.astype(np.int64) - 1
    labels = _kernels.cljp(n, sp, sj, T.indptr.astype(np.int64), T.indices.astype(np.int64), tpos, rnd)
    return CfSplitting.from_labels(labels)


@dataclass(frozen=True)
class InterpolationInfo:
    zero_denominator_rows: int
    empty_rows: int


def build_interpolation(A, G: StrengthGraph, split: CfSplitting, return_info: bool = False):
    """Classical interpolation P (n x n_coarse).

    C-points get a unit row.  An F-point interpolates from every coarse
    neighbour j with a_ij != 0; strong F neighbours are distributed over
    those coarse points through the sign-filtered couplings, weak ones are
    lumped into the diagonal.
    """
    A = canonical(A)
    n = A.shape[0]
    pp, pj, px, n_zero, n_empty = _kernels.interpolation(
        A.indptr.astype(np.int64),
        A.indices.astype(np.int64),
        A.data,
        G.S.indptr.astype(np.int64),
        G.S.indices.astype(np.int64),
        split.labels,
        split.coarse_index,
    )
    P = sparse.csr_matrix((px, pj, pp), shape=(n, split.n_coarse))
    P.sort_indices()
    if return_info:
        return P, InterpolationInfo(int(n_zero), int(n_empty))
    return P
