"""Multilevel hierarchy construction (setup phase)."""
from __future__ import annotations

import io
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse import linalg as spla

from amgtune.amg.coarsening import CfSplitting, StrengthGraph, build_interpolation, build_strength, cljp_split
from amgtune.amg.smoothers import SmootherState
from amgtune.sparse import canonical, is_symmetric, triple_product

DENSE_COARSE_LIMIT = 2000


@dataclass
class Level:
    A: sparse.csr_matrix
    strength: StrengthGraph | None = None
    splitting: CfSplitting | None = None
    P: sparse.csr_matrix | None = None
    R: sparse.csr_matrix | None = None
    smoother: SmootherState | None = None
    zero_denominator_rows: int = 0
    empty_interp_rows: int = 0

    @property
    def n(self) -> int:
        return self.A.shape[0]


class CoarseSolver:
    """Direct solve on the coarsest level: dense Cholesky/LU, sparse LU if large."""

    def __init__(self, A):
        n = A.shape[0]
        self.n = n
        self._mode = None
        if n == 0:
            self._mode = "empty"
        elif n <= DENSE_COARSE_LIMIT:
            dense = A.toarray()
            try:
                self._fac = scipy.linalg.cho_factor(dense)
                self._mode = "cholesky"
            except np.linalg.LinAlgError:
                self._fac = scipy.linalg.lu_factor(dense)
                self._mode = "lu"
        else:
            self._fac = spla.splu(sparse.csc_matrix(A))
            self._mode = "splu"

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self._mode == "empty":
            return np.zeros(0)
        if self._mode == "cholesky":
            return scipy.linalg.cho_solve(self._fac, b)
        if self._mode == "lu":
            return scipy.linalg.lu_solve(self._fac, b)
        return self._fac.solve(b)


@dataclass
class AmgHierarchy:
    levels: list
    coarse_solver: CoarseSolver
    theta: float
    seed: int
    setup_time: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def sizes(self) -> list:
        return [lvl.n for lvl in self.levels]

    def operator_complexity(self) -> float:
        nnz = [lvl.A.nnz for lvl in self.levels]
        return float(sum(nnz) / nnz[0]) if nnz[0] else 1.0

    def diagnostics(self) -> list:
        rows = []
        for k, lvl in enumerate(self.levels):
            if lvl.splitting is not None:
                nc = lvl.splitting.n_coarse
                nf = lvl.n - nc
            else:
                nc, nf = 0, 0
            rows.append({
                "level": k,
                "n": lvl.n,
                "nnz": lvl.A.nnz,
                "n_coarse": nc,
                "n_fine": nf,
                "zero_denominator_rows": lvl.zero_denominator_rows,
                "empty_interp_rows": lvl.empty_interp_rows,
            })
        return rows

    def diagnostics_csv(self) -> str:
        buf = io.StringIO()
        keys = ["level", "n", "nnz", "n_coarse", "n_fine", "zero_denominator_rows", "empty_interp_rows"]
        buf.write(",".join(keys) + "\n")
        for row in self.diagnostics():
            buf.write(",".join(str(row[k]) for k in keys) + "\n")
        buf.write(f"# operator_complexity,{self.operator_complexity():.6f}\n")
        return buf.getvalue()


def amg_setup(A, theta: float = 0.25, seed: int = 0, max_levels: int = 25, min_coarse: int = 2,
              check_symmetric: bool = True) -> AmgHierarchy:
    """Build the hierarchy A^(k), P_k, R_k = P_k^T, A^(k+1) = R_k A^(k) P_k.

    Coarsening stops when a level has fewer than ``min_coarse`` points, when
    the splitting produces no C-points (or no F-points), or at ``max_levels``.
    Each level draws its CLJP tie-break numbers from ``(seed, level)``.
    """
    t0 = time.perf_counter()
    A = canonical(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if check_symmetric and not is_symmetric(A):
        raise ValueError("AMG setup requires a symmetric matrix")
    levels = [Level(A)]
    while len(levels) < max_levels:
        lvl = levels[-1]
        if lvl.n < min_coarse:
            break
        G = build_strength(lvl.A, theta)
        split = cljp_split(G, seed=[int(seed), len(levels) - 1])
        nc = split.n_coarse
        if nc == 0 or nc == lvl.n:
            break
        P, info = build_interpolation(lvl.A, G, split, return_info=True)
        R = canonical(P.T)
        Ac = triple_product(R, lvl.A, P)
        lvl.strength, lvl.splitting, lvl.P, lvl.R = G, split, P, R
        lvl.zero_denominator_rows = info.zero_denominator_rows
        lvl.empty_interp_rows = info.empty_rows
        levels.append(Level(Ac))
    for lvl in levels:
        f_mask = lvl.splitting.f_mask if lvl.splitting is not None else np.ones(lvl.n, dtype=bool)
        lvl.smoother = SmootherState.build(lvl.A, f_mask=f_mask)
    coarse = CoarseSolver(levels[-1].A)
    h = AmgHierarchy(levels, coarse, float(theta), int(seed) if np.isscalar(seed) else 0)
    h.setup_time = time.perf_counter() - t0
    return h
