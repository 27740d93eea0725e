"""Linear Lagrange elements on triangles."""
from __future__ import annotations

import numpy as np
from scipy import sparse

from amgtune.meshes.problems import finalize


def p1_local_stiffness(xy: np.ndarray, kappa: float = 1.0) -> np.ndarray:
    """3x3 stiffness of one triangle; raises on zero area."""
    B = np.array([xy[1] - xy[0], xy[2] - xy[0]]).T
    det = np.linalg.det(B)
    if det == 0.0:
        raise ValueError("degenerate triangle")
    Binv = np.linalg.inv(B)
    ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    G = ref @ Binv
    return kappa * 0.5 * abs(det) * (G @ G.T)


def assemble_fem_p1_diffusion(mesh, field):
    """Stiffness on interior vertices with homogeneous Dirichlet data and f = 1."""
    if mesh.dim != 2 or any(len(c) != 3 for c in mesh.cells):
        raise ValueError("P1 FEM needs a triangular mesh")
    T = np.array([c for c in mesh.cells])
    X = mesh.vertices[T]  # (nc, 3, 2)
    B = np.stack([X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]], axis=2)  # columns are edge vectors
    det = np.linalg.det(B)
    if np.any(det == 0.0):
        raise ValueError(f"degenerate triangle {int(np.flatnonzero(det == 0.0)[0])}")
    Binv = np.linalg.inv(B)
    ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    G = np.einsum("ak,ckd->cad", ref, Binv)
    area = 0.5 * np.abs(det)
    K = (field.values * area)[:, None, None] * np.einsum("cad,cbd->cab", G, G)
    nv = mesh.n_vertices
    dof = np.full(nv, -1, dtype=np.int64)
    interior = np.setdiff1d(np.arange(nv), mesh.boundary_vertices())
    dof[interior] = np.arange(interior.size)
    rows = np.repeat(dof[T], 3, axis=1).ravel()
    cols = np.tile(dof[T], (1, 3)).ravel()
    keep = (rows >= 0) & (cols >= 0)
    n = interior.size
    A = sparse.coo_matrix((K.ravel()[keep], (rows[keep], cols[keep])), shape=(n, n))
    load = np.repeat(area / 3.0, 3)
    gi = dof[T].ravel()
    rhs = np.bincount(gi[gi >= 0], weights=load[gi >= 0], minlength=n)
    meta = {"dim": 2, "degree": 1, "discretization": "FEM-P1", "pattern": field.pattern,
            "eps_max": field.eps, "gamma": None}
    return finalize(A, rhs, meta)
