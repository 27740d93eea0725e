"""Lowest-order virtual elements on polygons."""
from __future__ import annotations

import numpy as np
from scipy import sparse

from amgtune.meshes.mesh import polygon_area_centroid
from amgtune.meshes.problems import finalize


def _is_star_shaped(xy: np.ndarray, center: np.ndarray) -> bool:
    a = xy - center
    b = np.roll(xy, -1, axis=0) - center
    return bool(np.all(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0] > 0.0))


def vem1_local_matrices(xy: np.ndarray, kappa: float = 1.0):
    """Consistency and stabilisation parts of the local stiffness.

    Returns ``(consistency, stabilization)``; their sum is the local
    matrix on the polygon's vertex values (counter-clockwise order).
    """
    nv = xy.shape[0]
    area, xc = polygon_area_centroid(xy)
    if not area > 0.0:
        raise ValueError("polygon has non-positive area")
    if not _is_star_shaped(xy, xc):
        raise ValueError("polygon is not star-shaped with respect to its centroid")
    d = xy[:, None, :] - xy[None, :, :]
    h = float(np.sqrt((d ** 2).sum(-1)).max())
    D = np.column_stack([np.ones(nv), (xy - xc) / h])
    # outward normal times length of each edge i -> i+1
    e = np.roll(xy, -1, axis=0) - xy
    nl = np.column_stack([e[:, 1], -e[:, 0]])
    vert_n = 0.5 * (nl + np.roll(nl, 1, axis=0))
    B = np.vstack([np.full(nv, 1.0 / nv), vert_n.T / h])
    G = B @ D
    proj_star = np.linalg.solve(G, B)
    proj = D @ proj_star
    Gt = G.copy()
    Gt[0, :] = 0.0
    cons = kappa * proj_star.T @ Gt @ proj_star
    I_P = np.eye(nv) - proj
    stab = kappa * I_P.T @ I_P
    return cons, stab


def assemble_vem1_diffusion(mesh, field):
    """Vertex-based stiffness with boundary vertices eliminated and f = 1."""
    if mesh.dim != 2:
        raise ValueError("VEM assembly is 2D only")
    nv = mesh.n_vertices
    dof = np.full(nv, -1, dtype=np.int64)
    interior = np.setdiff1d(np.arange(nv), mesh.boundary_vertices())
    dof[interior] = np.arange(interior.size)
    n = interior.size
    rows, cols, vals = [], [], []
    rhs = np.zeros(n)
    for k, cell in enumerate(mesh.cells):
        xy = mesh.vertices[cell]
        try:
            cons, stab = vem1_local_matrices(xy, field.values[k])
        except ValueError as exc:
            raise ValueError(f"cell {k}: {exc}") from exc
        g = dof[cell]
        ok = g >= 0
        gi = g[ok]
        K = (cons + stab)[np.ix_(ok, ok)]
        rows.append(np.repeat(gi, gi.size))
        cols.append(np.tile(gi, gi.size))
        vals.append(K.ravel())
        rhs[gi] += mesh.volumes[k] / len(cell)
    A = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    meta = {"dim": 2, "degree": 1, "discretization": "VEM1", "pattern": field.pattern,
            "eps_max": field.eps, "gamma": None}
    return finalize(A, rhs, meta)
