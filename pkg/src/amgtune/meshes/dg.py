"""Symmetric interior-penalty discontinuous Galerkin on polygons and boxes.

Interface fluxes use coefficient-weighted averages (the weight of each side
is the neighbour's share of ``k+ + k-``), which pairs with the harmonic-mean
penalty and keeps the form coercive under large coefficient jumps.

Each cell carries scaled monomials ``((x - x_K) / h_K)**alpha`` with
``|alpha| <= p`` centred at the cell centroid and scaled by its diameter.
"""
from __future__ import annotations

from itertools import product

import numpy as np
from scipy import sparse

from amgtune.meshes.problems import finalize
from amgtune.meshes.quadrature import box_rule, gauss_unit, points_for_degree, triangle_rule

_CHUNK = 4096
_ADVICE = "increase the penalty parameter gamma"


def basis_exponents(p: int, dim: int) -> np.ndarray:
    """Monomial exponents of total degree <= p, ordered by degree."""
    exps = [e for e in product(range(p + 1), repeat=dim) if sum(e) <= p]
    exps.sort(key=lambda e: (sum(e), tuple(-x for x in e)))
    return np.array(exps, dtype=np.int64)


def basis_size(p: int, dim: int) -> int:
    if dim == 2:
        return (p + 1) * (p + 2) // 2
    return (p + 1) * (p + 2) * (p + 3) // 6


def eval_basis(pts: np.ndarray, center: np.ndarray, h: np.ndarray, exps: np.ndarray):
    """Values ``(..., nb)`` and gradients ``(..., nb, d)`` of the scaled monomials."""
    s = (pts - center) / h[..., None]
    S = s[..., None, :]  # (..., 1, d)
    pw = S ** exps  # (..., nb, d)
    phi = pw.prod(axis=-1)
    dim = exps.shape[1]
    grad = np.empty(phi.shape + (dim,))
    lower = np.maximum(exps - 1, 0)
    for k in range(dim):
        other = np.ones_like(phi)
        for l in range(dim):
            if l != k:
                other = other * pw[..., l]
        grad[..., k] = exps[:, k] * S[..., k] ** lower[:, k] * other / h[..., None]
    return phi, grad


def _volume_points(mesh, degree: int):
    """Quadrature on every cell as flat arrays (owner cell, points, weights)."""
    if mesh.dim == 2:
        ref, rw = triangle_rule(degree)
        owner, a0, a1, a2 = [], [], [], []
        cen = mesh.centroids
        for k, cell in enumerate(mesh.cells):
            xy = mesh.vertices[cell]
            owner.append(np.full(len(cell), k))
            a0.append(np.repeat(cen[k][None], len(cell), axis=0))
            a1.append(xy)
            a2.append(np.roll(xy, -1, axis=0))
        owner = np.concatenate(owner)
        a0, a1, a2 = np.concatenate(a0), np.concatenate(a1), np.concatenate(a2)
        e1, e2 = a1 - a0, a2 - a0
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(det <= 0.0):
            raise ValueError("cell is not star-shaped with respect to its centroid")
        pts = a0[:, None, :] + ref[None, :, 0, None] * e1[:, None, :] + ref[None, :, 1, None] * e2[:, None, :]
        w = det[:, None] * rw[None, :]
        return owner, pts, w
    ref, rw = box_rule(degree, 3)
    lo = np.array([mesh.vertices[c].min(axis=0) for c in mesh.cells])
    hi = np.array([mesh.vertices[c].max(axis=0) for c in mesh.cells])
    pts = lo[:, None, :] + ref[None] * (hi - lo)[:, None, :]
    w = mesh.volumes[:, None] * rw[None, :]
    return np.arange(mesh.n_cells), pts, w


def _face_points(mesh, degree: int):
    fc = mesh.faces
    X = mesh.vertices
    if mesh.dim == 2:
        t, w = gauss_unit(points_for_degree(degree))
        V = np.array(fc.vertices)
        x0, x1 = X[V[:, 0]], X[V[:, 1]]
        pts = x0[:, None, :] + t[None, :, None] * (x1 - x0)[:, None, :]
        wts = fc.measure[:, None] * w[None, :]
        return pts, wts
    ref, w = box_rule(degree, 2)
    V = np.array(fc.vertices)
    p0, p1, p3 = X[V[:, 0]], X[V[:, 1]], X[V[:, 3]]
    pts = p0[:, None, :] + ref[None, :, 0, None] * (p1 - p0)[:, None, :] + ref[None, :, 1, None] * (p3 - p0)[:, None, :]
    wts = fc.measure[:, None] * w[None, :]
    return pts, wts


def harmonic(a, b):
    return 2.0 * a * b / (a + b)


class _Assembler:
    def __init__(self, n):
        self.n = n
        self.rows, self.cols, self.vals = [], [], []

    def add_blocks(self, dofs: np.ndarray, blocks: np.ndarray):
        m = dofs.shape[1]
        self.rows.append(np.repeat(dofs, m, axis=1).ravel())
        self.cols.append(np.tile(dofs, (1, m)).ravel())
        self.vals.append(blocks.ravel())

    def matrix(self):
        return sparse.coo_matrix((np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
                                 shape=(self.n, self.n))


def _check(mesh, p, gamma):
    if p not in (1, 2, 3, 4):
        raise ValueError("polynomial degree must be in 1..4")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if mesh.dim == 3 and mesh.family not in ("cart3d", "file"):
        raise ValueError("3D assembly supports Cartesian box meshes only")


def _cell_dofs(cells, nloc):
    return cells[:, None] * nloc + np.arange(nloc)[None, :]


def assemble_dg_diffusion(mesh, field, p: int = 1, gamma: float = 10.0):
    """SIP-DG stiffness for ``-div(kappa grad u) = 1`` with u = 0 on the boundary."""
    _check(mesh, p, gamma)
    d = mesh.dim
    exps = basis_exponents(p, d)
    nb = exps.shape[0]
    nc = mesh.n_cells
    kappa = field.values
    cen, hK = mesh.centroids, mesh.diameters
    asm = _Assembler(nc * nb)
    rhs = np.zeros(nc * nb)

    owner, pts, w = _volume_points(mesh, 2 * p + 1)
    local = np.zeros((nc, nb, nb))
    for s in range(0, owner.size, _CHUNK):
        o = owner[s:s + _CHUNK]
        phi, grad = eval_basis(pts[s:s + _CHUNK], cen[o][:, None, :], np.repeat(hK[o][:, None], pts.shape[1], 1), exps)
        ww = w[s:s + _CHUNK]
        K = np.einsum("eq,eqad,eqbd->eab", ww, grad, grad) * kappa[o][:, None, None]
        np.add.at(local, o, K)
        np.add.at(rhs.reshape(nc, nb), o, np.einsum("eq,eqa->ea", ww, phi))
    asm.add_blocks(_cell_dofs(np.arange(nc), nb), local)

    fc = mesh.faces
    fpts, fw = _face_points(mesh, 2 * p + 1)
    nq = fw.shape[1]
    p2 = float(p * p)
    for s in range(0, fc.n, _CHUNK):
        idx = np.arange(s, min(s + _CHUNK, fc.n))
        L, R = fc.left[idx], fc.right[idx]
        nrm = fc.normal[idx]
        X, W = fpts[idx], fw[idx]
        phiL, gL = eval_basis(X, cen[L][:, None, :], np.repeat(hK[L][:, None], nq, 1), exps)
        dnL = np.einsum("fqad,fd->fqa", gL, nrm)
        bnd = R < 0
        if bnd.any():
            b = np.flatnonzero(bnd)
            kb = kappa[L[b]]
            sig = gamma * kb * p2 / hK[L[b]]
            J, A = phiL[b], kb[:, None, None] * dnL[b]
            M = -np.einsum("fq,fqa,fqb->fab", W[b], J, A)
            M = M + M.transpose(0, 2, 1) + sig[:, None, None] * np.einsum("fq,fqa,fqb->fab", W[b], J, J)
            asm.add_blocks(_cell_dofs(L[b], nb), M)
        it = np.flatnonzero(~bnd)
        if it.size:
            Li, Ri = L[it], R[it]
            phiR, gR = eval_basis(X[it], cen[Ri][:, None, :], np.repeat(hK[Ri][:, None], nq, 1), exps)
            dnR = np.einsum("fqad,fd->fqa", gR, nrm[it])
            kL, kR = kappa[Li], kappa[Ri]
            sig = gamma * harmonic(kL * p2 / hK[Li], kR * p2 / hK[Ri])
            J = np.concatenate([phiL[it], -phiR], axis=2)
            wL, wR = kR / (kL + kR), kL / (kL + kR)
            A = np.concatenate([(wL * kL)[:, None, None] * dnL[it], (wR * kR)[:, None, None] * dnR], axis=2)
            Wi = W[it]
            M = -np.einsum("fq,fqa,fqb->fab", Wi, J, A)
            M = M + M.transpose(0, 2, 1) + sig[:, None, None] * np.einsum("fq,fqa,fqb->fab", Wi, J, J)
            dofs = np.concatenate([_cell_dofs(Li, nb), _cell_dofs(Ri, nb)], axis=1)
            asm.add_blocks(dofs, M)

    meta = {"dim": d, "degree": p, "discretization": "DG", "pattern": field.pattern,
            "eps_max": field.eps, "gamma": float(gamma)}
    return finalize(asm.matrix(), rhs, meta, _ADVICE)


def _vector_values(phi, d):
    """(…, nq, nb) scalar values -> (…, nq, d, d*nb) with dof order (component, basis)."""
    nb = phi.shape[-1]
    V = np.zeros(phi.shape[:-1] + (d, d * nb))
    for c in range(d):
        V[..., c, c * nb:(c + 1) * nb] = phi
    return V


def _tractions(grad, nrm, lam, mu):
    """sigma(v) n for every vector dof; grad (f,q,nb,d), nrm (f,d) -> (f,q,d,d*nb)."""
    f, q, nb, d = grad.shape
    gn = np.einsum("fqad,fd->fqa", grad, nrm)
    T = np.zeros((f, q, d, d * nb))
    for c in range(d):
        blk = slice(c * nb, (c + 1) * nb)
        # mu * delta_ck (g.n)
        T[:, :, c, blk] += mu[:, None, None] * gn
        for k in range(d):
            # mu * n_c g_k + lam * g_c n_k
            T[:, :, k, blk] += (mu[:, None, None] * nrm[:, c, None, None] * grad[..., k]
                                + lam[:, None, None] * grad[..., c] * nrm[:, k, None, None])
    return T


def assemble_dg_elasticity(mesh, field, p: int = 1, gamma: float = 10.0):
    """SIP-DG for linear elasticity with clamped boundary and body force (1, ..., 1).

    Penalty per face: ``gamma * p**2 * E / h``, harmonic-averaged on
    interior faces.
    """
    _check(mesh, p, gamma)
    if field.nu is None:
        raise ValueError("elasticity needs a field with a Poisson ratio")
    d = mesh.dim
    exps = basis_exponents(p, d)
    nb = exps.shape[0]
    nloc = d * nb
    nc = mesh.n_cells
    E = field.values
    lam, mu = field.lame()
    cen, hK = mesh.centroids, mesh.diameters
    asm = _Assembler(nc * nloc)
    rhs = np.zeros((nc, nloc))

    owner, pts, w = _volume_points(mesh, 2 * p + 1)
    local = np.zeros((nc, d, nb, d, nb))
    for s in range(0, owner.size, _CHUNK):
        o = owner[s:s + _CHUNK]
        phi, g = eval_basis(pts[s:s + _CHUNK], cen[o][:, None, :], np.repeat(hK[o][:, None], pts.shape[1], 1), exps)
        ww = w[s:s + _CHUNK]
        gg = np.einsum("eq,eqak,eqbk->eab", ww, g, g)
        cross = np.einsum("zq,zqax,zqbc->zcaxb", ww, g, g)  # g_{a,x} g_{b,c} at (c,a),(x,b)
        K = np.zeros((o.size, d, nb, d, nb))
        for c in range(d):
            K[:, c, :, c, :] += mu[o][:, None, None] * gg
        K += mu[o][:, None, None, None, None] * cross
        K += lam[o][:, None, None, None, None] * np.einsum("zq,zqac,zqbx->zcaxb", ww, g, g)
        np.add.at(local, o, K)
        load = np.einsum("eq,eqa->ea", ww, phi)
        np.add.at(rhs, o, np.tile(load, (1, d)))
    asm.add_blocks(_cell_dofs(np.arange(nc), nloc), local.reshape(nc, nloc, nloc))

    fc = mesh.faces
    fpts, fw = _face_points(mesh, 2 * p + 1)
    nq = fw.shape[1]
    p2 = float(p * p)
    for s in range(0, fc.n, _CHUNK):
        idx = np.arange(s, min(s + _CHUNK, fc.n))
        L, R = fc.left[idx], fc.right[idx]
        nrm = fc.normal[idx]
        X, W = fpts[idx], fw[idx]
        phiL, gL = eval_basis(X, cen[L][:, None, :], np.repeat(hK[L][:, None], nq, 1), exps)
        VL = _vector_values(phiL, d)
        TL = _tractions(gL, nrm, lam[L], mu[L])
        bnd = R < 0
        if bnd.any():
            b = np.flatnonzero(bnd)
            eta = gamma * E[L[b]] * p2 / hK[L[b]]
            J, A = VL[b], TL[b]
            M = -np.einsum("fq,fqki,fqkj->fij", W[b], J, A)
            M = M + M.transpose(0, 2, 1) + eta[:, None, None] * np.einsum("fq,fqki,fqkj->fij", W[b], J, J)
            asm.add_blocks(_cell_dofs(L[b], nloc), M)
        it = np.flatnonzero(~bnd)
        if it.size:
            Li, Ri = L[it], R[it]
            phiR, gR = eval_basis(X[it], cen[Ri][:, None, :], np.repeat(hK[Ri][:, None], nq, 1), exps)
            VR = _vector_values(phiR, d)
            TR = _tractions(gR, nrm[it], lam[Ri], mu[Ri])
            eta = gamma * harmonic(E[Li] * p2 / hK[Li], E[Ri] * p2 / hK[Ri])
            J = np.concatenate([VL[it], -VR], axis=3)
            eL, eR = E[Li], E[Ri]
            wL, wR = eR / (eL + eR), eL / (eL + eR)
            A = np.concatenate([wL[:, None, None, None] * TL[it], wR[:, None, None, None] * TR], axis=3)
            Wi = W[it]
            M = -np.einsum("fq,fqki,fqkj->fij", Wi, J, A)
            M = M + M.transpose(0, 2, 1) + eta[:, None, None] * np.einsum("fq,fqki,fqkj->fij", Wi, J, J)
            dofs = np.concatenate([_cell_dofs(Li, nloc), _cell_dofs(Ri, nloc)], axis=1)
            asm.add_blocks(dofs, M)

    meta = {"dim": d, "degree": p, "discretization": "DG-elasticity", "pattern": field.pattern,
            "eps_max": field.eps, "gamma": float(gamma), "nu": field.nu}
    return finalize(asm.matrix(), rhs.ravel(), meta, _ADVICE)
