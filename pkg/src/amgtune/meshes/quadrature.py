"""Gauss rules on segments, triangles (collapsed square) and boxes."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_unit(npts: int):
    """Gauss-Legendre points and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def points_for_degree(degree: int) -> int:
    return max(1, (degree + 2) // 2)


@lru_cache(maxsize=None)
def triangle_rule(degree: int):
    """Rule on the reference triangle (0,0),(1,0),(0,1) exact to ``degree``.

    Duffy map of a tensor Gauss rule; the Jacobian adds one degree in the
    collapsed direction.
    """
    nu = points_for_degree(degree + 1)
    nv = points_for_degree(degree)
    xu, wu = gauss_unit(nu)
    xv, wv = gauss_unit(nv)
    U, Vv = np.meshgrid(xu, xv, indexing="ij")
    W = np.outer(wu, wv) * (1.0 - U)
    xi = U.ravel()
    eta = (Vv * (1.0 - U)).ravel()
    return np.column_stack([xi, eta]), W.ravel()


@lru_cache(maxsize=None)
def box_rule(degree: int, dim: int):
    x, w = gauss_unit(points_for_degree(degree))
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    wgrid = np.ones_like(grids[0])
    for W in np.meshgrid(*([w] * dim), indexing="ij"):
        wgrid = wgrid * W
    return np.column_stack([g.ravel() for g in grids]), wgrid.ravel()
