"""Linear-system container and the dispatch from a description to an assembled system."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import sparse

from amgtune.sparse import canonical, is_symmetric

SPD_CHECK_LIMIT = 2000
DISCRETIZATIONS = ("FEM-P1", "VEM1", "DG", "DG-elasticity")
GAMMA_DRAWS = 20


class CoercivityError(ValueError):
    """Assembled matrix failed the positive-definiteness spot-check."""


@dataclass
class ProblemInstance:
    matrix: sparse.csr_matrix
    rhs: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz


def symmetrize(A) -> sparse.csr_matrix:
    A = canonical(A)
    S = canonical((A + A.T) * 0.5)
    S.eliminate_zeros()
    return S


def spd_spot_check(A, advice: str = "") -> None:
    """Dense Cholesky on small matrices; larger ones are trusted."""
    if A.shape[0] > SPD_CHECK_LIMIT or A.shape[0] == 0:
        return
    try:
        scipy.linalg.cholesky(A.toarray(), lower=True)
    except np.linalg.LinAlgError as exc:
        raise CoercivityError("matrix is not positive definite" + (f"; {advice}" if advice else "")) from exc


def finalize(A, rhs, metadata: dict, advice: str = "") -> ProblemInstance:
    A = symmetrize(A)
    assert is_symmetric(A)
    spd_spot_check(A, advice)
    meta = dict(metadata)
    meta["n"] = int(A.shape[0])
    meta["nnz"] = int(A.nnz)
    return ProblemInstance(A, np.asarray(rhs, dtype=np.float64), meta)


def build_problem(discretization: str, family: str = "quad", refinement: int = 1, pattern: str = "random-cellwise",
                  eps: float | None = None, eps_max: float | None = 1.0, degree: int = 1,
                  gamma: float | None = None, nu: float = 0.29, seed: int = 0, base: int = 4,
                  growth: float = 2.0, mesh=None, gamma_range: tuple | None = None) -> ProblemInstance:
    """Generate mesh, coefficients and the assembled system in one call.

    ``gamma`` defaults to a draw from ``gamma_range`` (``U[5, 20]``, or
    ``U[4, 20]`` for 2D elasticity) using ``seed``.
    """
    from amgtune.meshes import dg, fem, vem
    from amgtune.meshes.coefficients import make_coefficients
    from amgtune.meshes.mesh import generate_mesh

    if discretization not in DISCRETIZATIONS:
        raise ValueError(f"unknown discretization '{discretization}'")
    if mesh is None:
        mesh = generate_mesh(family, refinement, base=base, growth=growth, seed=seed)
    rng = np.random.default_rng([int(seed), 7])
    if pattern == "random-cellwise":
        coef_seed = int(rng.integers(2 ** 31))
    else:
        coef_seed = 0
    elastic = discretization == "DG-elasticity"
    field_ = make_coefficients(mesh, pattern, eps=eps, eps_max=eps_max, seed=coef_seed,
                               nu=nu if elastic else None)
    if mesh.cell_values is not None and family == "file":
        field_.values = mesh.cell_values.copy()
    extra = {"family": mesh.family, "refinement": refinement, "seed": seed}
    if discretization == "FEM-P1":
        prob = fem.assemble_fem_p1_diffusion(mesh, field_)
    elif discretization == "VEM1":
        prob = vem.assemble_vem1_diffusion(mesh, field_)
    else:
        assemble = dg.assemble_dg_elasticity if elastic else dg.assemble_dg_diffusion
        if gamma is not None:
            prob = assemble(mesh, field_, degree, gamma)
        else:
            # redraw the penalty until the spot-check passes
            if gamma_range is None:
                gamma_range = (4.0 if (elastic and mesh.dim == 2) else 5.0, 20.0)
            for attempt in range(GAMMA_DRAWS):
                g = float(rng.uniform(*gamma_range))
                try:
                    prob = assemble(mesh, field_, degree, g)
                    break
                except CoercivityError:
                    if attempt == GAMMA_DRAWS - 1:
                        raise
    prob.metadata.update(extra)
    return prob
