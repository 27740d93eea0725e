import numpy as np
import pytest
from scipy import sparse

from amgtune.amg import (SMOOTHER_NAMES, SolveReport, amg_setup, amg_solve, convergence_factor, pcg_solve, solve,
                         vcycle)
from amgtune.meshes.problems import build_problem
from helpers import laplacian_1d, random_m_matrix


def dense_smoother_matrix(A, kind, f_mask, backward=False):
    """Iteration matrix M such that one sweep maps the error e to (I - M A) e."""
    from amgtune.amg.smoothers import FCF_WEIGHT

    n = A.shape[0]
    D = np.diag(A)
    if kind == "sor-jacobi":
        return np.linalg.inv(np.triu(A) if backward else np.tril(A))
    l1 = np.abs(A).sum(axis=1)
    if kind == "l1-jacobi":
        return np.diag(1 / l1)
    if kind == "l1-sor-jacobi":
        T = (np.triu(A, 1) if backward else np.tril(A, -1)) + np.diag(l1)
        return np.linalg.inv(T)
    eye = np.eye(n)
    E = eye
    for rows in (f_mask, ~f_mask, f_mask):
        Dm = np.diag(np.where(rows, FCF_WEIGHT / D, 0.0))
        E = (eye - Dm @ A) @ E
    return np.linalg.solve(A.T, (eye - E).T).T


def two_grid_operator(h, kind, symmetric=False):
    lvl = h.levels[0]
    A = lvl.A.toarray()
    P = lvl.P.toarray()
    n = A.shape[0]
    eye = np.eye(n)
    mask = lvl.splitting.f_mask
    pre = eye - dense_smoother_matrix(A, kind, mask) @ A
    post = eye - dense_smoother_matrix(A, kind, mask, backward=symmetric and "sor" in kind) @ A
    Ac = P.T @ A @ P
    cgc = eye - P @ np.linalg.solve(Ac, P.T @ A)
    return post @ cgc @ pre


def sparse_two_grid_operator(h, kind, symmetric=False):
    n = h.levels[0].n
    # with f = 0 the iterate is minus the error, and the map is linear
    return np.column_stack([vcycle(h, e, np.zeros(n), kind, symmetric=symmetric) for e in np.eye(n)])


def test_two_grid_1d_laplacian_oracle():
    A = laplacian_1d(5)
    h = amg_setup(A, max_levels=2, seed=4)
    assert h.n_levels == 2
    E = sparse_two_grid_operator(h, "sor-jacobi")
    assert np.max(np.abs(E - two_grid_operator(h, "sor-jacobi"))) < 1e-12


@pytest.mark.parametrize("kind", SMOOTHER_NAMES)
@pytest.mark.parametrize("seed", range(6))
def test_two_grid_random_m_matrices(kind, seed):
    rng = np.random.default_rng(seed)
    A = random_m_matrix(int(rng.integers(10, 61)), rng)
    h = amg_setup(A, max_levels=2, seed=seed)
    if h.n_levels < 2:
        pytest.skip("no coarse level")
    for symmetric in (False, True):
        E = two_grid_operator(h, kind, symmetric)
        assert np.max(np.abs(sparse_two_grid_operator(h, kind, symmetric) - E)) < 1e-12
        assert np.max(np.abs(np.linalg.eigvals(E))) < 1.0


def test_single_level_vcycle_is_direct_solve(rng):
    A = random_m_matrix(1, rng)
    h = amg_setup(A)
    f = np.array([3.0])
    assert np.allclose(vcycle(h, np.zeros(1), f), f / A.toarray()[0, 0])


def test_vcycle_zero_rhs():
    h = amg_setup(laplacian_1d(20))
    assert np.array_equal(vcycle(h, np.zeros(20), np.zeros(20)), np.zeros(20))


def test_vcycle_size_mismatch():
    h = amg_setup(laplacian_1d(20))
    with pytest.raises(ValueError):
        vcycle(h, np.zeros(19), np.zeros(19))


def test_symmetric_vcycle_is_symmetric(rng):
    A = random_m_matrix(40, rng)
    h = amg_setup(A)
    for kind in SMOOTHER_NAMES:
        B = np.column_stack([vcycle(h, np.zeros(40), e, kind, symmetric=True) for e in np.eye(40)])
        assert np.allclose(B, B.T, atol=1e-12)


# --------------------------------------------------------------------------
# stationary iteration
# --------------------------------------------------------------------------

def test_amg_identity_one_iteration():
    u, rep = amg_solve(sparse.identity(8, format="csr"), np.arange(1.0, 9.0))
    assert rep.converged and rep.iterations == 1 and np.allclose(u, np.arange(1.0, 9.0))


def test_amg_poisson_32():
    prob = build_problem("FEM-P1", "tri", 3, base=8)
    assert prob.n == 31 * 31
    u, rep = amg_solve(prob.matrix, prob.rhs, theta=0.25, smoother="sor-jacobi", tol=1e-8)
    assert rep.converged and rep.iterations <= 50
    assert np.linalg.norm(prob.rhs - prob.matrix @ u) / np.linalg.norm(prob.rhs) < 1e-8
    assert len(rep.residuals) == rep.iterations + 1 and 0 < rep.rho < 1


def test_amg_zero_iterations():
    u0 = np.full(10, 0.3)
    u, rep = amg_solve(laplacian_1d(10), np.ones(10), maxiter=0, u0=u0)
    assert not rep.converged and rep.iterations == 0 and np.array_equal(u, u0)


def test_amg_reproducible(rng):
    A = random_m_matrix(200, rng)
    f = np.ones(200)
    a = amg_solve(A, f, seed=5)[1].residuals
    b = amg_solve(A, f, seed=5)[1].residuals
    assert a == b


# --------------------------------------------------------------------------
# PCG
# --------------------------------------------------------------------------

def test_pcg_diagonal_finite_termination():
    A = sparse.diags(np.arange(1.0, 11.0), format="csr")
    h = amg_setup(A)
    u, rep = pcg_solve(A, np.ones(10), h, "l1-jacobi")
    assert rep.converged and rep.iterations <= 10


def test_pcg_crude_tolerance_stops_early():
    A = laplacian_1d(200)
    h = amg_setup(A)
    f = np.ones(200)
    _, rep = pcg_solve(A, f, h, tol=0.5)
    assert rep.converged
    assert rep.residuals[-1] / rep.residuals[0] < 0.5
    assert all(r / rep.residuals[0] >= 0.5 for r in rep.residuals[1:-1])


def test_pcg_poisson_64():
    prob = build_problem("FEM-P1", "tri", 4, base=8)
    assert prob.n == 3969
    u, rep = solve(prob.matrix, prob.rhs, theta=0.25, smoother="sor-jacobi")
    assert rep.converged and rep.iterations <= 30


def test_pcg_a_norm_error_monotone(rng):
    A = random_m_matrix(300, rng)
    f = rng.standard_normal(300)
    exact = np.linalg.solve(A.toarray(), f)
    h = amg_setup(A)
    errs = []
    for k in range(1, 12):
        u, _ = pcg_solve(A, f, h, maxiter=k, tol=1e-30)
        e = u - exact
        errs.append(float(e @ (A @ e)))
    assert all(b <= a * (1 + 1e-10) for a, b in zip(errs, errs[1:]))


def test_pcg_zero_rhs():
    A = laplacian_1d(10)
    u, rep = pcg_solve(A, np.zeros(10), amg_setup(A))
    assert rep.converged and rep.iterations == 0 and rep.rho == 0.0


def test_pcg_indefinite_is_reported():
    A = sparse.csr_matrix(np.diag([1.0, -1.0, 2.0]))
    h = amg_setup(sparse.identity(3, format="csr"))
    _, rep = pcg_solve(A, np.array([0.0, 1.0, 0.0]), h, "l1-jacobi")
    assert not rep.converged and "indefinite" in rep.reason


def test_pcg_maxiter_reached():
    A = laplacian_1d(300)
    _, rep = pcg_solve(A, np.ones(300), amg_setup(A), maxiter=1, tol=1e-14)
    assert not rep.converged and rep.iterations == 1 and rep.reason == "maximum iterations reached"


# --------------------------------------------------------------------------
# convergence factor and reports
# --------------------------------------------------------------------------

def test_convergence_factor_examples():
    assert convergence_factor([1.0] + [0.0] * 7 + [1e-8]) == pytest.approx(0.1, rel=1e-12)
    assert convergence_factor([2.0, 1.0]) == 0.5
    assert convergence_factor([1.0, 3.0]) == 3.0
    assert convergence_factor([0.0, 0.0]) == 0.0
    with pytest.raises(ValueError):
        convergence_factor([1.0])


def test_report_round_trip():
    rep = SolveReport(False, 2, [1.0, 0.5, float("inf")], float("inf"), 0.1, params={"theta": 0.3})
    line = rep.to_record()
    assert "\n" not in line
    back = SolveReport.from_record(line)
    assert back.residuals[-1] == float("inf") and back.params == {"theta": 0.3} and not back.converged
