"""Matrices shared by the test modules."""
import numpy as np
from scipy import sparse


def laplacian_1d(n: int) -> sparse.csr_matrix:
    """tridiag(-1, 2, -1) with Dirichlet ends."""
    return sparse.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


def laplacian_2d(k: int) -> sparse.csr_matrix:
    """5-point Laplacian on a k x k interior grid."""
    T = laplacian_1d(k)
    eye = sparse.identity(k, format="csr")
    return sparse.csr_matrix(sparse.kron(T, eye) + sparse.kron(eye, T))


def random_m_matrix(n: int, rng, density: float = 0.15) -> sparse.csr_matrix:
    """Weighted graph Laplacian plus a positive diagonal shift: SPD M-matrix."""
    W = sparse.random(n, n, density=density, random_state=rng, data_rvs=lambda k: rng.uniform(0.1, 2.0, k))
    W = sparse.triu(W, 1)
    # chain keeps the graph connected
    W = W + sparse.diags(rng.uniform(0.1, 2.0, n - 1), 1)
    W = (W + W.T).tocsr()
    L = sparse.diags(np.asarray(W.sum(axis=1)).ravel()) - W
    return sparse.csr_matrix(L + sparse.diags(rng.uniform(0.01, 0.5, n)))


def random_spd(n: int, rng) -> np.ndarray:
    M = rng.standard_normal((n, n))
    return M @ M.T + n * np.eye(n)


def toy_batch(n_samples: int = 32, m: int = 32, n_images: int = 4, seed: int = 0):
    """Small surrogate dataset whose target is a smooth function of the inputs."""
    from amgtune.surrogate import Batch, extra_features
    from amgtune.amg import SMOOTHER_NAMES

    r = np.random.default_rng(seed)
    images = r.uniform(-1.0, 1.0, (n_images, m, m, 4))
    index = np.arange(n_samples) % n_images
    thetas = r.uniform(0.05, 0.95, n_samples)
    smoothers = [SMOOTHER_NAMES[k % 4] for k in range(n_samples)]
    extras = np.array([extra_features(t, s, 1000 * (1 + i), 1) for t, s, i in zip(thetas, smoothers, index)])
    targets = 0.2 + 0.5 * (thetas - 0.5) ** 2 + 0.1 * index / n_images + 0.05 * (np.arange(n_samples) % 4) / 4
    return Batch(images, index, extras, targets)
