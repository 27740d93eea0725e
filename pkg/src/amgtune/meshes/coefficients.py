"""Piecewise-constant material coefficients on mesh cells."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PATTERNS = ("checkerboard", "stripes", "quadrant", "inclusion", "random-cellwise")


@dataclass
class CoefficientField:
    """Per-cell values ``10**exponent``; ``nu`` is set for elasticity fields."""

    values: np.ndarray
    pattern: str
    eps: float
    nu: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(self.values > 0):
            raise ValueError("coefficients must be strictly positive")
        if self.nu is not None and not 0.0 < self.nu < 0.5:
            raise ValueError("Poisson ratio must lie in (0, 1/2)")

    def scaled(self, c: float) -> "CoefficientField":
        return CoefficientField(self.values * c, self.pattern, self.eps, self.nu)

    def lame(self):
        """Per-cell Lame parameters (lambda, mu) from Young's modulus and ``nu``."""
        if self.nu is None:
            raise ValueError("not an elasticity field")
        return lame_parameters(self.values, self.nu)


def lame_parameters(E, nu: float):
    E = np.asarray(E, dtype=np.float64)
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    return lam, mu


def gray_mask(centroids: np.ndarray, pattern: str) -> np.ndarray:
    """True on the high-contrast ("gray") region of a two-region pattern."""
    x, y = centroids[:, 0], centroids[:, 1]
    if pattern == "stripes":
        return np.floor(4.0 * x).astype(int) % 2 == 1
    if pattern == "checkerboard":
        return (np.floor(4.0 * x).astype(int) + np.floor(4.0 * y).astype(int)) % 2 == 1
    if pattern == "quadrant":
        return (x > 0.5) & (y > 0.5)
    if pattern == "inclusion":
        r2 = ((centroids - 0.5) ** 2).sum(axis=1)
        return r2 < 0.25 ** 2
    raise ValueError(f"unknown two-region pattern '{pattern}'")


def make_coefficients(mesh, pattern: str, eps: float | None = None, eps_max: float | None = None,
                      seed: int = 0, nu: float | None = None) -> CoefficientField:
    """Build a field of ``10**e`` values.

    Two-region patterns use 1 on the background and ``10**eps`` on the
    gray region.  ``random-cellwise`` draws one exponent per cell from
    ``U[0, eps_max]``.
    """
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern '{pattern}'; expected one of {PATTERNS}")
    n = mesh.n_cells
    if pattern == "random-cellwise":
        if eps_max is None:
            raise ValueError("random-cellwise needs eps_max")
        if eps_max < 0:
            raise ValueError("eps_max must be non-negative")
        expo = np.random.default_rng(seed).uniform(0.0, eps_max, size=n)
        return CoefficientField(10.0 ** expo, pattern, float(eps_max), nu)
    if eps is None:
        raise ValueError(f"pattern '{pattern}' needs eps")
    gray = gray_mask(mesh.centroids, pattern)
    vals = np.where(gray, 10.0 ** float(eps), 1.0)
    return CoefficientField(vals, pattern, float(eps), nu)
