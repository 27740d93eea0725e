"""V-cycle, stationary AMG iteration and AMG-preconditioned CG."""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from amgtune.amg.hierarchy import AmgHierarchy, amg_setup
from amgtune.amg.smoothers import SmootherKind, relax
from amgtune.sparse import canonical

DEFAULT_PCG_MAXITER = 500
DEFAULT_AMG_MAXITER = 200


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residuals: list
    rho: float
    wall_time: float
    setup_time: float = 0.0
    params: dict = field(default_factory=dict)
    reason: str = ""

    def to_record(self) -> str:
        """One JSON line with fixed key names."""
        d = asdict(self)
        d["rho"] = _finite_or_str(self.rho)
        d["residuals"] = [_finite_or_str(r) for r in self.residuals]
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_record(cls, line: str) -> "SolveReport":
        d = json.loads(line)
        d["rho"] = float(d["rho"])
        d["residuals"] = [float(r) for r in d["residuals"]]
        return cls(**d)


def _finite_or_str(x):
    x = float(x)
    return x if math.isfinite(x) else str(x)


def convergence_factor(report_or_residuals) -> float:
    """Geometric-mean residual reduction per iteration."""
    res = report_or_residuals.residuals if isinstance(report_or_residuals, SolveReport) else list(report_or_residuals)
    n_it = len(res) - 1
    if n_it < 1:
        raise ValueError("need at least one iteration")
    if res[0] == 0.0:
        return 0.0
    return float((res[-1] / res[0]) ** (1.0 / n_it))


def _vcycle(h: AmgHierarchy, k: int, u, f, kind, nu1, nu2, symmetric):
    levels = h.levels
    if k == len(levels) - 1:
        return h.coarse_solver.solve(f)
    lvl = levels[k]
    relax(lvl.smoother, kind, u, f, nu1, backward=False)
    r = f - lvl.A @ u
    rc = lvl.R @ r
    ec = _vcycle(h, k + 1, np.zeros_like(rc), rc, kind, nu1, nu2, symmetric)
    u += lvl.P @ ec
    relax(lvl.smoother, kind, u, f, nu2, backward=symmetric and kind.is_sor)
    return u


def vcycle(h: AmgHierarchy, u, f, smoother="sor-jacobi", nu1: int = 1, nu2: int = 1,
           symmetric: bool = False) -> np.ndarray:
    """One V(nu1, nu2) cycle from initial guess ``u``; returns a new vector.

    With ``symmetric`` the SOR-type post-smoother sweeps backward, making
    the cycle a symmetric operator usable as a CG preconditioner.
    """
    kind = SmootherKind.parse(smoother)
    f = np.asarray(f, dtype=np.float64)
    u = np.array(u, dtype=np.float64, copy=True)
    n = h.levels[0].n
    if u.shape != (n,) or f.shape != (n,):
        raise ValueError("vector sizes do not match the finest level")
    return _vcycle(h, 0, u, f, kind, nu1, nu2, symmetric)


def _params(h, kind, nu1, nu2, tol, maxiter, method):
    return {
        "theta": h.theta,
        "smoother": kind.label,
        "nu1": nu1,
        "nu2": nu2,
        "tol": tol,
        "max_iterations": maxiter,
        "method": method,
        "levels": h.n_levels,
        "operator_complexity": h.operator_complexity(),
    }


def amg_solve(A, f, theta: float = 0.25, smoother="sor-jacobi", nu1: int = 1, nu2: int = 1,
              tol: float = 1e-8, maxiter: int = DEFAULT_AMG_MAXITER, seed: int = 0, u0=None,
              hierarchy: AmgHierarchy | None = None):
    """Stationary V-cycle iteration until ||f - A u|| / ||f|| < tol.

    Non-convergence is reported, not raised.
    """
    kind = SmootherKind.parse(smoother)
    A = canonical(A)
    f = np.asarray(f, dtype=np.float64)
    h = hierarchy if hierarchy is not None else amg_setup(A, theta=theta, seed=seed)
    t0 = time.perf_counter()
    u = np.zeros_like(f) if u0 is None else np.array(u0, dtype=np.float64, copy=True)
    fnorm = float(np.linalg.norm(f))
    scale = fnorm if fnorm > 0.0 else 1.0
    res = [float(np.linalg.norm(f - A @ u))]
    converged = res[0] / scale < tol
    it = 0
    while not converged and it < maxiter:
        u = vcycle(h, u, f, kind, nu1, nu2)
        it += 1
        res.append(float(np.linalg.norm(f - A @ u)))
        if not math.isfinite(res[-1]):
            break
        converged = res[-1] / scale < tol
    wall = time.perf_counter() - t0
    rho = convergence_factor(res) if it >= 1 else 0.0
    report = SolveReport(bool(converged), it, res, rho, wall, h.setup_time,
                         _params(h, kind, nu1, nu2, tol, maxiter, "amg"))
    return u, report


def pcg_solve(A, f, hierarchy: AmgHierarchy, smoother="sor-jacobi", tol: float = 1e-8,
              maxiter: int = DEFAULT_PCG_MAXITER, u0=None):
    """CG preconditioned by one symmetric V(1,1) cycle with zero initial guess.

    Stops when ||f - A u||_2 / ||r0||_2 < tol.  Breakdown (p^T A p <= 0 or
    r^T z <= 0) and non-finite values end the iteration unconverged.
    """
    kind = SmootherKind.parse(smoother)
    A = canonical(A)
    f = np.asarray(f, dtype=np.float64)
    t0 = time.perf_counter()
    u = np.zeros_like(f) if u0 is None else np.array(u0, dtype=np.float64, copy=True)
    r = f - A @ u
    r0 = float(np.linalg.norm(r))
    res = [r0]
    converged = r0 == 0.0
    reason = "zero initial residual" if converged else ""
    it = 0
    if not converged and maxiter > 0:
        z = vcycle(hierarchy, np.zeros_like(r), r, kind, 1, 1, symmetric=True)
        p = z.copy()
        rz = float(r @ z)
        while it < maxiter:
            if not (rz > 0.0) or not math.isfinite(rz):
                reason = "indefinite preconditioner"
                break
            Ap = A @ p
            pAp = float(p @ Ap)
            if not (pAp > 0.0) or not math.isfinite(pAp):
                reason = "indefinite operator"
                break
            alpha = rz / pAp
            u += alpha * p
            r -= alpha * Ap
            it += 1
            true_res = float(np.linalg.norm(f - A @ u))
            res.append(true_res)
            if not math.isfinite(true_res):
                reason = "non-finite residual"
                break
            if true_res / r0 < tol:
                converged = True
                break
            z = vcycle(hierarchy, np.zeros_like(r), r, kind, 1, 1, symmetric=True)
            rz_new = float(r @ z)
            p = z + (rz_new / rz) * p
            rz = rz_new
        else:
            reason = "maximum iterations reached"
    elif not converged:
        reason = "maximum iterations reached"
    wall = time.perf_counter() - t0
    rho = convergence_factor(res) if it >= 1 else 0.0
    report = SolveReport(bool(converged), it, res, rho, wall, hierarchy.setup_time,
                         _params(hierarchy, kind, 1, 1, tol, maxiter, "pcg"), reason)
    return u, report


def solve(A, f, theta: float = 0.25, smoother="sor-jacobi", tol: float = 1e-8,
          maxiter: int = DEFAULT_PCG_MAXITER, seed: int = 0, hierarchy: AmgHierarchy | None = None):
    """Setup plus AMG-PCG; ``report.wall_time`` covers both phases."""
    t0 = time.perf_counter()
    h = hierarchy if hierarchy is not None else amg_setup(A, theta=theta, seed=seed)
    u, report = pcg_solve(A, f, h, smoother=smoother, tol=tol, maxiter=maxiter)
    report.wall_time = time.perf_counter() - t0
    if hierarchy is not None:
        report.wall_time += h.setup_time
    return u, report


_WARM = False


def warmup() -> None:
    """Load the compiled kernels once so the first timed solve is not penalized."""
    global _WARM
    if _WARM:
        return
    from scipy import sparse

    n = 64
    A = sparse.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")
    f = np.ones(n)
    h = amg_setup(A, theta=0.25)
    for kind in SmootherKind:
        pcg_solve(A, f, h, kind, maxiter=5)
    _WARM = True
