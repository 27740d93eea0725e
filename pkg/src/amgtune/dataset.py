"""Training-data generation: parameter sweeps, timing, smoothing, normalisation, splits.

Problems live in a directory as ``<id>.mtx`` (matrix), ``<id>.rhs.mtx``
(right-hand side) and ``<id>.json`` (metadata).  Samples are stored one
JSON object per line.
"""
from __future__ import annotations

import json
import math
import os
import time
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from amgtune.amg import SMOOTHER_NAMES, amg_setup, pcg_solve, warmup
from amgtune.sparse import read_matrix_market, read_vector, write_matrix_market, write_vector

C_REP = 2.0
MIN_REPS, MAX_REPS = 2, 100
SAVGOL_WINDOW, SAVGOL_DEGREE = 21, 7
SMOOTHING_THRESHOLD = 0.2
METRICS = ("rho", "time")
SPLITS = ("train", "val", "test")


# --------------------------------------------------------------------------
# records
# --------------------------------------------------------------------------

def _enc(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _dec_float(x):
    return float(x) if x is not None else None


@dataclass
class CostSample:
    problem_id: str
    n: int
    nnz: int
    dim: int
    p: int
    theta: float
    smoother: str
    converged: bool
    n_it: int
    rho: float
    times: list
    mean_time: float
    smoothed_time: float | None = None
    cost: float | None = None
    split: str | None = None

    def to_json(self) -> str:
        d = asdict(self)
        d = {k: ([_enc(float(t)) for t in v] if k == "times" else _enc(v)) for k, v in d.items()}
        return json.dumps(d, sort_keys=False)

    @classmethod
    def from_json(cls, line: str) -> "CostSample":
        d = json.loads(line)
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown sample fields: {sorted(unknown)}")
        d["times"] = [float(t) for t in d["times"]]
        for k in ("rho", "mean_time", "theta"):
            d[k] = float(d[k])
        for k in ("smoothed_time", "cost"):
            d[k] = _dec_float(d.get(k))
        return cls(**d)

    @property
    def key(self):
        return (self.problem_id, round(self.theta, 10), self.smoother)


def write_samples(samples, path, append: bool = False) -> None:
    mode = "a" if append else "w"
    with open(path, mode) as fh:
        for s in samples:
            fh.write(s.to_json() + "\n")


def read_samples(path) -> list:
    out = []
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(CostSample.from_json(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{ln}: bad sample record ({exc})") from exc
    return out


# --------------------------------------------------------------------------
# problem store
# --------------------------------------------------------------------------

def save_problem(problem, directory, problem_id: str) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_matrix_market(problem.matrix, d / f"{problem_id}.mtx", symmetric=True)
    write_vector(problem.rhs, d / f"{problem_id}.rhs.mtx")
    meta = dict(problem.metadata)
    meta["id"] = problem_id
    tmp = d / f"{problem_id}.json.tmp"
    tmp.write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    os.replace(tmp, d / f"{problem_id}.json")


def list_problems(directory) -> list:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"problem directory '{directory}' does not exist")
    return sorted(p.name[:-5] for p in d.glob("*.json"))


def load_problem(directory, problem_id: str):
    from amgtune.meshes.problems import ProblemInstance

    d = Path(directory)
    A = read_matrix_market(d / f"{problem_id}.mtx")
    f = read_vector(d / f"{problem_id}.rhs.mtx")
    meta = json.loads((d / f"{problem_id}.json").read_text())
    return ProblemInstance(A, f, meta)


# --------------------------------------------------------------------------
# sweep planning and timing
# --------------------------------------------------------------------------

@dataclass
class SweepPlan:
    thetas: list
    smoothers: list = field(default_factory=lambda: list(SMOOTHER_NAMES))
    metric: str = "rho"
    c_rep: float = C_REP

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if any(not 0.0 < t <= 1.0 for t in self.thetas):
            raise ValueError("theta values must lie in (0, 1]")


def plan_theta_grid(n: int, seed: int = 0) -> list:
    """Strength thresholds to sample for a system of size ``n``."""
    if n < 1:
        raise ValueError("n must be positive")
    if n < 20_000:
        grid = 0.05 + 0.025 * np.arange(37)
    elif n <= 100_000:
        grid = 0.05 + 0.05 * np.arange(19)
    else:
        grid = np.sort(np.random.default_rng([int(seed), int(n)]).uniform(0.05, 0.95, size=10))
    return [round(float(t), 10) for t in grid]


def repetitions(mean_first_two: float, c_rep: float = C_REP) -> int:
    """Number of timed runs, inversely proportional to the first two runs' mean."""
    if not mean_first_two > 0.0:
        return MAX_REPS
    return int(min(MAX_REPS, max(MIN_REPS, round(c_rep / mean_first_two))))


@dataclass
class Timing:
    times: list
    mean: float
    converged: bool
    iterations: int
    rho: float


def timed_solve(A, f, theta, smoother, tol=1e-8, maxiter=500, seed=0):
    """One setup + PCG run; returns (elapsed seconds, report)."""
    t0 = time.perf_counter()
    h = amg_setup(A, theta=theta, seed=seed)
    _, rep = pcg_solve(A, f, h, smoother=smoother, tol=tol, maxiter=maxiter)
    return time.perf_counter() - t0, rep


def measure_time(A, f, theta, smoother, c_rep: float = C_REP, tol: float = 1e-8, maxiter: int = 500,
                 seed: int = 0, runner=None) -> Timing:
    """Repeat the full solve and average.

    ``runner`` (for testing) replaces :func:`timed_solve` and must return
    ``(elapsed, report)``.  A run that does not converge is not repeated and
    yields an infinite time.
    """
    if runner is None:
        warmup()
    run = runner or (lambda: timed_solve(A, f, theta, smoother, tol, maxiter, seed))
    t, rep = run()
    if not rep.converged:
        return Timing([math.inf], math.inf, False, rep.iterations, rep.rho)
    times = [t]
    t, rep = run()
    times.append(t)
    r = repetitions(0.5 * (times[0] + times[1]), c_rep)
    for _ in range(r - 2):
        t, rep = run()
        times.append(t)
    return Timing(times, float(np.mean(times)), True, rep.iterations, rep.rho)


# --------------------------------------------------------------------------
# smoothing
# --------------------------------------------------------------------------

def _check_uniform(x: np.ndarray) -> None:
    if x.size < 2:
        return
    d = np.diff(x)
    if np.any(d <= 0) or not np.allclose(d, d[0], rtol=1e-6, atol=1e-12):
        raise ValueError("smoothing needs a strictly increasing uniform grid")


def savgol_smooth(thetas, values, window: int = SAVGOL_WINDOW, degree: int = SAVGOL_DEGREE,
                  threshold: float = SMOOTHING_THRESHOLD, return_info: bool = False):
    """Local least-squares polynomial smoothing of a cost curve over theta.

    Near the ends the window shrinks symmetrically.  Infinite values are
    left out of every fit and kept as infinite.  The raw series is returned
    when the series is shorter than ``window``, when any smoothed value is
    not positive, or when the smoothed minimum moves more than
    ``threshold`` (relative) away from the raw minimum.
    """
    x = np.asarray(thetas, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("thetas and values differ in length")
    _check_uniform(x)
    L = y.size
    info = "smoothed"
    if L < window:
        out, info = y.copy(), "skipped"
    else:
        out = y.copy()
        half = window // 2
        step = x[1] - x[0]
        finite = np.isfinite(y)
        for i in range(L):
            if not finite[i]:
                continue
            k = min(half, i, L - 1 - i)
            sl = slice(i - k, i + k + 1)
            xs = (x[sl] - x[i]) / step
            ok = finite[sl]
            deg = min(degree, int(ok.sum()) - 1)
            if deg < 1:
                continue
            coef = np.polynomial.polynomial.polyfit(xs[ok], y[sl][ok], deg)
            out[i] = coef[0]
        fin = np.isfinite(out)
        if fin.any():
            raw_min = y[fin].min()
            sm_min = out[fin].min()
            if np.any(out[fin] <= 0.0) or abs(sm_min - raw_min) > threshold * abs(raw_min):
                out, info = y.copy(), "fallback"
    return (out, info) if return_info else out


# --------------------------------------------------------------------------
# normalisation and splitting
# --------------------------------------------------------------------------

def _by_problem(samples):
    groups = {}
    for s in samples:
        groups.setdefault(s.problem_id, []).append(s)
    return groups


def smooth_samples(samples, window=SAVGOL_WINDOW, degree=SAVGOL_DEGREE, threshold=SMOOTHING_THRESHOLD):
    """Fill ``smoothed_time`` per (problem, smoother) curve."""
    out = []
    for pid, group in _by_problem(samples).items():
        by_sm = {}
        for s in group:
            by_sm.setdefault(s.smoother, []).append(s)
        for sm, curve in by_sm.items():
            curve = sorted(curve, key=lambda s: s.theta)
            th = [s.theta for s in curve]
            vals = [s.mean_time for s in curve]
            try:
                smoothed = savgol_smooth(th, vals, window, degree, threshold)
            except ValueError:
                smoothed = np.asarray(vals, dtype=np.float64)
            for s, v in zip(curve, smoothed):
                out.append(_replace(s, smoothed_time=float(v)))
    return _ordered(out)


def _replace(s, **kw):
    d = asdict(s)
    d.update(kw)
    return CostSample(**d)


def _ordered(samples):
    return sorted(samples, key=lambda s: (s.problem_id, SMOOTHER_NAMES.index(s.smoother) if s.smoother in SMOOTHER_NAMES else 99, s.theta))


def normalize_costs(samples, metric: str = "time") -> list:
    """Fill ``cost`` in [0, 1]; problems where nothing converged are dropped."""
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    out = []
    for pid, group in _by_problem(samples).items():
        if not any(s.converged for s in group):
            warnings.warn(f"problem {pid}: no configuration converged; dropped", RuntimeWarning, stacklevel=2)
            continue
        if metric == "rho":
            for s in group:
                c = min(max(s.rho, 0.0), 1.0) if s.converged and math.isfinite(s.rho) else 1.0
                out.append(_replace(s, cost=float(c)))
            continue
        t = np.array([s.smoothed_time if s.smoothed_time is not None else s.mean_time for s in group])
        fin = np.isfinite(t)
        if not fin.any():
            warnings.warn(f"problem {pid}: no finite times; dropped", RuntimeWarning, stacklevel=2)
            continue
        lo, hi = t[fin].min(), t[fin].max()
        for s, v in zip(group, t):
            if not math.isfinite(v) or not s.converged:
                c = 1.0
            elif hi > lo:
                c = (v - lo) / (hi - lo)
            else:
                c = 0.0
            out.append(_replace(s, cost=float(c)))
    return out


def split_problem_ids(problem_ids, seed: int = 0) -> dict:
    ids = sorted(set(problem_ids))
    if len(ids) < 5:
        raise ValueError("need at least 5 problems to split")
    perm = np.random.default_rng(seed).permutation(len(ids))
    n_train = int(round(0.6 * len(ids)))
    n_val = int(round(0.2 * len(ids)))
    tags = {}
    for rank, j in enumerate(perm):
        tags[ids[j]] = "train" if rank < n_train else ("val" if rank < n_train + n_val else "test")
    return tags


def split_dataset(samples, seed: int = 0) -> list:
    """Tag every sample with its problem's split (60/20/20 by problem count)."""
    tags = split_problem_ids([s.problem_id for s in samples], seed)
    return [_replace(s, split=tags[s.problem_id]) for s in samples]


# --------------------------------------------------------------------------
# sweeping
# --------------------------------------------------------------------------

def sweep_problem(problem_id: str, problem, plan: SweepPlan, done=frozenset(), tol: float = 1e-8,
                  maxiter: int = 500, seed: int = 0):
    """Yield one sample per (theta, smoother) not already in ``done``.

    With the ``rho`` metric one hierarchy per theta serves all smoothers
    and the recorded time is a single setup + solve.
    """
    warmup()
    A, f, meta = problem.matrix, problem.rhs, problem.metadata
    base = dict(problem_id=problem_id, n=int(A.shape[0]), nnz=int(A.nnz), dim=int(meta.get("dim", 2)),
                p=int(meta.get("degree", 1) or 0))
    for theta in plan.thetas:
        todo = [sm for sm in plan.smoothers if (problem_id, round(theta, 10), sm) not in done]
        if not todo:
            continue
        if plan.metric == "rho":
            h = amg_setup(A, theta=theta, seed=seed)
            for sm in todo:
                _, rep = pcg_solve(A, f, h, smoother=sm, tol=tol, maxiter=maxiter)
                t = h.setup_time + rep.wall_time if rep.converged else math.inf
                yield CostSample(theta=float(theta), smoother=sm, converged=rep.converged, n_it=rep.iterations,
                                 rho=float(rep.rho), times=[t], mean_time=t, **base)
        else:
            for sm in todo:
                tm = measure_time(A, f, theta, sm, plan.c_rep, tol, maxiter, seed)
                yield CostSample(theta=float(theta), smoother=sm, converged=tm.converged, n_it=tm.iterations,
                                 rho=float(tm.rho), times=tm.times, mean_time=tm.mean, **base)


def sweep_directory(problem_dir, out_path, metric: str = "rho", c_rep: float = C_REP, tol: float = 1e-8,
                    maxiter: int = 500, seed: int = 0, problem_ids=None, progress=None, thetas=None) -> int:
    """Sweep every stored problem, appending to ``out_path``; resumes from existing records.

    ``thetas`` overrides the size-dependent grid of :func:`plan_theta_grid`.
    """
    done = set()
    if os.path.exists(out_path):
        done = {s.key for s in read_samples(out_path)}
    ids = problem_ids if problem_ids is not None else list_problems(problem_dir)
    written = 0
    for pid in ids:
        prob = load_problem(problem_dir, pid)
        grid = list(thetas) if thetas is not None else plan_theta_grid(prob.n, seed)
        plan = SweepPlan(grid, metric=metric, c_rep=c_rep)
        with open(out_path, "a") as fh:
            for s in sweep_problem(pid, prob, plan, done, tol, maxiter, seed):
                fh.write(s.to_json() + "\n")
                fh.flush()
                written += 1
        if progress:
            progress(pid)
    return written


def canonical_samples(samples) -> list:
    """Sorted copy with one record per (problem, theta, smoother)."""
    seen = {}
    for s in samples:
        seen.setdefault(s.key, s)
    return _ordered(seen.values())


def prepare_dataset(samples, metric: str, seed: int = 0) -> list:
    """Smoothing (time metric), normalisation and problem-level split."""
    samples = canonical_samples(samples)
    if metric == "time":
        samples = smooth_samples(samples)
    else:
        samples = [_replace(s, smoothed_time=s.mean_time) for s in samples]
    samples = normalize_costs(samples, metric)
    return _ordered(split_dataset(samples, seed))
