"""Online parameter selection and the performance indices used to judge it."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from amgtune.amg.smoothers import SMOOTHER_NAMES
from amgtune.dataset import C_REP, measure_time
from amgtune.pooling import pooled_features
from amgtune.surrogate.net import Batch, SurrogateModel

TUNE_THETAS = np.round(np.linspace(0.0, 1.0, 101), 2)
TRAINED_RANGE = (0.05, 0.95)
# AMG needs a positive threshold; theta* = 0 is solved with the next grid value
MIN_SOLVE_THETA = 0.01


@dataclass
class TuningResult:
    theta: float
    smoother: str
    cost: float
    table: np.ndarray  # (101, 4): rows theta, columns smoother order
    wall_time: float

    @property
    def extrapolated(self) -> bool:
        return not TRAINED_RANGE[0] <= self.theta <= TRAINED_RANGE[1]

    @property
    def solve_theta(self) -> float:
        return max(self.theta, MIN_SOLVE_THETA)

    def table_rows(self):
        for i, th in enumerate(TUNE_THETAS):
            yield float(th), [float(v) for v in self.table[i]]


def default_params(dim: int):
    if dim == 2:
        return 0.25, "sor-jacobi"
    if dim == 3:
        return 0.5, "sor-jacobi"
    raise ValueError(f"no default parameters for dimension {dim}")


def grid_features(n: int, p: int | None = None) -> np.ndarray:
    """Extra features of every grid point, theta-major, matching :func:`extra_features`."""
    n_sm = len(SMOOTHER_NAMES)
    out = np.empty((len(TUNE_THETAS) * n_sm, 3 + n_sm))
    out[:, 0] = np.repeat(TUNE_THETAS, n_sm)
    out[:, 1:1 + n_sm] = np.tile(np.eye(n_sm), (len(TUNE_THETAS), 1))
    out[:, 1 + n_sm] = np.log(float(n))
    out[:, 2 + n_sm] = float(p or 0)
    return out


def tune(A, model: SurrogateModel, p: int | None = None) -> TuningResult:
    """Score every (theta, smoother) pair on the grid and return the cheapest.

    Ties go to the smallest theta, then to the first smoother in the
    enumeration order.
    """
    t0 = time.perf_counter()
    img = pooled_features(A, model.spec.m)
    n = A.shape[0]
    extras = grid_features(n, p)
    batch = Batch(img[None], np.zeros(len(extras), dtype=np.int64), extras)
    table = model.predict(batch).reshape(len(TUNE_THETAS), len(SMOOTHER_NAMES))
    k = int(np.argmin(table))
    i, j = divmod(k, len(SMOOTHER_NAMES))
    return TuningResult(float(TUNE_THETAS[i]), SMOOTHER_NAMES[j], float(table[i, j]), table,
                        time.perf_counter() - t0)


# --------------------------------------------------------------------------
# performance indices
# --------------------------------------------------------------------------

@dataclass
class PerformanceRecord:
    problem_id: str
    n: int
    theta: float
    smoother: str
    tuned_converged: bool
    default_converged: bool
    t_ann: float  # including pooling and inference
    t_ann_solve: float  # solver only
    t0: float
    t_min: float
    t0_by_smoother: list = field(default_factory=list)
    P: float = math.nan
    P_solve: float = math.nan
    P_max: float = math.nan
    P_r: float = math.nan
    P_by_smoother: list = field(default_factory=list)
    extrapolated: bool = False


def gain(t_new: float, t_ref: float) -> float:
    """1 - t_new / t_ref, with a failed reference counting as full gain."""
    if math.isinf(t_ref):
        return 1.0
    if t_ref <= 0.0:
        return math.nan
    return 1.0 - t_new / t_ref


def ratio(P: float, P_max: float) -> float:
    if P_max == 1.0 and P == 1.0:
        return 1.0
    if P_max == 0.0:
        return 1.0 if P == 0.0 else math.nan
    return P / P_max


def fill_indices(rec: PerformanceRecord) -> PerformanceRecord:
    rec.P = gain(rec.t_ann, rec.t0)
    rec.P_solve = gain(rec.t_ann_solve, rec.t0)
    rec.P_max = gain(rec.t_min, rec.t0) if not math.isnan(rec.t_min) else math.nan
    rec.P_r = ratio(rec.P, rec.P_max) if not math.isnan(rec.P_max) else math.nan
    rec.P_by_smoother = [gain(rec.t_ann, t) for t in rec.t0_by_smoother]
    return rec


AGGREGATE_COLUMNS = ("P_B", "P_w", "P_m", "P_M", "P_MAX", "P_r", "P_M2", "P_M3", "P_M4")


def aggregate(records) -> dict:
    """Suite-level indices in percent, in table order."""
    if not records:
        raise ValueError("no performance records to aggregate")
    P = np.array([r.P for r in records], dtype=np.float64)
    t0 = np.array([r.t0 for r in records])
    pmax = np.array([r.P_max for r in records], dtype=np.float64)
    out = {
        "P_B": 100.0 * float(np.mean(P >= 0.0)),
        "P_w": 100.0 * float(np.mean(np.isinf(t0))),
        "P_m": 100.0 * float(np.mean(P)),
        "P_M": 100.0 * float(np.median(P)),
    }
    finite_max = pmax[~np.isnan(pmax)]
    out["P_MAX"] = 100.0 * float(np.median(finite_max)) if finite_max.size else math.nan
    if math.isnan(out["P_MAX"]):
        out["P_r"] = math.nan
    else:
        out["P_r"] = 100.0 * ratio(out["P_M"] / 100.0, out["P_MAX"] / 100.0)
    for i in (2, 3, 4):
        vals = np.array([r.P_by_smoother[i - 1] for r in records if len(r.P_by_smoother) >= i])
        out[f"P_M{i}"] = 100.0 * float(np.median(vals)) if vals.size else math.nan
    return {k: out[k] for k in AGGREGATE_COLUMNS}


def evaluate_problem(problem_id: str, problem, model: SurrogateModel, samples=None, c_rep: float = C_REP,
                     tol: float = 1e-8, maxiter: int = 500, seed: int = 0, strict: bool = True,
                     all_smoothers: bool = True) -> PerformanceRecord:
    """Time the tuned and default solvers on one problem and fill the indices.

    ``samples`` supplies the measured dataset times for ``t_min``; with
    ``strict`` a problem missing from it is an error, otherwise ``t_min``
    and the derived indices are NaN.
    """
    A, f, meta = problem.matrix, problem.rhs, problem.metadata
    dim = int(meta.get("dim", 2))
    p = meta.get("degree")
    own = [s for s in (samples or []) if s.problem_id == problem_id]
    if strict and not own:
        raise KeyError(f"problem {problem_id} is absent from the dataset")
    finite = [s.mean_time for s in own if s.converged and math.isfinite(s.mean_time)]
    t_min = min(finite) if finite else (math.inf if own else math.nan)
    res = tune(A, model, p)
    tm = measure_time(A, f, res.solve_theta, res.smoother, c_rep, tol, maxiter, seed)
    theta0, sm0 = default_params(dim)
    t0_list = []
    for sm in (SMOOTHER_NAMES if all_smoothers else [sm0]):
        if sm == res.smoother and abs(res.solve_theta - theta0) < 1e-12:
            t0_list.append(tm.mean)
        else:
            t0_list.append(measure_time(A, f, theta0, sm, c_rep, tol, maxiter, seed).mean)
    t0 = t0_list[SMOOTHER_NAMES.index(sm0)] if all_smoothers else t0_list[0]
    rec = PerformanceRecord(problem_id, int(A.shape[0]), res.theta, res.smoother, tm.converged,
                            math.isfinite(t0), tm.mean + res.wall_time, tm.mean, t0, t_min,
                            t0_list if all_smoothers else [], extrapolated=res.extrapolated)
    return fill_indices(rec)


def evaluate(problems: dict, model: SurrogateModel, samples=None, progress=None, **kw):
    """Records for every problem (id -> ProblemInstance) and the aggregate row."""
    records = []
    for pid in sorted(problems):
        records.append(evaluate_problem(pid, problems[pid], model, samples, **kw))
        if progress:
            progress(records[-1])
    return records, aggregate(records)


def record_dict(rec: PerformanceRecord) -> dict:
    d = asdict(rec)
    for i, v in enumerate(d.pop("t0_by_smoother")):
        d[f"t0_{i + 1}"] = v
    for i, v in enumerate(d.pop("P_by_smoother")):
        d[f"P_{i + 1}"] = v
    return d
