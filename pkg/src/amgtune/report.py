"""CSV reports, the aligned summary table and figures."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from amgtune.tuner import AGGREGATE_COLUMNS, PerformanceRecord, aggregate, record_dict

RECORD_COLUMNS = ("problem_id", "n", "theta", "smoother", "extrapolated", "tuned_converged", "default_converged",
                  "t_ann", "t_ann_solve", "t0", "t_min", "P", "P_solve", "P_max", "P_r",
                  "t0_1", "t0_2", "t0_3", "t0_4", "P_1", "P_2", "P_3", "P_4")


def _num(v) -> str:
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return "" if v is None else str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def percent(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.1f}"


def summary_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + "_summary" + (p.suffix or ".csv"))


def report(records, path, label: str = "suite") -> str:
    """Write the per-problem CSV and the aggregate CSV; returns the text table.

    The aggregate file sits next to ``path`` with a ``_summary`` suffix.
    """
    records = [r for r in records if isinstance(r, PerformanceRecord)]
    if not records:
        raise ValueError("no performance records to report")
    agg = aggregate(records)
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_COLUMNS)
        for r in records:
            d = record_dict(r)
            w.writerow([_num(d.get(c)) for c in RECORD_COLUMNS])
    write_summary_csv({label: agg}, summary_path(path))
    return format_summary({label: agg})


def write_summary_csv(rows: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("case",) + AGGREGATE_COLUMNS)
        for label, agg in rows.items():
            w.writerow([label] + [percent(agg[c]) for c in AGGREGATE_COLUMNS])


def read_records(path) -> list:
    """Inverse of the per-problem CSV written by :func:`report`."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            def f(k):
                return float(row[k]) if row.get(k) not in (None, "") else math.nan

            def b(k):
                return row[k] == "True"

            t0s = [f(f"t0_{i}") for i in range(1, 5) if row.get(f"t0_{i}")]
            ps = [f(f"P_{i}") for i in range(1, 5) if row.get(f"P_{i}")]
            out.append(PerformanceRecord(row["problem_id"], int(row["n"]), f("theta"), row["smoother"],
                                         b("tuned_converged"), b("default_converged"), f("t_ann"),
                                         f("t_ann_solve"), f("t0"), f("t_min"), t0s, f("P"), f("P_solve"),
                                         f("P_max"), f("P_r"), ps, b("extrapolated")))
    return out


def format_summary(rows: dict) -> str:
    """Aligned text table, one row per case, percentages to one decimal."""
    header = ("case",) + AGGREGATE_COLUMNS
    body = [[label] + [percent(agg[c]) for c in AGGREGATE_COLUMNS] for label, agg in rows.items()]
    widths = [max(len(str(x)) for x in col) for col in zip(header, *body)]
    lines = ["  ".join(str(x).ljust(w) if i == 0 else str(x).rjust(w) for i, (x, w) in enumerate(zip(r, widths)))
             for r in [list(header)] + body]
    return "\n".join(lines)


# --------------------------------------------------------------------------
# figures
# --------------------------------------------------------------------------

def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_gains(records, path) -> None:
    """Histogram of P and P_MAX (left) and t_ANN, t_MIN against t0 (right)."""
    plt = _pyplot()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    P = np.array([r.P for r in records])
    Pm = np.array([r.P_max for r in records])
    fin = np.isfinite(P)
    bins = np.linspace(min(-0.5, np.nanmin(P[fin]) if fin.any() else 0.0), 1.0, 21)
    ax1.hist(np.clip(P[fin], bins[0], 1.0), bins=bins, alpha=0.6, label="P")
    if np.isfinite(Pm).any():
        ax1.hist(np.clip(Pm[np.isfinite(Pm)], bins[0], 1.0), bins=bins, alpha=0.6, label="P_MAX")
    ax1.set_xlabel("gain")
    ax1.set_ylabel("problems")
    ax1.legend()
    t0 = np.array([r.t0 for r in records])
    ok = np.isfinite(t0)
    if ok.any():
        ta = np.array([r.t_ann for r in records])
        tm = np.array([r.t_min for r in records])
        ax2.loglog(t0[ok], ta[ok], "o", label="t_ANN")
        if np.isfinite(tm[ok]).any():
            ax2.loglog(t0[ok], tm[ok], "x", label="t_MIN")
        lo, hi = t0[ok].min(), t0[ok].max()
        ax2.loglog([lo, hi], [lo, hi], "k--", lw=0.8, label="t0")
        ax2.legend()
    ax2.set_xlabel("t0 [s]")
    ax2.set_ylabel("time [s]")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_smoother_gains(records, path) -> None:
    """Histograms of the gains against the default threshold with each smoother."""
    plt = _pyplot()
    fig, axes = plt.subplots(1, 4, figsize=(14, 3.5), sharey=True)
    for i, ax in enumerate(axes):
        vals = np.array([r.P_by_smoother[i] for r in records if len(r.P_by_smoother) > i])
        vals = vals[np.isfinite(vals)]
        if vals.size:
            ax.hist(np.clip(vals, -1.0, 1.0), bins=np.linspace(-1.0, 1.0, 21))
        ax.set_title(f"smoother {i + 1}")
        ax.set_xlabel("gain")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_rho_vs_time(samples, path) -> float:
    """Scatter of convergence factor against time; returns the Pearson correlation."""
    plt = _pyplot()
    pts = np.array([(s.rho, s.mean_time) for s in samples if s.converged and math.isfinite(s.mean_time)])
    fig, ax = plt.subplots(figsize=(5, 4))
    r = math.nan
    if len(pts) >= 2:
        ax.plot(pts[:, 0], pts[:, 1], ".", ms=3)
        r = pearson(pts[:, 0], pts[:, 1])
        ax.set_title(f"Pearson r = {r:.3f}")
    ax.set_xlabel("convergence factor")
    ax.set_ylabel("time [s]")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return r


def plot_cost_curves(samples, problem_id: str, path, model=None, A=None) -> None:
    """Measured cost against theta for one problem, optionally with predictions."""
    plt = _pyplot()
    from amgtune.amg.smoothers import SMOOTHER_NAMES

    fig, ax = plt.subplots(figsize=(6, 4))
    own = [s for s in samples if s.problem_id == problem_id]
    for k, sm in enumerate(SMOOTHER_NAMES):
        pts = sorted((s.theta, s.cost if s.cost is not None else s.mean_time) for s in own if s.smoother == sm)
        if pts:
            x, y = zip(*pts)
            ax.plot(x, y, "o-", ms=3, color=f"C{k}", label=sm)
    if model is not None and A is not None:
        from amgtune.tuner import TUNE_THETAS, tune

        res = tune(A, model, own[0].p if own else None)
        for k in range(len(SMOOTHER_NAMES)):
            ax.plot(TUNE_THETAS, res.table[:, k], "--", color=f"C{k}")
        ax.plot([res.theta], [res.cost], "k*", ms=12, label="tuned")
    ax.set_xlabel("theta")
    ax.set_ylabel("cost")
    ax.set_title(problem_id)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_history(history, path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    ep = [h["epoch"] for h in history]
    ax.semilogy(ep, [h["train_mse"] for h in history], label="train")
    val = [h["val_mse"] for h in history]
    if not all(math.isnan(v) for v in val):
        ax.semilogy(ep, val, label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("MSE")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 2 or np.std(x) == 0 or np.std(y) == 0:
        return math.nan
    return float(np.corrcoef(x, y)[0, 1])
