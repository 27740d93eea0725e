import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amgtune.amg import SolveReport
from amgtune.dataset import (CostSample, SweepPlan, canonical_samples, list_problems, load_problem, measure_time,
                             normalize_costs, plan_theta_grid, prepare_dataset, read_samples, repetitions,
                             savgol_smooth, save_problem, split_dataset, split_problem_ids, sweep_directory,
                             sweep_problem, write_samples)
from amgtune.meshes.problems import build_problem


def sample(pid="a", theta=0.25, smoother="sor-jacobi", t=1.0, converged=True, rho=0.1):
    return CostSample(pid, 10, 30, 2, 1, theta, smoother, converged, 5, rho, [t], t)


# --------------------------------------------------------------------------
# theta grid and repetitions
# --------------------------------------------------------------------------

def test_theta_grid_sizes():
    g = plan_theta_grid(10_000)
    assert len(g) == 37 and g[:2] == [0.05, 0.075] and g[-1] == 0.95
    assert len(plan_theta_grid(50_000)) == 19
    big = plan_theta_grid(500_000, seed=3)
    assert len(big) == 10 and all(0.05 <= t <= 0.95 for t in big)
    assert big == plan_theta_grid(500_000, seed=3)
    with pytest.raises(ValueError):
        plan_theta_grid(0)


def test_repetitions_clamp():
    assert repetitions(1.0) == 2
    assert repetitions(0.01) == 100
    assert repetitions(0.1) == 20
    assert repetitions(0.0) == 100


class FakeRunner:
    def __init__(self, elapsed, converged=True):
        self.elapsed, self.converged, self.calls = elapsed, converged, 0

    def __call__(self):
        self.calls += 1
        return self.elapsed, SolveReport(self.converged, 3, [1.0, 0.1, 0.01, 0.001], 0.1, self.elapsed)


def test_measure_time_repetition_counts():
    slow = FakeRunner(1.0)
    tm = measure_time(None, None, 0.25, "sor-jacobi", runner=slow)
    assert slow.calls == 2 and tm.mean == 1.0 and tm.converged
    fast = FakeRunner(0.01)
    tm = measure_time(None, None, 0.25, "sor-jacobi", runner=fast)
    assert fast.calls == 100 and len(tm.times) == 100


def test_measure_time_failure_single_run():
    bad = FakeRunner(0.5, converged=False)
    tm = measure_time(None, None, 0.25, "sor-jacobi", runner=bad)
    assert bad.calls == 1 and tm.mean == math.inf and not tm.converged


def test_sweep_plan_validation():
    with pytest.raises(ValueError):
        SweepPlan([0.5], metric="flops")
    with pytest.raises(ValueError):
        SweepPlan([0.0])


# --------------------------------------------------------------------------
# smoothing
# --------------------------------------------------------------------------

GRID = 0.05 + 0.025 * np.arange(37)


def test_savgol_constant_unchanged():
    y = np.full(37, 2.5)
    assert np.allclose(savgol_smooth(GRID, y), y, rtol=1e-12)


def test_savgol_reproduces_degree_seven():
    coef = np.array([3.0, 1.0, -2.0, 0.5, 0.3, -0.1, 0.05, 0.02])
    y = np.polynomial.polynomial.polyval((GRID - 0.5) * 4, coef) + 10.0
    out, info = savgol_smooth(GRID, y, return_info=True)
    assert info == "smoothed"
    assert np.max(np.abs(out[10:-10] - y[10:-10])) < 1e-8


def test_savgol_keeps_infinite_entries():
    y = 1.0 + (GRID - 0.5) ** 2
    y[5] = math.inf
    out = savgol_smooth(GRID, y)
    assert out[5] == math.inf and np.all(np.isfinite(np.delete(out, 5)))


def test_savgol_short_series_skipped():
    x = np.linspace(0.05, 0.95, 10)
    y = np.random.default_rng(0).uniform(1, 2, 10)
    out, info = savgol_smooth(x, y, return_info=True)
    assert info == "skipped" and np.array_equal(out, y)


def test_savgol_non_uniform_grid():
    with pytest.raises(ValueError):
        savgol_smooth([0.1, 0.2, 0.4], [1.0, 1.0, 1.0])


def test_savgol_falls_back_when_minimum_moves():
    y = np.ones(37)
    y[18] = 0.01  # a sharp minimum the fit cannot follow
    out, info = savgol_smooth(GRID, y, return_info=True)
    assert info == "fallback" and np.array_equal(out, y)


def test_savgol_noise_reduced():
    r = np.random.default_rng(1)
    clean = 1.0 + (GRID - 0.4) ** 2
    noisy = clean + r.normal(0, 0.01, GRID.size)
    out = savgol_smooth(GRID, noisy)
    assert np.linalg.norm(out - clean) < np.linalg.norm(noisy - clean)


# --------------------------------------------------------------------------
# normalisation and splitting
# --------------------------------------------------------------------------

def test_normalize_time_min_max():
    out = normalize_costs([sample(theta=0.1, t=1.0), sample(theta=0.2, t=2.0), sample(theta=0.3, t=3.0)], "time")
    assert [s.cost for s in out] == [0.0, 0.5, 1.0]


def test_normalize_equal_times():
    out = normalize_costs([sample(theta=0.1, t=2.0), sample(theta=0.2, t=2.0)], "time")
    assert [s.cost for s in out] == [0.0, 0.0]


def test_normalize_failure_is_one():
    out = normalize_costs([sample(theta=0.1, t=0.5), sample(theta=0.2, t=math.inf, converged=False)], "time")
    assert [s.cost for s in out] == [0.0, 1.0]


def test_normalize_rho():
    out = normalize_costs([sample(theta=0.1, rho=0.3), sample(theta=0.2, rho=1.7),
                           sample(theta=0.3, rho=0.2, converged=False)], "rho")
    assert [s.cost for s in out] == [0.3, 1.0, 1.0]


def test_normalize_drops_hopeless_problem():
    with pytest.warns(RuntimeWarning):
        out = normalize_costs([sample("x", converged=False, t=math.inf), sample("y")], "time")
    assert [s.problem_id for s in out] == ["y"]


def test_split_ten_problems():
    tags = split_problem_ids([f"p{k}" for k in range(10)], seed=2)
    counts = {t: list(tags.values()).count(t) for t in ("train", "val", "test")}
    assert counts == {"train": 6, "val": 2, "test": 2}
    assert tags == split_problem_ids([f"p{k}" for k in range(10)], seed=2)


def test_split_needs_five():
    with pytest.raises(ValueError):
        split_problem_ids(["a", "b", "c", "d"])


@settings(max_examples=25, deadline=None)
@given(st.integers(5, 40), st.integers(0, 1000))
def test_split_partitions_problems(n_prob, seed):
    samples = [sample(f"p{k}", theta=t) for k in range(n_prob) for t in (0.1, 0.2)]
    tagged = split_dataset(samples, seed)
    per = {}
    for s in tagged:
        per.setdefault(s.problem_id, set()).add(s.split)
    assert all(len(v) == 1 for v in per.values())


# --------------------------------------------------------------------------
# records and sweeps
# --------------------------------------------------------------------------

def test_sample_round_trip(tmp_path):
    a = sample(t=math.inf, converged=False)
    b = sample(theta=0.3)
    write_samples([a, b], tmp_path / "s.jsonl")
    back = read_samples(tmp_path / "s.jsonl")
    assert back[0].mean_time == math.inf and back[1] == b
    (tmp_path / "bad.jsonl").write_text('{"problem_id": "x", "bogus": 1}\n')
    with pytest.raises(ValueError, match="bad.jsonl:1"):
        read_samples(tmp_path / "bad.jsonl")


def test_canonical_drops_duplicates():
    out = canonical_samples([sample(theta=0.2), sample(theta=0.1), sample(theta=0.2, t=9.0)])
    assert [s.theta for s in out] == [0.1, 0.2] and out[1].mean_time == 1.0


def test_sweep_yields_four_per_theta():
    prob = build_problem("FEM-P1", "tri", 1)
    got = list(sweep_problem("p", prob, SweepPlan([0.2, 0.5, 0.8])))
    assert len(got) == 12
    assert len({(s.theta, s.smoother) for s in got}) == 12
    assert all(s.converged and 0 < s.rho < 1 for s in got)


def test_sweep_directory_resumes(tmp_path):
    prob = build_problem("FEM-P1", "tri", 1)
    save_problem(prob, tmp_path / "probs", "p0")
    assert list_problems(tmp_path / "probs") == ["p0"]
    assert load_problem(tmp_path / "probs", "p0").n == prob.n
    out = tmp_path / "s.jsonl"
    first = sweep_directory(tmp_path / "probs", out, thetas=[0.25, 0.5])
    again = sweep_directory(tmp_path / "probs", out, thetas=[0.25, 0.5, 0.75])
    assert first == 8 and again == 4
    samples = read_samples(out)
    assert len(samples) == 12 and len({s.key for s in samples}) == 12


def test_sweep_directory_missing():
    with pytest.raises(FileNotFoundError):
        list_problems("/nonexistent/dir")


def test_prepare_dataset_rho(tmp_path):
    samples = [sample(f"p{k}", theta=t, rho=t) for k in range(5) for t in (0.1, 0.2)]
    out = prepare_dataset(samples, "rho", seed=0)
    assert len(out) == 10 and all(s.split for s in out)
    assert all(s.cost == s.theta for s in out)
