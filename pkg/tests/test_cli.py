import csv
import json

import pytest

from amgtune.cli import EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE, main, parse_args
from amgtune.dataset import read_samples
from amgtune.surrogate import save_model
from amgtune.tuner import AGGREGATE_COLUMNS
from test_tuner import rigged_model

SMALL_SUITE = """[suite]
base_suite = poisson
name = tiny
refinements = 1 2
"""


def run(argv, env=None):
    return main([str(a) for a in argv], environ=env or {})


@pytest.fixture
def tiny(tmp_path):
    (tmp_path / "tiny.ini").write_text(SMALL_SUITE)
    out = tmp_path / "probs"
    assert run(["gen", "--suite", tmp_path / "tiny.ini", "--out", out]) == EXIT_OK
    return out


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "model.json"
    save_model(rigged_model(), path)
    return path


def test_gen_deterministic(tmp_path, tiny):
    again = tmp_path / "again"
    run(["gen", "--suite", tmp_path / "tiny.ini", "--out", again])
    names = sorted(p.name for p in tiny.iterdir())
    assert names == sorted(p.name for p in again.iterdir())
    assert "suite.ini" in names
    for name in names:
        assert (tiny / name).read_bytes() == (again / name).read_bytes()


def test_gen_list(capsys):
    assert run(["gen", "--suite", "tc1-mini", "--list"]) == EXIT_OK
    assert len(capsys.readouterr().out.split()) == 24


def test_gen_errors(tmp_path):
    assert run(["gen"]) == EXIT_USAGE
    assert run(["gen", "--suite", "nonexistent", "--out", tmp_path]) == EXIT_ERROR
    (tmp_path / "empty.ini").write_text("[suite]\nbase_suite = poisson\nrefinements =\n")
    assert run(["gen", "--suite", tmp_path / "empty.ini", "--out", tmp_path / "o"]) == EXIT_ERROR


def test_sweep_n5000_gives_148(tmp_path):
    (tmp_path / "big.ini").write_text("[suite]\nbase_suite = poisson\nname = big\nrefinements = 1\nbase = 72\n")
    run(["gen", "--suite", tmp_path / "big.ini", "--out", tmp_path / "p"])
    meta = json.loads(next((tmp_path / "p").glob("big*.json")).read_text())
    assert meta["n"] == 5041
    assert run(["sweep", "--problems", tmp_path / "p", "--out", tmp_path / "s.jsonl"]) == EXIT_OK
    samples = read_samples(tmp_path / "s.jsonl")
    assert len(samples) == 148
    assert all(len(s.times) == 1 for s in samples)  # rho metric: no repetitions


def test_sweep_resume_matches_uninterrupted(tmp_path, tiny):
    full = tmp_path / "full.jsonl"
    run(["sweep", "--problems", tiny, "--out", full, "--theta-step", "0.3"])
    part = tmp_path / "part.jsonl"
    run(["sweep", "--problems", tiny, "--out", part, "--theta-step", "0.3"])
    lines = part.read_text().splitlines()
    part.write_text("\n".join(lines[:5]) + "\n")
    run(["sweep", "--problems", tiny, "--out", part, "--theta-step", "0.3"])

    def keyed(path):
        return {s.key: (s.converged, s.n_it, s.rho) for s in read_samples(path)}

    assert keyed(part) == keyed(full) and len(keyed(full)) == 2 * 4 * 4


def test_solve_poisson_converges(tiny, capsys):
    rc = run(["solve", "--problems", tiny, "--id", "tiny_tri_r2", "--theta", 0.25, "--smoother", "sor-jacobi"])
    assert rc == EXIT_OK
    assert capsys.readouterr().out.startswith("converged")


def test_solve_not_converged_exit_code(tiny, tmp_path):
    rep = tmp_path / "r.json"
    rc = run(["solve", "--problems", tiny, "--id", "tiny_tri_r2", "--maxiter", 1, "--tol", 1e-14, "--report", rep])
    assert rc == EXIT_NOT_CONVERGED
    assert json.loads(rep.read_text())["converged"] is False


def test_solve_usage_errors(tiny, model_file):
    assert run(["solve", "--problems", tiny, "--id", "tiny_tri_r1", "--theta", 0.3, "--model", model_file]) == EXIT_USAGE
    assert run(["solve", "--problems", tiny, "--id", "tiny_tri_r1", "--nu1", 2]) == EXIT_USAGE
    assert run(["solve"]) == EXIT_USAGE
    assert run(["solve", "--problems", tiny, "--id", "nope"]) == EXIT_ERROR


def test_tune_then_solve(tiny, model_file, tmp_path, capsys):
    assert run(["tune", "--model", model_file, "--problems", tiny, "--id", "tiny_tri_r2"]) == EXIT_OK
    line = capsys.readouterr().out.strip()
    assert line.startswith("theta=0.40 smoother=l1-jacobi")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(["solve", "--model", model_file, "--problems", tiny, "--id", "tiny_tri_r2", "--report", a])
    run(["solve", "--theta", 0.4, "--smoother", "l1-jacobi", "--problems", tiny, "--id", "tiny_tri_r2", "--report", b])
    ra, rb = json.loads(a.read_text()), json.loads(b.read_text())
    assert ra["residuals"] == rb["residuals"] and ra["params"] == rb["params"]


def test_tune_table(tiny, model_file, capsys):
    run(["tune", "--model", model_file, "--problems", tiny, "--id", "tiny_tri_r1", "--table"])
    assert len(capsys.readouterr().out.strip().splitlines()) == 1 + 1 + 101


def test_eval_columns(tiny, model_file, tmp_path, capsys):
    out = tmp_path / "ev.csv"
    rc = run(["eval", "--model", model_file, "--problems", tiny, "--ids", "tiny_tri_r1", "--allow-missing",
              "--c-rep", 0, "--out", out])
    assert rc == EXIT_OK
    header = next(csv.reader(open(tmp_path / "ev_summary.csv")))
    assert header == ["case"] + list(AGGREGATE_COLUMNS)
    assert "P_B" in capsys.readouterr().out
    assert run(["report", "--records", out, "--out", tmp_path / "rep"]) == EXIT_OK
    assert (tmp_path / "rep" / "summary.csv").exists()


def test_eval_requires_samples(tiny, model_file, tmp_path):
    assert run(["eval", "--model", model_file, "--problems", tiny, "--ids", "tiny_tri_r1",
                "--out", tmp_path / "e.csv"]) == EXIT_USAGE


def test_layering_config_env_flag(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[global]\nseed = 7\n[solve]\nmaxiter = 11\ntol = 1e-3\n")
    args = parse_args(["--config", str(cfg), "solve"], environ={})
    assert (args.seed, args.maxiter, args.tol) == (7, 11, 1e-3)
    args = parse_args(["--config", str(cfg), "solve"], environ={"AMGTUNE_MAXITER": "22"})
    assert args.maxiter == 22 and args.tol == 1e-3
    args = parse_args(["--config", str(cfg), "solve", "--maxiter", "33"], environ={"AMGTUNE_MAXITER": "22"})
    assert args.maxiter == 33
    args = parse_args(["solve"], environ={"AMGTUNE_CONFIG": str(cfg)})
    assert args.seed == 7


def test_layering_errors(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[solve]\ncolour = blue\n")
    assert run(["--config", cfg, "solve"]) == EXIT_USAGE
    assert run(["solve"], env={"AMGTUNE_MAXITER": "many"}) == EXIT_USAGE
    assert run(["--config", tmp_path / "missing.ini", "solve"]) == EXIT_USAGE


def test_train_command(tmp_path, tiny):
    run(["sweep", "--problems", tiny, "--out", tmp_path / "s.jsonl", "--theta-step", "0.3"])
    # two problems cannot be split 60/20/20
    rc = run(["train", "--problems", tiny, "--samples", tmp_path / "s.jsonl", "--out", tmp_path / "m.json",
              "--epochs", 2, "--pool-size", 8])
    assert rc == EXIT_ERROR
