"""Command-line interface.

Settings are resolved in this order (later wins): built-in defaults, the
INI file given by ``--config`` (sections ``[global]`` and one per
subcommand), environment variables ``AMGTUNE_<OPTION>`` (upper case,
dashes as underscores, e.g. ``AMGTUNE_MAXITER``), command-line flags.

Exit codes: 0 success, 1 runtime or input error, 2 usage error,
3 solver did not converge.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_NOT_CONVERGED = 0, 1, 2, 3
ENV_PREFIX = "AMGTUNE_"

log = logging.getLogger("amgtune")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _matrix_source(p):
    p.add_argument("--matrix", help="Matrix Market file")
    p.add_argument("--rhs", help="right-hand side vector file (default: problem rhs or ones)")
    p.add_argument("--problems", help="problem directory")
    p.add_argument("--id", dest="problem_id", help="problem id inside --problems")
    p.add_argument("--degree", type=int, help="polynomial degree fed to the surrogate (default: from metadata)")


def _solver_opts(p):
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--maxiter", type=int, default=500)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="amgtune", description="AMG parameter tuning with a learned cost surrogate")
    ap.add_argument("--seed", type=int, default=0, help="global random seed")
    ap.add_argument("--jobs", type=int, default=1, help="parallel workers for problem-level work")
    ap.add_argument("--config", help="INI configuration file")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a problem suite")
    p.add_argument("--suite", required=False, help="built-in suite name or suite INI file")
    p.add_argument("--out", help="output problem directory")
    p.add_argument("--list", action="store_true", help="list problems without assembling")

    p = sub.add_parser("sweep", help="measure cost over the (theta, smoother) grid")
    p.add_argument("--problems", help="problem directory")
    p.add_argument("--out", help="sample file (JSON lines, appended, resumable)")
    p.add_argument("--metric", choices=("rho", "time"), help="cost metric (default: suite metric)")
    p.add_argument("--c-rep", type=float, default=2.0, help="timing repetition constant [s]")
    p.add_argument("--theta-step", type=float, help="uniform theta step on [0.05, 0.95] instead of the size rule")
    p.add_argument("--ids", nargs="*", help="restrict to these problem ids")
    _solver_opts(p)

    p = sub.add_parser("train", help="train the cost surrogate")
    p.add_argument("--problems", help="problem directory")
    p.add_argument("--samples", help="sample file")
    p.add_argument("--out", help="model file")
    p.add_argument("--metric", choices=("rho", "time"), default="rho")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--target-loss", type=float)
    p.add_argument("--pool-size", type=int, default=32, help="pooled image side m")
    p.add_argument("--history", help="training history CSV")

    p = sub.add_parser("tune", help="predict the best (theta, smoother) for a matrix")
    p.add_argument("--model", help="model file")
    _matrix_source(p)
    p.add_argument("--table", action="store_true", help="print the full prediction table")

    p = sub.add_parser("solve", help="solve a system with AMG-PCG")
    _matrix_source(p)
    p.add_argument("--theta", type=float)
    p.add_argument("--smoother", choices=("sor-jacobi", "l1-jacobi", "l1-sor-jacobi", "fcf-jacobi"))
    p.add_argument("--model", help="pick theta and smoother with this model")
    p.add_argument("--method", choices=("pcg", "amg"), default="pcg", help="PCG or stationary V-cycles")
    p.add_argument("--nu1", type=int, default=1, help="pre-smoothing sweeps (stationary method)")
    p.add_argument("--nu2", type=int, default=1, help="post-smoothing sweeps (stationary method)")
    p.add_argument("--solution", help="write the solution vector here")
    p.add_argument("--report", dest="report_file", help="write the solve report (JSON) here")
    _solver_opts(p)

    p = sub.add_parser("eval", help="evaluate a model against the default parameters")
    p.add_argument("--model", help="model file")
    p.add_argument("--problems", help="problem directory")
    p.add_argument("--samples", help="sample file with the measured dataset times")
    p.add_argument("--out", help="per-problem CSV (a _summary.csv is written next to it)")
    p.add_argument("--split", choices=("train", "val", "test", "all"), default="test",
                   help="problems to evaluate, by the split recorded in the model")
    p.add_argument("--ids", nargs="*", help="explicit problem ids (overrides --split)")
    p.add_argument("--allow-missing", action="store_true",
                   help="evaluate problems absent from the samples (t_min left undefined)")
    p.add_argument("--all-smoothers", action="store_true", help="also time the default theta with every smoother")
    p.add_argument("--c-rep", type=float, default=2.0)
    _solver_opts(p)

    p = sub.add_parser("report", help="summary table and figures from evaluation results")
    p.add_argument("--records", nargs="+", help="per-problem CSV files from eval")
    p.add_argument("--labels", nargs="*", help="row labels (default: file stems)")
    p.add_argument("--samples", help="sample file for the rho/time and cost-curve figures")
    p.add_argument("--history", help="training history CSV")
    p.add_argument("--out", help="output directory")
    return ap


# --------------------------------------------------------------------------
# configuration layering
# --------------------------------------------------------------------------

def _option_actions(parser: argparse.ArgumentParser) -> dict:
    return {a.dest: a for a in parser._actions if a.option_strings and a.dest != "help"}


def _coerce(action, raw: str):
    if isinstance(action, argparse._StoreTrueAction):
        v = raw.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off", ""):
            return False
        raise UsageError(f"option {action.dest}: expected a boolean, got {raw!r}")
    if isinstance(action, argparse._CountAction):
        return int(raw)
    if action.nargs in ("*", "+"):
        items = raw.replace(",", " ").split()
        return [action.type(x) for x in items] if action.type else items
    try:
        val = action.type(raw) if action.type else raw
    except (TypeError, ValueError) as exc:
        raise UsageError(f"option {action.dest}: bad value {raw!r}") from exc
    if action.choices is not None and val not in action.choices:
        raise UsageError(f"option {action.dest}: {raw!r} is not one of {sorted(action.choices)}")
    return val


def _layer_defaults(parser, subparser, command, config_path, environ):
    """Defaults from the config file and the environment for one subcommand."""
    values = {}
    acts = {**_option_actions(parser), **_option_actions(subparser)}
    if config_path:
        cp = configparser.ConfigParser()
        if not cp.read(config_path):
            raise UsageError(f"cannot read config file '{config_path}'")
        for section in ("global", command):
            if section in cp:
                for k, v in cp[section].items():
                    dest = k.replace("-", "_")
                    if dest == "id":
                        dest = "problem_id"
                    if dest not in acts:
                        raise UsageError(f"{config_path}: unknown option '{k}' in [{section}]")
                    values[dest] = _coerce(acts[dest], v)
    for dest, act in acts.items():
        key = ENV_PREFIX + dest.upper()
        if key in environ and dest != "config":
            values[dest] = _coerce(act, environ[key])
    return values


def parse_args(argv=None, environ=None):
    environ = os.environ if environ is None else environ
    parser = build_parser()
    args = parser.parse_args(argv)
    config_path = args.config or environ.get(ENV_PREFIX + "CONFIG")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    layered = _layer_defaults(parser, sub, args.command, config_path, environ)
    if layered:
        # flags win: re-parse with the layered values as defaults
        parser = build_parser()
        top = {k: v for k, v in layered.items() if k in _option_actions(parser)}
        parser.set_defaults(**top)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k: v for k, v in layered.items() if k not in top})
        args = parser.parse_args(argv)
    args.config = config_path
    return args


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) in (None, "", [])]
    if missing:
        raise UsageError(f"{args.command}: missing required option(s): "
                         + ", ".join("--" + m.replace("_", "-") for m in missing))


def _load_system(args):
    """Matrix, rhs and degree from --matrix/--rhs or --problems/--id."""
    from amgtune.dataset import load_problem
    from amgtune.sparse import read_matrix_market, read_vector

    if args.matrix and args.problems:
        raise UsageError("give either --matrix or --problems/--id, not both")
    degree = args.degree
    if args.matrix:
        A = read_matrix_market(args.matrix)
        f = read_vector(args.rhs) if args.rhs else np.ones(A.shape[0])
        dim = 2
    elif args.problems and args.problem_id:
        prob = load_problem(args.problems, args.problem_id)
        A = prob.matrix
        f = read_vector(args.rhs) if args.rhs else prob.rhs
        if degree is None:
            degree = prob.metadata.get("degree")
        dim = int(prob.metadata.get("dim", 2))
    else:
        raise UsageError("no system given: use --matrix FILE or --problems DIR --id ID")
    if f.shape[0] != A.shape[0]:
        raise UsageError(f"rhs length {f.shape[0]} does not match matrix size {A.shape[0]}")
    return A, f, degree, dim


def _provenance() -> dict:
    return {"created": time.strftime("%Y-%m-%dT%H:%M:%S%z"), "host": platform.node(),
            "python": platform.python_version()}


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_gen(args) -> int:
    from amgtune.meshes.suites import generate_suite, resolve_suite

    _need(args, "suite")
    suite = resolve_suite(args.suite)
    if args.seed:
        suite.seed = suite.seed + args.seed
    if args.list:
        for ps in suite.problems():
            print(ps.problem_id)
        return EXIT_OK
    _need(args, "out")
    ids = generate_suite(suite, args.out, progress=lambda pid: log.info("generated %s", pid), jobs=args.jobs)
    Path(args.out, "suite.ini").write_text(suite.to_ini())
    print(f"generated {len(ids)} problems in {args.out}")
    return EXIT_OK


def _sweep_one(payload):
    from amgtune.dataset import SweepPlan, load_problem, plan_theta_grid, sweep_problem

    problems, pid, metric, c_rep, tol, maxiter, seed, grid, done = payload
    prob = load_problem(problems, pid)
    thetas = grid if grid is not None else plan_theta_grid(prob.n, seed)
    plan = SweepPlan(thetas, metric=metric, c_rep=c_rep)
    return [s.to_json() for s in sweep_problem(pid, prob, plan, done, tol, maxiter, seed)]


def cmd_sweep(args) -> int:
    from amgtune.dataset import list_problems, read_samples

    _need(args, "problems", "out")
    ids = args.ids or list_problems(args.problems)
    if not ids:
        raise UsageError(f"no problems in {args.problems}")
    metric = args.metric
    if metric is None:
        meta = json.loads(Path(args.problems, f"{ids[0]}.json").read_text())
        metric = meta.get("metric", "rho")
    grid = None
    if args.theta_step:
        k = int(round(0.9 / args.theta_step))
        grid = [round(0.05 + args.theta_step * i, 10) for i in range(k + 1)]
    done = frozenset(s.key for s in read_samples(args.out)) if os.path.exists(args.out) else frozenset()
    jobs = args.jobs if metric == "rho" else 1  # timing sweeps run serially
    payloads = [(args.problems, pid, metric, args.c_rep, args.tol, args.maxiter, args.seed, grid, done)
                for pid in ids]
    written = 0
    with open(args.out, "a") as fh:
        if jobs > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(jobs) as ex:
                results = ex.map(_sweep_one, payloads)
                for pid, lines in zip(ids, results):
                    fh.writelines(line + "\n" for line in lines)
                    fh.flush()
                    written += len(lines)
                    log.info("swept %s", pid)
        else:
            from amgtune.dataset import SweepPlan, load_problem, plan_theta_grid, sweep_problem

            for pid in ids:
                prob = load_problem(args.problems, pid)
                thetas = grid if grid is not None else plan_theta_grid(prob.n, args.seed)
                plan = SweepPlan(thetas, metric=metric, c_rep=args.c_rep)
                for s in sweep_problem(pid, prob, plan, done, args.tol, args.maxiter, args.seed):
                    fh.write(s.to_json() + "\n")
                    fh.flush()
                    written += 1
                log.info("swept %s", pid)
    print(f"wrote {written} samples to {args.out} (metric {metric})")
    return EXIT_OK


def cmd_train(args) -> int:
    from amgtune.dataset import read_samples
    from amgtune.pipeline import train_surrogate
    from amgtune.surrogate import ArchitectureSpec, TrainConfig, save_model, write_history

    _need(args, "problems", "samples", "out")
    samples = read_samples(args.samples)
    if not samples:
        raise UsageError(f"{args.samples} holds no samples")
    cfg = TrainConfig(learning_rate=args.lr, weight_decay=args.weight_decay, batch_size=args.batch_size,
                      max_epochs=args.epochs, patience=args.patience, seed=args.seed, target_loss=args.target_loss)
    spec = ArchitectureSpec(m=args.pool_size)

    def progress(h):
        log.info("epoch %d train %.3e val %.3e lr %.1e", h["epoch"], h["train_mse"], h["val_mse"], h["learning_rate"])

    model, history, _ = train_surrogate(samples, args.problems, args.metric, spec, cfg, args.seed, progress)
    model.meta["provenance"] = _provenance()
    save_model(model, args.out)
    if args.history:
        write_history(history, args.history)
    last = history[-1]
    print(f"trained {len(history)} epochs; best monitored MSE {model.meta['best_monitored_mse']:.4e}; "
          f"final train MSE {last['train_mse']:.4e}; model written to {args.out}")
    return EXIT_OK


def _print_tuning(res, table: bool) -> None:
    flag = "  (outside the trained theta range)" if res.extrapolated else ""
    print(f"theta={res.theta:.2f} smoother={res.smoother} cost={res.cost:.6f}{flag}")
    if table:
        from amgtune.amg import SMOOTHER_NAMES

        print("theta  " + "  ".join(f"{s:>13}" for s in SMOOTHER_NAMES))
        for th, row in res.table_rows():
            print(f"{th:5.2f}  " + "  ".join(f"{v:13.6f}" for v in row))


def cmd_tune(args) -> int:
    from amgtune.surrogate import load_model
    from amgtune.tuner import tune

    _need(args, "model")
    model = load_model(args.model)
    A, _, degree, _ = _load_system(args)
    _print_tuning(tune(A, model, degree), args.table)
    return EXIT_OK


def cmd_solve(args) -> int:
    from amgtune.amg import amg_setup, amg_solve, pcg_solve
    from amgtune.sparse import write_vector
    from amgtune.tuner import default_params

    explicit = args.theta is not None or args.smoother is not None
    if explicit and args.model:
        raise UsageError("--model conflicts with --theta/--smoother")
    if args.method == "pcg" and (args.nu1 != 1 or args.nu2 != 1):
        raise UsageError("--nu1/--nu2 apply to --method amg; PCG uses a symmetric V(1,1) cycle")
    A, f, degree, dim = _load_system(args)
    if args.model:
        from amgtune.surrogate import load_model
        from amgtune.tuner import tune

        res = tune(A, load_model(args.model), degree)
        _print_tuning(res, False)
        theta, smoother = res.solve_theta, res.smoother
    else:
        theta0, sm0 = default_params(dim)
        theta = args.theta if args.theta is not None else theta0
        smoother = args.smoother or sm0
    if args.method == "pcg":
        h = amg_setup(A, theta=theta, seed=args.seed)
        u, rep = pcg_solve(A, f, h, smoother, tol=args.tol, maxiter=args.maxiter)
    else:
        u, rep = amg_solve(A, f, theta, smoother, args.nu1, args.nu2, tol=args.tol, maxiter=args.maxiter,
                           seed=args.seed)
    status = "converged" if rep.converged else f"NOT converged ({rep.reason or 'maximum iterations reached'})"
    print(f"{status}: method={args.method} theta={theta:g} smoother={smoother} n={A.shape[0]} "
          f"iterations={rep.iterations} rho={rep.rho:.4f} setup={rep.setup_time:.4f}s solve={rep.wall_time:.4f}s "
          f"final relative residual={rep.residuals[-1] / rep.residuals[0] if rep.residuals[0] else 0.0:.3e}")
    if args.solution:
        write_vector(u, args.solution)
    if args.report_file:
        Path(args.report_file).write_text(rep.to_record() + "\n")
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def cmd_eval(args) -> int:
    from amgtune.dataset import list_problems, load_problem, read_samples
    from amgtune.report import report
    from amgtune.surrogate import load_model
    from amgtune.tuner import evaluate

    _need(args, "model", "problems", "out")
    model = load_model(args.model)
    if args.ids:
        ids = args.ids
    elif args.split == "all":
        ids = list_problems(args.problems)
    else:
        splits = model.meta.get("splits", {})
        ids = sorted(pid for pid, tag in splits.items() if tag == args.split)
    if not ids:
        raise UsageError(f"no problems selected for evaluation (split '{args.split}')")
    samples = read_samples(args.samples) if args.samples else None
    if samples is None and not args.allow_missing:
        raise UsageError("--samples is required unless --allow-missing is given")
    problems = {pid: load_problem(args.problems, pid) for pid in ids}

    def progress(r):
        log.info("%s: theta=%.2f %s P=%.3f", r.problem_id, r.theta, r.smoother, r.P)

    records, _ = evaluate(problems, model, samples, progress, c_rep=args.c_rep, tol=args.tol,
                          maxiter=args.maxiter, seed=args.seed, strict=not args.allow_missing,
                          all_smoothers=args.all_smoothers)
    print(report(records, args.out, label=Path(args.out).stem))
    return EXIT_OK


def cmd_report(args) -> int:
    from amgtune import report as rp

    _need(args, "records", "out")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    labels = args.labels or [Path(p).stem for p in args.records]
    if len(labels) != len(args.records):
        raise UsageError("--labels must match --records in number")
    rows = {}
    from amgtune.tuner import aggregate

    for label, path in zip(labels, args.records):
        recs = rp.read_records(path)
        if not recs:
            raise UsageError(f"{path} holds no records")
        rows[label] = aggregate(recs)
        rp.plot_gains(recs, out / f"{label}_gains.png")
        if any(r.P_by_smoother for r in recs):
            rp.plot_smoother_gains(recs, out / f"{label}_smoothers.png")
    rp.write_summary_csv(rows, out / "summary.csv")
    text = rp.format_summary(rows)
    (out / "summary.txt").write_text(text + "\n")
    print(text)
    if args.samples:
        from amgtune.dataset import read_samples

        samples = read_samples(args.samples)
        r = rp.plot_rho_vs_time(samples, out / "rho_vs_time.png")
        print(f"rho/time Pearson correlation: {r:.3f}")
        pids = sorted({s.problem_id for s in samples})
        if pids:
            rp.plot_cost_curves(samples, pids[0], out / f"cost_{pids[0]}.png")
    if args.history:
        import csv

        with open(args.history) as fh:
            hist = [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]
        rp.plot_history(hist, out / "history.png")
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "sweep": cmd_sweep, "train": cmd_train, "tune": cmd_tune, "solve": cmd_solve,
            "eval": cmd_eval, "report": cmd_report}


def main(argv=None, environ=None) -> int:
    try:
        args = parse_args(argv, environ)
    except UsageError as exc:
        print(f"amgtune: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(message)s")
    np.random.seed(args.seed % (2 ** 32))
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"amgtune: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, KeyError) as exc:
        print(f"amgtune: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
