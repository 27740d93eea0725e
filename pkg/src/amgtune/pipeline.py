"""End-to-end glue: problem directory + samples -> trained surrogate."""
from __future__ import annotations

from amgtune.dataset import list_problems, load_problem, prepare_dataset
from amgtune.pooling import pooled_features
from amgtune.surrogate import ArchitectureSpec, SurrogateModel, TrainConfig, split_batches, train


def pooled_images(problem_dir, problem_ids=None, m: int = 32) -> dict:
    """Normalized pooled arrays keyed by problem id."""
    ids = problem_ids if problem_ids is not None else list_problems(problem_dir)
    return {pid: pooled_features(load_problem(problem_dir, pid).matrix, m) for pid in sorted(set(ids))}


def train_surrogate(samples, problem_dir, metric: str = "rho", spec: ArchitectureSpec | None = None,
                    config: TrainConfig | None = None, seed: int = 0, log=None):
    """Prepare the samples, train, and return ``(model, history, prepared)``.

    ``prepared`` holds the smoothed, normalized and split samples; the
    model's metadata records the split of every problem.
    """
    spec = spec or ArchitectureSpec()
    config = config or TrainConfig(seed=seed)
    prepared = prepare_dataset(samples, metric, seed)
    if not prepared:
        raise ValueError("no usable samples after normalization")
    images = pooled_images(problem_dir, [s.problem_id for s in prepared], spec.m)
    batches = split_batches(prepared, images)
    model = SurrogateModel.initialize(spec, seed)
    best, history = train(model, batches["train"], batches["val"], config, log)
    best.meta["metric"] = metric
    best.meta["splits"] = {s.problem_id: s.split for s in prepared}
    if batches["test"] is not None:
        from amgtune.surrogate.train import evaluate_loss

        best.meta["test_mse"] = evaluate_loss(best, batches["test"])
    return best, history, prepared
