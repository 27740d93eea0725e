"""Minibatch AdamW training with a reduce-on-plateau learning-rate schedule."""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass

import numpy as np

from amgtune.surrogate.net import Batch, SurrogateModel


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 10
    factor: float = 0.5
    min_learning_rate: float = 1e-6
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    target_loss: float | None = None  # stop once the training MSE falls below this

    def __post_init__(self):
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ValueError("learning rate and weight decay must be non-negative")
        if self.batch_size < 1 or self.max_epochs < 0 or self.patience < 1:
            raise ValueError("batch size, epochs and patience must be positive")
        if not 0.0 < self.factor < 1.0:
            raise ValueError("factor must lie in (0, 1)")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0 and self.eps > 0):
            raise ValueError("invalid moment parameters")


class AdamW:
    """Adam with weight decay applied directly to the parameters."""

    def __init__(self, params: dict, lr, weight_decay, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.wd = weight_decay
        self.b1, self.b2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, p in params.items():
            g = grads[k]
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * (g * g)
            denom = np.sqrt(v / c2)
            denom += self.eps
            # decoupled decay, then the Adam step
            p *= 1.0 - self.lr * self.wd
            p -= (self.lr / c1) * m / denom


def evaluate_loss(model: SurrogateModel, data: Batch, chunk: int = 512) -> float:
    total = 0.0
    n = len(data)
    for s in range(0, n, chunk):
        sub = data.subset(np.arange(s, min(n, s + chunk)))
        total += model.loss(sub) * len(sub)
    return total / n


def train(model: SurrogateModel, train_data: Batch, val_data: Batch | None = None,
          config: TrainConfig | None = None, log=None):
    """Train a copy of ``model``; returns ``(best_model, history)``.

    The monitored quantity is the validation MSE, or the training MSE when
    no validation data is given.  ``history`` holds one dict per epoch with
    ``epoch``, ``train_mse``, ``val_mse`` and ``learning_rate``.
    """
    cfg = config or TrainConfig()
    if train_data is None or len(train_data) == 0:
        raise ValueError("training split is empty")
    if train_data.targets is None:
        raise ValueError("training data has no targets")
    has_val = val_data is not None and len(val_data) > 0
    model = model.copy()
    rng = np.random.default_rng(cfg.seed)
    opt = AdamW(model.params, cfg.learning_rate, cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.eps)
    n = len(train_data)
    best = None
    best_loss = np.inf
    bad = 0
    history = []
    for epoch in range(1, cfg.max_epochs + 1):
        perm = rng.permutation(n)
        for s in range(0, n, cfg.batch_size):
            sub = train_data.subset(perm[s:s + cfg.batch_size])
            _, grads = model.loss_and_grad(sub)
            opt.step(model.params, grads)
        tr = evaluate_loss(model, train_data)
        va = evaluate_loss(model, val_data) if has_val else float("nan")
        history.append({"epoch": epoch, "train_mse": tr, "val_mse": va, "learning_rate": opt.lr})
        if log:
            log(history[-1])
        monitor = va if has_val else tr
        if monitor < best_loss:
            best_loss, bad = monitor, 0
            best = {k: v.copy() for k, v in model.params.items()}
        else:
            bad += 1
            if bad >= cfg.patience:
                opt.lr *= cfg.factor
                bad = 0
        if cfg.target_loss is not None and tr < cfg.target_loss:
            break
        if opt.lr < cfg.min_learning_rate:
            break
    if best is not None:
        model.params = best
    model.meta.update({"epochs": len(history), "best_monitored_mse": float(best_loss),
                       "monitor": "val" if has_val else "train", "train_config": asdict(cfg)})
    return model, history


def write_history(history, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_mse", "val_mse", "learning_rate"])
        for h in history:
            w.writerow([h["epoch"], repr(float(h["train_mse"])), repr(float(h["val_mse"])),
                        repr(float(h["learning_rate"]))])
