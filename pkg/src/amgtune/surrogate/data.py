"""Turning cost samples into network batches."""
from __future__ import annotations

import numpy as np

from amgtune.surrogate.net import Batch, extra_features


def build_batch(samples, images: dict) -> Batch:
    """Stack samples; ``images`` maps problem id to its normalized pooled array."""
    ids = sorted({s.problem_id for s in samples})
    missing = [pid for pid in ids if pid not in images]
    if missing:
        raise KeyError(f"no pooled image for problems: {missing}")
    pos = {pid: k for k, pid in enumerate(ids)}
    imgs = np.stack([images[pid] for pid in ids]) if ids else np.zeros((0, 1, 1, 4))
    index = np.array([pos[s.problem_id] for s in samples], dtype=np.int64)
    extras = np.array([extra_features(s.theta, s.smoother, s.n, s.p) for s in samples]).reshape(len(samples), -1)
    targets = np.array([s.cost for s in samples], dtype=np.float64)
    return Batch(imgs, index, extras, targets)


def split_batches(samples, images: dict) -> dict:
    """Batches keyed by split tag; a split without samples maps to None."""
    out = {}
    for tag in ("train", "val", "test"):
        sel = [s for s in samples if s.split == tag]
        out[tag] = build_batch(sel, images) if sel else None
    return out
