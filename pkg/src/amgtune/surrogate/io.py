"""JSON model files.

Layout::

    {"format": "amgtune-surrogate", "version": 1,
     "feature_order": ["theta", "b1", ..., "p"],
     "spec": {...}, "meta": {...},
     "params": {"conv0_0.W": {"shape": [...], "data": [...]}, ...}}

Floats are written with ``repr`` precision, so a round trip is bit-exact.
"""
from __future__ import annotations

import json
import os

import numpy as np

from amgtune.surrogate.net import EXTRA_FEATURES, ArchitectureSpec, SurrogateModel

FORMAT = "amgtune-surrogate"
VERSION = 1


class ModelFileError(ValueError):
    pass


def save_model(model: SurrogateModel, path) -> None:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "feature_order": list(EXTRA_FEATURES),
        "spec": model.spec.to_dict(),
        "meta": model.meta,
        "params": {name: {"shape": list(model.params[name].shape),
                          "data": model.params[name].ravel().tolist()}
                   for name, _ in model.spec.parameter_shapes()},
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def load_model(path) -> SurrogateModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: unreadable or truncated model file ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ModelFileError(f"{path}: not a surrogate model file")
    if doc.get("version") != VERSION:
        raise ModelFileError(f"{path}: model version {doc.get('version')} is not supported (expected {VERSION})")
    if doc.get("feature_order") != list(EXTRA_FEATURES):
        raise ModelFileError(f"{path}: input feature order differs from this version")
    spec = ArchitectureSpec.from_dict(doc["spec"])
    stored = doc.get("params") or {}
    shapes = spec.parameter_shapes()
    missing = [name for name, _ in shapes if name not in stored]
    if missing:
        raise ModelFileError(f"{path}: missing parameter arrays: {', '.join(missing)}")
    params = {}
    for name, shape in shapes:
        entry = stored[name]
        if tuple(entry.get("shape", ())) != tuple(shape):
            raise ModelFileError(f"{path}: array {name} has shape {entry.get('shape')}, expected {list(shape)}")
        data = np.asarray(entry.get("data", []), dtype=np.float64)
        if data.size != int(np.prod(shape)):
            raise ModelFileError(f"{path}: array {name} holds {data.size} values, expected {int(np.prod(shape))}")
        params[name] = data.reshape(shape)
    return SurrogateModel(spec, params, doc.get("meta", {}))
