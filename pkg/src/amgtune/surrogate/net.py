"""Convolutional cost surrogate with hand-written forward and backward passes.

Inputs per sample: a normalized pooled image ``(m, m, 4)`` and the extra
features ``[theta, b1, b2, b3, b4, log n, p]`` in that order.  The image
goes through conv blocks (each a few same-padded convolutions with ReLU
followed by a 2x2 max-pool), is flattened, concatenated with the extras
and fed to a ReLU dense stack and a scalar head whose output is clipped
to [0, 1].

Parameters are kept in one ordered dict; the order is fixed by
:meth:`ArchitectureSpec.parameter_shapes`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from amgtune.amg.smoothers import SmootherKind

EXTRA_FEATURES = ("theta", "b1", "b2", "b3", "b4", "log_n", "p")
N_EXTRA = len(EXTRA_FEATURES)


@dataclass(frozen=True)
class ArchitectureSpec:
    m: int = 32
    blocks: tuple = ((2, 8, 3), (2, 16, 3))  # (convolutions, filters, kernel size)
    dense: tuple = (256, 64)
    in_channels: int = 4
    clip: tuple = (0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(tuple(int(v) for v in b) for b in self.blocks))
        object.__setattr__(self, "dense", tuple(int(v) for v in self.dense))
        object.__setattr__(self, "clip", tuple(float(v) for v in self.clip))
        if self.m < 1:
            raise ValueError("m must be positive")
        for n_conv, filters, k in self.blocks:
            if k % 2 != 1 or k < 1:
                raise ValueError("kernel sizes must be odd")
            if n_conv < 1 or filters < 1:
                raise ValueError("blocks need at least one convolution and one filter")
        if self.m % (2 ** len(self.blocks)):
            raise ValueError(f"m={self.m} is not divisible by 2**{len(self.blocks)}")
        if not self.clip[0] < self.clip[1]:
            raise ValueError("clip bounds must be increasing")

    @property
    def flat_size(self) -> int:
        side = self.m // 2 ** len(self.blocks)
        last = self.blocks[-1][1] if self.blocks else self.in_channels
        return side * side * last

    def parameter_shapes(self) -> list:
        shapes = []
        cin = self.in_channels
        for bi, (n_conv, filters, k) in enumerate(self.blocks):
            for ci in range(n_conv):
                shapes.append((f"conv{bi}_{ci}.W", (k, k, cin, filters)))
                shapes.append((f"conv{bi}_{ci}.b", (filters,)))
                cin = filters
        width = self.flat_size + N_EXTRA
        for di, w in enumerate(self.dense):
            shapes.append((f"dense{di}.W", (width, w)))
            shapes.append((f"dense{di}.b", (w,)))
            width = w
        shapes.append(("head.W", (width, 1)))
        shapes.append(("head.b", (1,)))
        return shapes

    def n_parameters(self) -> int:
        return int(sum(np.prod(s) for _, s in self.parameter_shapes()))

    def to_dict(self) -> dict:
        return {"m": self.m, "blocks": [list(b) for b in self.blocks], "dense": list(self.dense),
                "in_channels": self.in_channels, "clip": list(self.clip)}

    @classmethod
    def from_dict(cls, d: dict) -> "ArchitectureSpec":
        return cls(m=int(d["m"]), blocks=tuple(tuple(b) for b in d["blocks"]), dense=tuple(d["dense"]),
                   in_channels=int(d.get("in_channels", 4)), clip=tuple(d.get("clip", (0.0, 1.0))))


def extra_features(theta: float, smoother, n: int, p: int | None = None) -> np.ndarray:
    """Feature vector ``[theta, one-hot smoother, log n, p]``; missing ``p`` is 0."""
    b = SmootherKind.parse(smoother).one_hot()
    return np.concatenate([[float(theta)], b, [np.log(float(n)), float(p or 0)]])


@dataclass
class Batch:
    """Unique images plus, per sample, the image index, extras and target."""

    images: np.ndarray
    image_index: np.ndarray
    extras: np.ndarray
    targets: np.ndarray | None = None

    def __len__(self) -> int:
        return self.image_index.size

    def subset(self, rows) -> "Batch":
        rows = np.asarray(rows)
        used, inv = np.unique(self.image_index[rows], return_inverse=True)
        t = None if self.targets is None else self.targets[rows]
        return Batch(self.images[used], inv.ravel(), self.extras[rows], t)


# --------------------------------------------------------------------------
# layers
# --------------------------------------------------------------------------

def _conv_forward(X, W, b):
    k = W.shape[0]
    r = k // 2
    N, m, _, C = X.shape
    Xp = np.pad(X, ((0, 0), (r, r), (r, r), (0, 0)))
    win = sliding_window_view(Xp, (k, k), axis=(1, 2))  # (N, m, m, C, k, k)
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(N * m * m, k * k * C)
    out = cols @ W.reshape(k * k * C, -1) + b
    return out.reshape(N, m, m, -1), cols


def _conv_backward(dout, cols, W, x_shape):
    k = W.shape[0]
    r = k // 2
    N, m, _, C = x_shape
    F = W.shape[3]
    d2 = dout.reshape(-1, F)
    dW = (cols.T @ d2).reshape(W.shape)
    db = d2.sum(axis=0)
    dcols = (d2 @ W.reshape(k * k * C, F).T).reshape(N, m, m, k, k, C)
    dXp = np.zeros((N, m + 2 * r, m + 2 * r, C))
    for i in range(k):
        for j in range(k):
            dXp[:, i:i + m, j:j + m, :] += dcols[:, :, :, i, j, :]
    return dXp[:, r:r + m, r:r + m, :], dW, db


def _pool_forward(X):
    N, m, _, C = X.shape
    h = m // 2
    blocks = X.reshape(N, h, 2, h, 2, C).transpose(0, 1, 3, 5, 2, 4).reshape(N, h, h, C, 4)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
    return out, arg


def _pool_take(X, arg):
    N, m, _, C = X.shape
    h = m // 2
    blocks = X.reshape(N, h, 2, h, 2, C).transpose(0, 1, 3, 5, 2, 4).reshape(N, h, h, C, 4)
    return np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]


def _pool_backward(dout, arg, x_shape):
    N, m, _, C = x_shape
    h = m // 2
    g = np.zeros((N, h, h, C, 4))
    np.put_along_axis(g, arg[..., None], dout[..., None], axis=-1)
    return g.reshape(N, h, h, C, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(N, m, m, C)


# --------------------------------------------------------------------------
# model
# --------------------------------------------------------------------------

@dataclass
class SurrogateModel:
    spec: ArchitectureSpec
    params: dict
    meta: dict = field(default_factory=dict)

    @classmethod
    def initialize(cls, spec: ArchitectureSpec | None = None, seed: int = 0) -> "SurrogateModel":
        """He-normal weights, zero biases, near-zero head weights and head bias at mid-range."""
        spec = spec or ArchitectureSpec()
        rng = np.random.default_rng(seed)
        params = {}
        for name, shape in spec.parameter_shapes():
            if name.endswith(".W"):
                fan_in = int(np.prod(shape[:-1]))
                std = np.sqrt(2.0 / fan_in)
                if name == "head.W":
                    # small head keeps initial predictions inside the clip range
                    std = 0.01 * np.sqrt(1.0 / fan_in)
                params[name] = rng.normal(0.0, std, size=shape)
            else:
                params[name] = np.zeros(shape)
        params["head.b"][:] = 0.5 * (spec.clip[0] + spec.clip[1])
        return cls(spec, params, {"seed": int(seed)})

    @classmethod
    def zeros(cls, spec: ArchitectureSpec | None = None) -> "SurrogateModel":
        spec = spec or ArchitectureSpec()
        return cls(spec, {name: np.zeros(shape) for name, shape in spec.parameter_shapes()})

    def copy(self) -> "SurrogateModel":
        return SurrogateModel(self.spec, {k: v.copy() for k, v in self.params.items()}, dict(self.meta))

    def _check(self, batch: Batch):
        m = self.spec.m
        if batch.images.ndim != 4 or batch.images.shape[1:] != (m, m, self.spec.in_channels):
            raise ValueError(f"images must have shape (*, {m}, {m}, {self.spec.in_channels}), "
                             f"got {batch.images.shape}")
        if batch.extras.ndim != 2 or batch.extras.shape[1] != N_EXTRA:
            raise ValueError(f"extras must have {N_EXTRA} columns")
        if batch.image_index.shape != (batch.extras.shape[0],):
            raise ValueError("one image index per sample is required")

    # ---- forward ----
    def _forward(self, batch: Batch, keep: bool, pattern=None):
        """Forward pass.

        ``pattern`` (from a previous call) freezes every ReLU mask, max-pool
        selection and the clip mask, which turns the network into a smooth
        function of its parameters around that point.  The pattern used is
        returned as the last element.
        """
        self._check(batch)
        P = self.params
        cache = []
        used = []
        frozen = iter(pattern) if pattern is not None else None
        x = batch.images.astype(np.float64, copy=False)
        for bi, (n_conv, _, _) in enumerate(self.spec.blocks):
            for ci in range(n_conv):
                z, cols = _conv_forward(x, P[f"conv{bi}_{ci}.W"], P[f"conv{bi}_{ci}.b"])
                mask = z > 0.0 if frozen is None else next(frozen)
                used.append(mask)
                if keep:
                    cache.append(("conv", f"conv{bi}_{ci}", cols, x.shape, mask))
                x = z * mask
            if frozen is None:
                pooled, arg = _pool_forward(x)
            else:
                arg = next(frozen)
                pooled = _pool_take(x, arg)
            used.append(arg)
            if keep:
                cache.append(("pool", arg, x.shape))
            x = pooled
        flat = x.reshape(x.shape[0], -1)
        h = np.concatenate([flat[batch.image_index], batch.extras], axis=1) if keep else None
        for di in range(len(self.spec.dense)):
            if di == 0:
                # the image part is shared by every sample of the same image
                W = P["dense0.W"]
                z = (flat @ W[:flat.shape[1]])[batch.image_index] + batch.extras @ W[flat.shape[1]:] + P["dense0.b"]
            else:
                z = h @ P[f"dense{di}.W"] + P[f"dense{di}.b"]
            mask = z > 0.0 if frozen is None else next(frozen)
            used.append(mask)
            if keep:
                cache.append(("dense", f"dense{di}", h, mask))
            h = z * mask
        raw = (h @ P["head.W"] + P["head.b"])[:, 0]
        if keep:
            cache.append(("head", h))
        lo, hi = self.spec.clip
        inside = ((raw > lo) & (raw < hi)) if frozen is None else next(frozen)
        used.append(inside)
        out = np.where(inside, raw, np.clip(raw, lo, hi))
        return out, raw, cache, flat.shape, used

    def predict_raw(self, batch: Batch) -> np.ndarray:
        return self._forward(batch, False)[1]

    def activation_pattern(self, batch: Batch) -> list:
        return self._forward(batch, False)[4]

    def frozen_loss(self, batch: Batch, pattern) -> float:
        """Loss with the activation pattern held fixed (smooth in the parameters)."""
        pred = self._forward(batch, False, pattern)[0]
        return float(np.mean((pred - batch.targets) ** 2))

    def predict(self, batch: Batch) -> np.ndarray:
        return self._forward(batch, False)[0]

    def loss(self, batch: Batch) -> float:
        pred = self.predict(batch)
        return float(np.mean((pred - batch.targets) ** 2))

    # ---- backward ----
    def loss_and_grad(self, batch: Batch):
        """Mean squared error and its gradient with respect to every parameter."""
        if batch.targets is None:
            raise ValueError("batch has no targets")
        pred, raw, cache, flat_shape, used = self._forward(batch, True)
        B = pred.size
        diff = pred - batch.targets
        loss = float(np.mean(diff ** 2))
        g = 2.0 * diff / B * used[-1]
        grads = {}
        P = self.params
        _, h = cache.pop()
        grads["head.W"] = h.T @ g[:, None]
        grads["head.b"] = np.array([g.sum()])
        dh = g[:, None] * P["head.W"][:, 0][None, :]
        while cache and cache[-1][0] == "dense":
            _, name, hin, mask = cache.pop()
            dz = dh * mask
            grads[f"{name}.W"] = hin.T @ dz
            grads[f"{name}.b"] = dz.sum(axis=0)
            dh = dz @ P[f"{name}.W"].T
        dflat_samples = dh[:, :self.spec.flat_size]
        dflat = np.zeros(flat_shape)
        np.add.at(dflat, batch.image_index, dflat_samples)
        side = self.spec.m // 2 ** len(self.spec.blocks)
        dx = dflat.reshape(flat_shape[0], side, side, -1)
        while cache:
            item = cache.pop()
            if item[0] == "pool":
                _, arg, xshape = item
                dx = _pool_backward(dx, arg, xshape)
            else:
                _, name, cols, xshape, mask = item
                dz = dx * mask
                dx, dW, db = _conv_backward(dz, cols, P[f"{name}.W"], xshape)
                grads[f"{name}.W"] = dW
                grads[f"{name}.b"] = db
        return loss, {k: grads[k] for k in self.params}
