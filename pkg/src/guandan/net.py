"""Dense network stack: tanh MLP trunk with linear heads, reverse-mode
gradients, RMSProp/Adam, and a self-describing binary checkpoint format.

Everything is numpy; float32 for training, float64 available for gradient
verification.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

CHECKPOINT_MAGIC = b"DZCK"
CHECKPOINT_FORMAT_VERSION = 1
FEATURE_LAYOUT_VERSION = 1


@dataclass(frozen=True)
class MlpSpec:
    """Trunk widths plus one linear head per entry of ``heads``."""

    input_dim: int
    hidden: tuple
    heads: tuple
    kind: str  # "q" or "ppo"; checkpoints refuse to cross-load

    def layer_dims(self):
        dims = [self.input_dim] + list(self.hidden)
        return list(zip(dims[:-1], dims[1:]))


def q_spec(input_dim: int = 567, hidden=(512, 512, 512, 512)) -> MlpSpec:
    return MlpSpec(input_dim, tuple(hidden), (1,), "q")


def ppo_spec(input_dim: int, k: int, hidden=(512, 512, 512, 256)) -> MlpSpec:
    return MlpSpec(input_dim, tuple(hidden), (k, 1), "ppo")


class Mlp:
    """Parameters live in ``self.params``: trunk [W,b]* then head [W,b]*."""

    def __init__(self, spec: MlpSpec, seed: int = 0, dtype=np.float32):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.params: list[np.ndarray] = []
        for fan_in, fan_out in spec.layer_dims():
            self._add_layer(rng, fan_in, fan_out)
        last = spec.hidden[-1] if spec.hidden else spec.input_dim
        for head_dim in spec.heads:
            self._add_layer(rng, last, head_dim)

    def _add_layer(self, rng, fan_in: int, fan_out: int):
        bound = 1.0 / np.sqrt(fan_in)
        W = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        b = rng.uniform(-bound, bound, size=(fan_out,))
        self.params.append(W.astype(self.dtype))
        self.params.append(b.astype(self.dtype))

    @property
    def n_trunk(self) -> int:
        return len(self.spec.hidden)

    def forward(self, X: np.ndarray):
        """Returns (head outputs list, cache for backward)."""
        X = np.asarray(X, dtype=self.dtype)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.spec.input_dim:
            raise ValueError(
                f"input width {X.shape[1]} != spec {self.spec.input_dim}"
            )
        acts = [X]
        h = X
        for i in range(self.n_trunk):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            h = np.tanh(h @ W + b)
            acts.append(h)
        outs = []
        for j in range(len(self.spec.heads)):
            W, b = self.params[2 * (self.n_trunk + j)], self.params[2 * (self.n_trunk + j) + 1]
            outs.append(h @ W + b)
        return outs, acts

    def backward(self, acts, head_grads):
        """Gradients w.r.t. every parameter given dL/d(head output)s.

        ``acts`` is the cache from forward; ``head_grads`` matches the
        head outputs in shape.
        """
        grads = [None] * len(self.params)
        last_h = acts[-1]
        d_trunk = np.zeros_like(last_h)
        for j, g in enumerate(head_grads):
            g = np.asarray(g, dtype=self.dtype)
            if g.ndim == 1:
                g = g[None, :]
            base = 2 * (self.n_trunk + j)
            W = self.params[base]
            grads[base] = last_h.T @ g
            grads[base + 1] = g.sum(axis=0)
            d_trunk = d_trunk + g @ W.T
        dh = d_trunk
        for i in range(self.n_trunk - 1, -1, -1):
            h = acts[i + 1]
            dz = dh * (1.0 - h * h)
            grads[2 * i] = acts[i].T @ dz
            grads[2 * i + 1] = dz.sum(axis=0)
            if i:
                dh = dz @ self.params[2 * i].T
            else:
                dh = None
        return grads

    def value(self, X: np.ndarray, head: int = 0) -> np.ndarray:
        """Forward only, squeezed single head output."""
        outs, _ = self.forward(X)
        out = outs[head]
        return out[:, 0] if out.shape[1] == 1 else out

    def copy_params(self) -> list[np.ndarray]:
        return [p.copy() for p in self.params]

    def load_params(self, params: list[np.ndarray]):
        if len(params) != len(self.params):
            raise ValueError("parameter count mismatch")
        for mine, theirs in zip(self.params, params):
            if mine.shape != theirs.shape:
                raise ValueError(f"shape conflict {mine.shape} vs {theirs.shape}")
            mine[...] = theirs


def _check_finite(grads):
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite gradient; step rejected")


class RmsProp:
    """Plain (uncentered) RMSProp, decay 0.99."""

    def __init__(self, params, lr: float = 1e-3, decay: float = 0.99, eps: float = 1e-8):
        self.lr, self.decay, self.eps = lr, decay, eps
        self.sq = [np.zeros_like(p) for p in params]
        self.steps = 0

    def step(self, params, grads):
        _check_finite(grads)
        self.steps += 1
        for p, g, s in zip(params, grads, self.sq):
            s *= self.decay
            s += (1.0 - self.decay) * g * g
            p -= (self.lr * g / (np.sqrt(s) + self.eps)).astype(p.dtype)

    def state_arrays(self):
        return list(self.sq)

    def meta(self):
        return {"name": "rmsprop", "lr": self.lr, "decay": self.decay,
                "eps": self.eps, "steps": self.steps}


class Adam:
    def __init__(self, params, lr: float = 1e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.steps = 0

    def step(self, params, grads):
        _check_finite(grads)
        self.steps += 1
        b1c = 1.0 - self.beta1 ** self.steps
        b2c = 1.0 - self.beta2 ** self.steps
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            mhat = m / b1c
            vhat = v / b2c
            p -= (self.lr * mhat / (np.sqrt(vhat) + self.eps)).astype(p.dtype)

    def state_arrays(self):
        return list(self.m) + list(self.v)

    def meta(self):
        return {"name": "adam", "lr": self.lr, "beta1": self.beta1,
                "beta2": self.beta2, "eps": self.eps, "steps": self.steps}


def make_optimizer(meta: dict, params):
    if meta["name"] == "rmsprop":
        opt = RmsProp(params, lr=meta["lr"], decay=meta["decay"], eps=meta["eps"])
    elif meta["name"] == "adam":
        opt = Adam(params, lr=meta["lr"], beta1=meta["beta1"],
                   beta2=meta["beta2"], eps=meta["eps"])
    else:
        raise ValueError(f"unknown optimizer {meta['name']!r}")
    opt.steps = meta.get("steps", 0)
    return opt


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

class CheckpointError(ValueError):
    pass


def save_checkpoint(path, net: Mlp, optimizer=None, step: int = 0, extra: dict | None = None):
    """Binary: magic, format version, JSON meta, then float32 LE arrays."""
    if net.dtype != np.float32:
        raise CheckpointError("checkpoints store float32 networks only")
    arrays = list(net.params)
    opt_meta = None
    if optimizer is not None:
        opt_meta = optimizer.meta()
        arrays += optimizer.state_arrays()
    meta = {
        "kind": net.spec.kind,
        "spec": {
            "input_dim": net.spec.input_dim,
            "hidden": list(net.spec.hidden),
            "heads": list(net.spec.heads),
        },
        "layout_version": FEATURE_LAYOUT_VERSION,
        "step": step,
        "optimizer": opt_meta,
        "shapes": [list(a.shape) for a in arrays],
        "extra": extra or {},
    }
    blob = json.dumps(meta).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", CHECKPOINT_FORMAT_VERSION, len(blob)))
        f.write(blob)
        for a in arrays:
            f.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def load_checkpoint(path, expect_kind: str | None = None):
    """Returns (net, optimizer or None, meta). Bit-exact inverse of save."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError("bad magic; not a checkpoint file")
    fmt, meta_len = struct.unpack_from("<II", data, 4)
    if fmt != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {fmt}")
    off = 12
    meta = json.loads(data[off : off + meta_len].decode("utf-8"))
    off += meta_len
    if expect_kind is not None and meta["kind"] != expect_kind:
        raise CheckpointError(
            f"checkpoint holds a {meta['kind']!r} net, expected {expect_kind!r}"
        )
    spec = MlpSpec(
        meta["spec"]["input_dim"],
        tuple(meta["spec"]["hidden"]),
        tuple(meta["spec"]["heads"]),
        meta["kind"],
    )
    net = Mlp(spec, seed=0)
    arrays = []
    for shape in meta["shapes"]:
        n = int(np.prod(shape)) if shape else 1
        a = np.frombuffer(data, dtype="<f4", count=n, offset=off).reshape(shape).copy()
        off += 4 * n
        arrays.append(a)
    if off != len(data):
        raise CheckpointError("trailing or missing bytes in checkpoint")
    n_params = len(net.params)
    net.load_params(arrays[:n_params])
    optimizer = None
    if meta["optimizer"] is not None:
        optimizer = make_optimizer(meta["optimizer"], net.params)
        state = arrays[n_params:]
        if isinstance(optimizer, RmsProp):
            for s, a in zip(optimizer.sq, state):
                s[...] = a
        else:
            half = len(state) // 2
            for m, a in zip(optimizer.m, state[:half]):
                m[...] = a
            for v, a in zip(optimizer.v, state[half:]):
                v[...] = a
    return net, optimizer, meta
