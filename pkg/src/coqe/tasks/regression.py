"""Regression episode generators: four function families plus OOD shifts.

All generation runs in float64 so the label invariant y_i = f(x_i) holds
exactly; models may downcast on their side.  Episodes are reproducible
bitwise from (seed, step).
"""

import numpy as np

from .. import rng

FUNCTION_KINDS = ("linear", "sparse", "relu2", "combination")
OOD_SHIFTS = ("none", "ctx-scale", "query-3std", "sign-fixed", "task-scale")

_FULL_DIM = {"linear": 10, "sparse": 10, "relu2": 5, "combination": 5}
_DESK_DIM = {"linear": 5, "sparse": 5, "relu2": 5, "combination": 5}
_FULL_SPARSITY = 3
_DESK_SPARSITY = 2
COMBINATION_DIM = 5


def default_dim(kind, full_dims=False):
    if kind not in FUNCTION_KINDS:
        raise ValueError(f"unknown function kind {kind!r}")
    return (_FULL_DIM if full_dims else _DESK_DIM)[kind]


def default_sparsity(full_dims=False):
    return _FULL_SPARSITY if full_dims else _DESK_SPARSITY


def combination_features(x):
    """Element-wise feature map [|x1|, x2^2, x3^3, cos(pi x4), exp(0.2 x5)]."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != COMBINATION_DIM:
        raise ValueError(
            f"combination features need dim {COMBINATION_DIM}, got {x.shape[-1]}"
        )
    return np.stack(
        [
            np.abs(x[..., 0]),
            x[..., 1] ** 2,
            x[..., 2] ** 3,
            np.cos(np.pi * x[..., 3]),
            np.exp(0.2 * x[..., 4]),
        ],
        axis=-1,
    )


def shared_relu_weights(dim, hidden, seed):
    """First-layer weights reused by every relu-net task of an experiment."""
    g = rng.stream(seed, "tasks/relu2/shared-w")
    return g.normal(size=(hidden, dim))


def sample_tasks(kind, batch, dim, seed, step=0, sparsity=None, hidden=10):
    """One task per episode, drawn from the family's prior."""
    if kind not in FUNCTION_KINDS:
        raise ValueError(f"unknown function kind {kind!r}")
    if kind == "combination" and dim != COMBINATION_DIM:
        raise ValueError(f"combination tasks require d={COMBINATION_DIM}")
    g = rng.stream(seed, f"tasks/{kind}", step)
    task = {"kind": kind, "dim": int(dim)}
    if kind == "linear":
        task["w"] = g.normal(size=(batch, dim))
    elif kind == "sparse":
        s = default_sparsity() if sparsity is None else int(sparsity)
        if not 1 <= s <= dim:
            raise ValueError(f"sparsity {s} out of range [1, {dim}]")
        w = g.normal(size=(batch, dim))
        # uniform random s-subset per task: keep the s smallest of iid uniforms
        order = np.argsort(g.random(size=(batch, dim)), axis=1)
        mask = np.zeros((batch, dim))
        np.put_along_axis(mask, order[:, :s], 1.0, axis=1)
        task["w"] = w * mask
        task["support"] = mask.astype(bool)
    elif kind == "relu2":
        task["a"] = g.normal(size=(batch, hidden)) * np.sqrt(2.0 / hidden)
        task["shared_w"] = shared_relu_weights(dim, hidden, seed)
    else:
        task["w"] = g.normal(size=(batch, COMBINATION_DIM))
    return task


def task_labels(task, x):
    """Exact labels f(x) for a batch of tasks; x is (B, k, d) -> (B, k)."""
    x = np.asarray(x, dtype=np.float64)
    kind = task["kind"]
    if kind in ("linear", "sparse"):
        return np.einsum("bkd,bd->bk", x, task["w"])
    if kind == "relu2":
        pre = np.maximum(np.einsum("bkd,hd->bkh", x, task["shared_w"]), 0.0)
        return np.einsum("bkh,bh->bk", pre, task["a"])
    return np.einsum("bkd,bd->bk", combination_features(x), task["w"])


def make_prompt(kind, batch, n_ctx, seed, step=0, dim=None, full_dims=False,
                sparsity=None, hidden=10):
    """Episode batch: k context pairs plus one query per task.

    The model's prefix losses cover prompts P^0..P^{k-1}; the query slot
    is the length-k evaluation point.
    """
    if n_ctx < 1:
        raise ValueError(f"n_ctx must be >= 1, got {n_ctx}")
    if dim is None:
        dim = default_dim(kind, full_dims)
    if sparsity is None and kind == "sparse":
        sparsity = default_sparsity(full_dims)
    task = sample_tasks(kind, batch, dim, seed, step=step, sparsity=sparsity,
                        hidden=hidden)
    g = rng.stream(seed, f"prompt/{kind}", step)
    xs = g.normal(size=(batch, n_ctx, dim))
    xq = g.normal(size=(batch, dim))
    return {
        "kind": kind,
        "xs": xs,
        "ys": task_labels(task, xs),
        "xq": xq,
        "yq": task_labels(task, xq[:, None, :])[:, 0],
        "task": task,
        "seed": int(seed),
        "step": int(step),
        "shift": "none",
    }


def _scaled_task(task, factor):
    scaled = dict(task)
    if task["kind"] == "relu2":
        scaled["a"] = task["a"] * factor
    else:
        scaled["w"] = task["w"] * factor
    return scaled


def apply_ood_shift(episode, kind, factor=None):
    """Shifted copy of an episode with labels recomputed exactly.

    kinds: ctx-scale (context and query inputs scaled by factor),
    query-3std (query drawn 3x wider), sign-fixed (context coordinates
    forced to one per-episode sign pattern, query untouched), task-scale
    (task parameters scaled by factor).
    """
    if kind == "none":
        return dict(episode)
    task = episode["task"]
    out = dict(episode)
    if kind == "ctx-scale":
        factor = 1.0 if factor is None else float(factor)
        out["xs"] = episode["xs"] * factor
        out["xq"] = episode["xq"] * factor
        out["ys"] = task_labels(task, out["xs"])
        out["yq"] = task_labels(task, out["xq"][:, None, :])[:, 0]
    elif kind == "query-3std":
        out["xq"] = episode["xq"] * 3.0
        out["yq"] = task_labels(task, out["xq"][:, None, :])[:, 0]
    elif kind == "sign-fixed":
        g = rng.stream(episode["seed"], "ood/sign-fixed", episode["step"])
        b, _, d = episode["xs"].shape
        signs = g.integers(0, 2, size=(b, 1, d)) * 2.0 - 1.0
        out["xs"] = np.abs(episode["xs"]) * signs
        out["ys"] = task_labels(task, out["xs"])
    elif kind == "task-scale":
        factor = 1.0 if factor is None else float(factor)
        scaled = _scaled_task(task, factor)
        out["task"] = scaled
        out["ys"] = task_labels(scaled, episode["xs"])
        out["yq"] = task_labels(scaled, episode["xq"][:, None, :])[:, 0]
    else:
        raise ValueError(f"unknown OOD shift {kind!r}")
    out["shift"] = kind if factor is None else f"{kind}:{factor}"
    return out
