"""Few-shot classifiers over vector inputs.

Episodes are N (x, label) context pairs plus one query vector.  The
baseline interleaves encoded samples and label embeddings into one
causal sequence and reads the query logits off the final position.  The
context-query variant never mixes the query into the context: the query
is encoded alone, and the context only acts by replacing the class
vectors of in-context classes with pooled task-encoder outputs.
"""

import numpy as np

from ..layers import (
    INIT_STD,
    SampleEncoder,
    TransformerBackbone,
    gaussian_param,
    linear,
    zeros_param,
)
from ..tensor import ShapeError, Tensor, concat, cross_entropy


def noise_schedule(step, mu0, period=10_000):
    """Stats for the logit noise: mean and std both grow by 1 every period."""
    if period <= 0:
        raise ValueError(f"period must be positive, got {period}")
    inc = int(step) // int(period)
    return float(mu0) + inc, 1.0 + inc


class ClassVectorTable:
    """Static class vectors plus per-episode dynamic replacement.

    Classes that appear in the episode context get their vector swapped
    for a pooled task representation; absent classes keep the learned
    static vector.
    """

    def __init__(self, n_classes, dim, seed, label="cls", dtype=np.float32):
        self.n_classes = int(n_classes)
        self.dim = int(dim)
        self.dtype = np.dtype(dtype)
        self.vectors = gaussian_param(
            (self.n_classes, self.dim), seed, label,
            std=self.dim ** -0.5, dtype=self.dtype,
        )

    def pooling(self, labels):
        """Per-class mean-pooling matrix and context mask.

        labels: (B, N) ints.  Returns pool (B, n_classes, N) where row c
        averages the positions labelled c, and mask (B, n_classes) with
        1.0 exactly for classes present in the context.
        """
        labels = np.asarray(labels)
        if labels.ndim != 2:
            raise ShapeError(f"expected (B, N) labels, got {labels.shape}")
        if labels.min() < 0 or labels.max() >= self.n_classes:
            raise ValueError(
                f"labels out of range [0, {self.n_classes}): "
                f"[{labels.min()}, {labels.max()}]"
            )
        b, n = labels.shape
        pool = np.zeros((b, self.n_classes, n), dtype=self.dtype)
        rows = np.repeat(np.arange(b), n)
        pool[rows, labels.reshape(-1), np.tile(np.arange(n), b)] = 1.0
        counts = pool.sum(axis=2, keepdims=True)
        mask = (counts[:, :, 0] > 0).astype(self.dtype)
        pool /= np.maximum(counts, 1.0)
        return pool, mask

    def static_logits(self, phi_q):
        # same contraction as modified_logits, so an all-zero mask gives
        # bitwise-identical streams
        b = phi_q.shape[0]
        out = self.vectors @ phi_q.reshape(b, self.dim, 1)
        return out.reshape(b, self.n_classes)

    def modified_logits(self, phi_q, pooled, mask):
        """Logits against the per-episode table: dynamic where mask is 1."""
        b = pooled.shape[0]
        mask3 = np.broadcast_to(
            mask[:, :, None], (b, self.n_classes, self.dim)
        ).astype(self.dtype)
        table = self.vectors * Tensor(1.0 - mask3) + pooled * Tensor(mask3)
        return (table @ phi_q.reshape(b, self.dim, 1)).reshape(b, self.n_classes)


class TransformerClassifier:
    """Causal transformer over [phi(x_1), lab(c_1), ..., phi(x_q)]."""

    def __init__(self, input_dim, n_classes, embed_dim=64, n_layers=12,
                 n_heads=8, enc_hidden=64, max_pairs=8, seed=0,
                 dtype=np.float32):
        self.input_dim = int(input_dim)
        self.n_classes = int(n_classes)
        self.max_pairs = int(max_pairs)
        self.dtype = np.dtype(dtype)
        self.encoder = SampleEncoder(
            input_dim, [enc_hidden], embed_dim, seed, "embed", dtype=dtype,
        )
        self.backbone = TransformerBackbone(
            embed_dim, n_layers, n_heads, 2 * self.max_pairs + 1, seed,
            "body", dtype=dtype,
        )
        self.params = {}
        self.params.update(self.encoder.params)
        self.params.update(self.backbone.params)
        self.params["lab"] = gaussian_param(
            (self.n_classes, embed_dim), seed, "lab", std=INIT_STD, dtype=dtype,
        )
        self.params["cls"] = gaussian_param(
            (self.n_classes, embed_dim), seed, "cls",
            std=float(embed_dim) ** -0.5, dtype=dtype,
        )

    def forward(self, xs, labels, xq, trace=None):
        xs = np.asarray(xs, dtype=self.dtype)
        labels = np.asarray(labels, dtype=np.int64)
        xq = np.asarray(xq, dtype=self.dtype)
        b, n, _ = xs.shape
        if n > self.max_pairs:
            raise ShapeError(
                f"episode has {n} pairs, model supports {self.max_pairs}"
            )
        phis = self.encoder(xs)                               # (B, N, E)
        labs = self.params["lab"].take(labels.reshape(-1))
        e = phis.shape[-1]
        labs = labs.reshape(b, n, e)
        woven = concat(
            [phis.reshape(b, n, 1, e), labs.reshape(b, n, 1, e)], axis=2
        ).reshape(b, 2 * n, e)
        phi_q = self.encoder(xq)                              # (B, E)
        seq = concat([woven, phi_q.reshape(b, 1, e)], axis=1)
        h = self.backbone(seq, trace=trace)
        logits = h[:, -1] @ self.params["cls"].transpose()
        if trace is not None:
            trace["query_logits"] = logits.data
        return logits

    def loss(self, xs, labels, xq, yq):
        logits = self.forward(xs, labels, xq)
        return cross_entropy(logits, np.asarray(yq, dtype=np.int64))

    def predict(self, xs, labels, xq):
        logits = self.forward(xs, labels, xq)
        return np.argmax(logits.data, axis=1)


class CoqeClassifier:
    """Separate context and query paths joined only at the class table.

    The query contributes phi(x_q) alone; the context runs through a
    task encoder whose outputs are mean-pooled per class into dynamic
    class vectors.  Both the modified and the static logits are trained,
    and scheduled noise on the modified logits (context classes only)
    keeps the static path honest.
    """

    def __init__(self, input_dim, n_classes, embed_dim=64, n_layers=4,
                 n_heads=8, enc_hidden=64, max_pairs=8, seed=0,
                 dtype=np.float32):
        self.input_dim = int(input_dim)
        self.n_classes = int(n_classes)
        self.max_pairs = int(max_pairs)
        self.dtype = np.dtype(dtype)
        self.embed_dim = int(embed_dim)
        self.encoder = SampleEncoder(
            input_dim, [enc_hidden], embed_dim, seed, "phi", dtype=dtype,
        )
        self.task_encoder = TransformerBackbone(
            embed_dim, n_layers, n_heads, self.max_pairs + 1, seed,
            "task", dtype=dtype,
        )
        self.table = ClassVectorTable(
            n_classes, embed_dim, seed, label="cls", dtype=dtype,
        )
        self.params = {}
        self.params.update(self.encoder.params)
        self.params.update(self.task_encoder.params)
        self.params["lab"] = gaussian_param(
            (self.n_classes, embed_dim), seed, "lab", std=INIT_STD, dtype=dtype,
        )
        self.params["pair.w"] = gaussian_param(
            (2 * embed_dim, embed_dim), seed, "pair.w", std=INIT_STD,
            dtype=dtype,
        )
        self.params["pair.b"] = zeros_param((embed_dim,), dtype=dtype)
        self.params["start"] = gaussian_param(
            (embed_dim,), seed, "start", std=INIT_STD, dtype=dtype,
        )
        self.params["omega.w"] = zeros_param(
            (embed_dim, embed_dim), dtype=dtype,
        )
        self.params["omega.b"] = zeros_param((embed_dim,), dtype=dtype)
        self.params["cls"] = self.table.vectors
        # with replacement off the modified stream degenerates to the
        # static one (bitwise), so both losses coincide
        self.replacement = True

    def encode_query(self, xq):
        return self.encoder(np.asarray(xq, dtype=self.dtype))

    def dynamic_vectors(self, xs, labels, trace=None):
        """Pooled per-class task vectors (B, n_classes, E) plus mask."""
        xs = np.asarray(xs, dtype=self.dtype)
        labels = np.asarray(labels, dtype=np.int64)
        b, n, _ = xs.shape
        if n > self.max_pairs:
            raise ShapeError(
                f"episode has {n} pairs, model supports {self.max_pairs}"
            )
        phis = self.encoder(xs)
        labs = self.params["lab"].take(labels.reshape(-1))
        labs = labs.reshape(b, n, self.embed_dim)
        pair = concat([phis, labs], axis=2)
        ptok = linear(pair, self.params["pair.w"], self.params["pair.b"])
        start = Tensor(np.zeros((b, 1, self.embed_dim), dtype=self.dtype))
        seq = concat([start + self.params["start"], ptok], axis=1)
        h = self.task_encoder(seq, trace=trace)
        proj = linear(h[:, 1:], self.params["omega.w"], self.params["omega.b"])
        pool, mask = self.table.pooling(labels)
        pooled = Tensor(pool) @ proj
        return pooled, mask

    def forward(self, xs, labels, xq, noise=None, trace=None):
        """Returns (modified logits, static logits), each (B, n_classes)."""
        task_trace = {} if trace is not None else None
        pooled, mask = self.dynamic_vectors(xs, labels, trace=task_trace)
        if not self.replacement:
            mask = np.zeros_like(mask)
        phi_q = self.encode_query(xq)
        logits_orig = self.table.static_logits(phi_q)
        logits_mod = self.table.modified_logits(phi_q, pooled, mask)
        if noise is not None:
            noise = np.asarray(noise, dtype=self.dtype)
            if noise.shape != logits_mod.shape:
                raise ShapeError(
                    f"noise shape {noise.shape} does not match logits "
                    f"{logits_mod.shape}"
                )
            logits_mod = logits_mod + Tensor(noise * mask)
        if trace is not None:
            trace["task"] = task_trace
            trace["phi_q"] = phi_q.data
            trace["dynamic"] = pooled.data
            trace["context_mask"] = mask
        return logits_mod, logits_orig

    def loss(self, xs, labels, xq, yq, noise=None):
        logits_mod, logits_orig = self.forward(xs, labels, xq, noise=noise)
        yq = np.asarray(yq, dtype=np.int64)
        return cross_entropy(logits_mod, yq) + cross_entropy(logits_orig, yq)

    def predict(self, xs, labels, xq):
        logits_mod, _ = self.forward(xs, labels, xq)
        return np.argmax(logits_mod.data, axis=1)
