"""Regression sequence models.

Both models consume a batch of prompts (xs, ys, optional distinct query)
and emit one scalar prediction per prefix: the prediction for x_i sees
pairs 1..i-1 only. Training minimizes the mean squared error over all
prefix predictions of an episode.

TransformerRegressor is the plain decoder baseline: x and y become separate
tokens (y widened to a d_x-vector in coordinate 0), both pass through one
shared MLP embedding, and predictions are read off the x-token positions by
a zero-initialized linear head.

CoqeRegressor splits the pathways: a sample encoder phi maps single inputs
to d-dim representations; context pairs (phi(x_i), y_i) are projected to
task-encoder tokens; the task encoder (with a learned start token, so the
empty prefix is defined) emits a task vector omega per prefix; the
prediction is the inner product <omega, phi(x)>. The query never enters the
task encoder and phi never sees context.
"""

import numpy as np

from ..layers import SampleEncoder, TransformerBackbone, linear, zeros_param, gaussian_param
from ..tensor import ShapeError, Tensor, concat, dot_last, mse_loss


def _interleave_tokens(xs, ys, xq=None):
    """(B,k,d), (B,k) [, (B,d)] -> (B, 2k(+1), d) numpy token block."""
    B, k, d = xs.shape
    extra = 0 if xq is None else 1
    toks = np.zeros((B, 2 * k + extra, d), dtype=xs.dtype)
    toks[:, 0:2 * k:2] = xs
    toks[:, 1:2 * k:2, 0] = ys
    if xq is not None:
        toks[:, -1] = xq
    return toks


class TransformerRegressor:
    def __init__(self, input_dim, embed_dim=64, n_layers=3, n_heads=2,
                 enc_hidden=64, max_pairs=16, seed=0, dtype=np.float32):
        self.input_dim = input_dim
        self.max_pairs = max_pairs
        self.dtype = dtype
        self.encoder = SampleEncoder(input_dim, [enc_hidden], embed_dim,
                                     seed, "embed", dtype=dtype)
        self.backbone = TransformerBackbone(embed_dim, n_layers, n_heads,
                                            2 * max_pairs + 1, seed, "body",
                                            dtype=dtype)
        self.params = {}
        self.params.update(self.encoder.params)
        self.params.update(self.backbone.params)
        self.params["head.w"] = zeros_param((embed_dim, 1), dtype=dtype)
        self.params["head.b"] = zeros_param((1,), dtype=dtype)

    def forward(self, xs, ys, xq=None):
        """Predictions at every x position: (B, k) or (B, k+1) with a query."""
        xs = np.asarray(xs, dtype=self.dtype)
        ys = np.asarray(ys, dtype=self.dtype)
        if xs.ndim != 3 or xs.shape[-1] != self.input_dim:
            raise ShapeError(f"expected xs of shape (B, k, {self.input_dim})")
        if xs.shape[1] > self.max_pairs:
            raise ShapeError(
                f"episode has {xs.shape[1]} pairs, model supports {self.max_pairs}"
            )
        toks = _interleave_tokens(
            xs, ys, None if xq is None else np.asarray(xq, dtype=self.dtype)
        )
        h = self.encoder(Tensor(toks))
        h = self.backbone(h)
        preds = linear(h, self.params["head.w"], self.params["head.b"])
        return preds[:, ::2, 0]

    def loss(self, xs, ys):
        preds = self.forward(xs, ys)
        return mse_loss(preds, np.asarray(ys, dtype=self.dtype))

    def predict_query(self, xs, ys, xq):
        """Numpy query predictions for j-pair contexts (j may be 0)."""
        B = np.asarray(xq).shape[0]
        xs = np.asarray(xs, dtype=self.dtype).reshape(B, -1, self.input_dim)
        preds = self.forward(xs, np.asarray(ys, dtype=self.dtype).reshape(B, -1),
                             xq)
        return preds.data[:, -1]


class CoqeRegressor:
    def __init__(self, input_dim, sample_dim=64, enc_hidden=64,
                 task_embed=64, task_layers=3, task_heads=2,
                 max_pairs=16, seed=0, dtype=np.float32):
        self.input_dim = input_dim
        self.sample_dim = sample_dim
        self.max_pairs = max_pairs
        self.dtype = dtype
        self.encoder = SampleEncoder(input_dim, [enc_hidden], sample_dim,
                                     seed, "phi", dtype=dtype)
        self.task_encoder = TransformerBackbone(task_embed, task_layers,
                                                task_heads, max_pairs + 1,
                                                seed, "task", dtype=dtype)
        self.params = {}
        self.params.update(self.encoder.params)
        self.params.update(self.task_encoder.params)
        self.params["pair.w"] = gaussian_param((sample_dim + 1, task_embed),
                                               seed, "pair.w", dtype=dtype)
        self.params["pair.b"] = zeros_param((task_embed,), dtype=dtype)
        self.params["start"] = gaussian_param((task_embed,), seed, "start",
                                              dtype=dtype)
        self.params["omega.w"] = zeros_param((task_embed, sample_dim), dtype=dtype)
        self.params["omega.b"] = zeros_param((sample_dim,), dtype=dtype)

    def encode_samples(self, x):
        """phi on a (B, d_x) or (B, k, d_x) block; context-free by design."""
        return self.encoder(Tensor(np.asarray(x, dtype=self.dtype)))

    def _omega_from_phis(self, phis, ys):
        """omega per prefix: (B, k+1, d); omega[:, j] saw exactly j pairs."""
        B, k = ys.shape
        if k > self.max_pairs:
            raise ShapeError(
                f"episode has {k} pairs, model supports {self.max_pairs}"
            )
        pair = concat([phis, Tensor(ys[:, :, None])], axis=2)  # (B, k, d+1)
        ptok = linear(pair, self.params["pair.w"], self.params["pair.b"])
        start = Tensor(np.zeros((B, 1, ptok.shape[-1]), dtype=self.dtype))
        seq = concat([start + self.params["start"], ptok], axis=1)
        h = self.task_encoder(seq)                            # (B, k+1, E)
        return linear(h, self.params["omega.w"], self.params["omega.b"])

    def task_vectors(self, xs, ys):
        xs = np.asarray(xs, dtype=self.dtype)
        ys = np.asarray(ys, dtype=self.dtype)
        return self._omega_from_phis(self.encode_samples(xs), ys)

    def forward(self, xs, ys, xq=None):
        """Prefix predictions <omega_{i-1}, phi(x_i)>, plus the query slot."""
        xs = np.asarray(xs, dtype=self.dtype)
        ys = np.asarray(ys, dtype=self.dtype)
        phis = self.encode_samples(xs)
        omega = self._omega_from_phis(phis, ys)
        k = phis.shape[1]
        preds = dot_last(omega[:, :k], phis)                  # (B, k)
        if xq is None:
            return preds
        phi_q = self.encode_samples(xq)                       # (B, d)
        yq = dot_last(omega[:, k], phi_q)                     # (B,)
        return concat([preds, yq.reshape(-1, 1)], axis=1)

    def loss(self, xs, ys):
        preds = self.forward(xs, ys)
        return mse_loss(preds, np.asarray(ys, dtype=self.dtype))

    def predict_query(self, xs, ys, xq):
        xq = np.asarray(xq, dtype=self.dtype)
        B = xq.shape[0]
        xs = np.asarray(xs, dtype=self.dtype).reshape(B, -1, self.input_dim)
        ys = np.asarray(ys, dtype=self.dtype).reshape(B, -1)
        if xs.shape[1] == 0:
            omega = self.task_vectors(
                np.zeros((B, 0, self.input_dim), dtype=self.dtype),
                np.zeros((B, 0), dtype=self.dtype),
            )
        else:
            omega = self.task_vectors(xs, ys)
        phi_q = self.encode_samples(xq)
        return dot_last(omega[:, xs.shape[1]], phi_q).data
