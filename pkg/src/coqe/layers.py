"""Shared neural building blocks: parameter initialization, the per-sample
MLP encoder, standalone attention sublayers, and the decoder-only
transformer backbone used by every sequence model.

Initialization convention: weight matrices and embedding tables N(0, 0.02^2),
biases and read heads zero, per-class vectors N(0, 1/d). Attention masks are
additive with a large negative constant; masked positions underflow to an
exact 0 after the max-subtracted softmax, which is what makes the causality
and field-mask probes bitwise.
"""

import numpy as np

from . import rng
from .tensor import ShapeError, Tensor, concat, layer_norm

MASK_NEG = -1e9
INIT_STD = 0.02


def gaussian_param(shape, seed, label, std=INIT_STD, dtype=np.float32):
    data = rng.stream(seed, f"init/{label}").standard_normal(shape) * std
    return Tensor(np.ascontiguousarray(data, dtype=dtype), requires_grad=True)


def zeros_param(shape, dtype=np.float32):
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)


def ones_param(shape, dtype=np.float32):
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=True)


def causal_mask(length, dtype=np.float32):
    """Additive mask: 0 on and below the diagonal, MASK_NEG above."""
    m = np.zeros((length, length), dtype=dtype)
    m[np.triu_indices(length, k=1)] = MASK_NEG
    return m


def linear(x, w, b=None):
    out = x @ w
    if b is not None:
        out = out + b
    return out


class SampleEncoder:
    """Context-free per-sample MLP phi.

    Layout for hidden dims [h1, .., h_{k-1}] and output dim d:
    Linear -> ReLU -> LayerNorm repeated per hidden dim, then a final
    Linear. Depth 2 gives the regression encoder (linear, ReLU, LayerNorm,
    linear); depth 3 the vector-class encoder.
    """

    def __init__(self, input_dim, hidden_dims, output_dim, seed, prefix,
                 dtype=np.float32, eps=1e-5):
        self.input_dim = input_dim
        self.output_dim = output_dim
        self.dtype = np.dtype(dtype)
        self.eps = eps
        self.params = {}
        dims = [input_dim] + list(hidden_dims) + [output_dim]
        self.n_layers = len(dims) - 1
        for i in range(self.n_layers):
            w = gaussian_param((dims[i], dims[i + 1]), seed, f"{prefix}.l{i}.w",
                               dtype=dtype)
            b = zeros_param((dims[i + 1],), dtype=dtype)
            self.params[f"{prefix}.l{i}.w"] = w
            self.params[f"{prefix}.l{i}.b"] = b
            if i < self.n_layers - 1:
                self.params[f"{prefix}.ln{i}.g"] = ones_param((dims[i + 1],), dtype=dtype)
                self.params[f"{prefix}.ln{i}.b"] = zeros_param((dims[i + 1],), dtype=dtype)
        self.prefix = prefix

    def __call__(self, x):
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=self.dtype))
        if x.shape[-1] != self.input_dim:
            raise ShapeError(
                f"sample encoder expects last axis {self.input_dim}, got {x.shape}"
            )
        h = x
        for i in range(self.n_layers):
            h = linear(h, self.params[f"{self.prefix}.l{i}.w"],
                       self.params[f"{self.prefix}.l{i}.b"])
            if i < self.n_layers - 1:
                h = h.relu()
                h = layer_norm(h, self.params[f"{self.prefix}.ln{i}.g"],
                               self.params[f"{self.prefix}.ln{i}.b"], eps=self.eps)
        return h


def softmax_attention(weights, z, mask=None):
    """Single-head attention sublayer in the column convention.

    z is (E, L) with one column per token; returns
    z + W_O V softmax(K^T Q / sqrt(d_k)) where Q = W_Q z etc. and the
    softmax normalizes each column (over keys, per query).
    """
    wq, wk, wv, wo = weights["wq"], weights["wk"], weights["wv"], weights["wo"]
    if z.ndim != 2 or wq.shape[1] != z.shape[0]:
        raise ShapeError(f"softmax_attention: bad token matrix shape {z.shape}")
    dk = wq.shape[0]
    zr = z.transpose()                      # (L, E) rows are tokens
    q = zr @ wq.transpose()                 # (L, dk)
    k = zr @ wk.transpose()
    v = zr @ wv.transpose()
    scores = (q @ k.transpose()) * (1.0 / float(np.sqrt(dk)))
    if mask is not None:
        if mask.shape != scores.shape:
            raise ShapeError(
                f"softmax_attention: mask shape {mask.shape} does not match "
                f"scores {scores.shape}"
            )
        scores = scores + Tensor(np.asarray(mask, dtype=z.dtype.type))
    attn = scores.softmax(axis=-1)
    out = zr + (attn @ v) @ wo.transpose()
    return out.transpose()


class TransformerBackbone:
    """Pre-LN decoder-only transformer over already-embedded tokens.

    Adds learned absolute positions, then L blocks of
    x += attn(ln1(x)); x += mlp(ln2(x)); and a final LayerNorm.
    """

    def __init__(self, embed_dim, n_layers, n_heads, max_len, seed, prefix,
                 ff_mult=4, dtype=np.float32, eps=1e-5):
        if embed_dim % n_heads:
            raise ShapeError(
                f"embed dim {embed_dim} not divisible by {n_heads} heads"
            )
        if n_layers < 1:
            raise ShapeError("backbone needs at least one layer")
        self.embed_dim = embed_dim
        self.n_layers = n_layers
        self.n_heads = n_heads
        self.head_dim = embed_dim // n_heads
        self.max_len = max_len
        self.eps = eps
        self.prefix = prefix
        self.params = {}
        p = self.params
        E, F = embed_dim, embed_dim * ff_mult
        p[f"{prefix}.wpe"] = gaussian_param((max_len, E), seed, f"{prefix}.wpe",
                                            dtype=dtype)
        for i in range(n_layers):
            lp = f"{prefix}.h{i}"
            p[f"{lp}.ln1.g"] = ones_param((E,), dtype=dtype)
            p[f"{lp}.ln1.b"] = zeros_param((E,), dtype=dtype)
            for nm in ("wq", "wk", "wv", "wo"):
                p[f"{lp}.attn.{nm}"] = gaussian_param((E, E), seed,
                                                      f"{lp}.attn.{nm}", dtype=dtype)
                p[f"{lp}.attn.{nm}b"] = zeros_param((E,), dtype=dtype)
            p[f"{lp}.ln2.g"] = ones_param((E,), dtype=dtype)
            p[f"{lp}.ln2.b"] = zeros_param((E,), dtype=dtype)
            p[f"{lp}.mlp.w1"] = gaussian_param((E, F), seed, f"{lp}.mlp.w1",
                                               dtype=dtype)
            p[f"{lp}.mlp.b1"] = zeros_param((F,), dtype=dtype)
            p[f"{lp}.mlp.w2"] = gaussian_param((F, E), seed, f"{lp}.mlp.w2",
                                               dtype=dtype)
            p[f"{lp}.mlp.b2"] = zeros_param((E,), dtype=dtype)
        p[f"{prefix}.lnf.g"] = ones_param((E,), dtype=dtype)
        p[f"{prefix}.lnf.b"] = zeros_param((E,), dtype=dtype)

    def _ln(self, x, tag):
        return layer_norm(x, self.params[f"{tag}.g"], self.params[f"{tag}.b"],
                          eps=self.eps)

    def _attention(self, x, mask, layer_idx, trace):
        B, L, E = x.shape
        H, D = self.n_heads, self.head_dim
        lp = f"{self.prefix}.h{layer_idx}.attn"
        p = self.params

        def heads(name):
            t = linear(x, p[f"{lp}.{name}"], p[f"{lp}.{name}b"])
            return t.reshape(B, L, H, D).transpose(0, 2, 1, 3)  # (B,H,L,D)

        q, k, v = heads("wq"), heads("wk"), heads("wv")
        scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / float(np.sqrt(D)))
        scores = scores + Tensor(mask)
        attn = scores.softmax(axis=-1)
        if trace is not None:
            trace.setdefault("attention", []).append(attn.data.copy())
        mixed = (attn @ v).transpose(0, 2, 1, 3).reshape(B, L, E)
        return linear(mixed, p[f"{lp}.wo"], p[f"{lp}.wob"])

    def __call__(self, x, extra_mask=None, trace=None):
        """x: (B, L, E) embedded tokens; extra_mask: additive (L, L) or None."""
        B, L, E = x.shape
        if L > self.max_len:
            raise ShapeError(
                f"sequence length {L} exceeds backbone max {self.max_len}"
            )
        dtype = x.dtype.type
        mask = causal_mask(L, dtype=dtype)
        if extra_mask is not None:
            mask = mask + np.asarray(extra_mask, dtype=dtype)
        pos = self.params[f"{self.prefix}.wpe"][:L]
        h = x + pos
        for i in range(self.n_layers):
            lp = f"{self.prefix}.h{i}"
            h = h + self._attention(self._ln(h, f"{lp}.ln1"), mask, i, trace)
            m = linear(self._ln(h, f"{lp}.ln2"),
                       self.params[f"{lp}.mlp.w1"], self.params[f"{lp}.mlp.b1"])
            m = m.relu()
            h = h + linear(m, self.params[f"{lp}.mlp.w2"], self.params[f"{lp}.mlp.b2"])
            if trace is not None:
                trace.setdefault("hidden", []).append(h.data.copy())
        h = self._ln(h, f"{self.prefix}.lnf")
        if trace is not None:
            trace["final"] = h.data.copy()
        return h
