"""Sequence model for in-context arithmetic episodes.

Every episode is one fixed 46-token string: a condition block holding
three "a + b = c ." facts, then a question "a + b", then an answer slot.
Operands are three tokens wide: numbers are zero-padded digit triples,
made-up symbolic operands are a single letter padded with '_'.  Results
are always digit triples, and the answer is a 199-way classification
(all sums of two operands in [0, 99]).

The masked variant severs attention from question rows to condition
columns, reads the query representation at the last question token, and
answers through a class-vector table whose in-context classes (the three
condition results) are replaced by pooled condition representations.
"""

import string

import numpy as np

from ..layers import (
    INIT_STD,
    MASK_NEG,
    TransformerBackbone,
    gaussian_param,
    linear,
    zeros_param,
)
from ..tensor import ShapeError, cross_entropy, Tensor
from .classification import ClassVectorTable

_TOKENS = (
    [str(d) for d in range(10)]
    + list(string.ascii_lowercase)
    + ["+", "=", ".", "_", "[C]", "[Q]", "[A]"]
)
VOCAB = {tok: idx for idx, tok in enumerate(_TOKENS)}
N_VOCAB = len(VOCAB)
N_ANSWERS = 199          # sums of two operands in [0, 99]
N_CONDITIONS = 3
SEQ_LEN = 46             # [C] + 3 * 12 + [Q] + 7 + [A]
COND_BLOCK_LEN = 12      # a a a + b b b = c c c .
COND_RESULT_POS = (11, 23, 35)
QUESTION_POS = 37        # [Q] tag
QUERY_LAST_POS = 44      # final digit of the question's second operand
READOUT_POS = 45         # [A] tag


def encode_operand(value):
    """Three token ids: zero-padded digits for ints, '_ _ x' for letters."""
    if isinstance(value, (int, np.integer)):
        if not 0 <= value <= 999:
            raise ValueError(f"operand {value} out of range [0, 999]")
        return [VOCAB[c] for c in f"{int(value):03d}"]
    value = str(value)
    if len(value) != 1 or value not in string.ascii_lowercase:
        raise ValueError(f"symbolic operand must be one letter, got {value!r}")
    return [VOCAB["_"], VOCAB["_"], VOCAB[value]]


def build_tokens(conditions, query):
    """Token ids (SEQ_LEN,) for three (a, b, result) facts and a query pair."""
    if len(conditions) != N_CONDITIONS:
        raise ValueError(f"expected {N_CONDITIONS} conditions, got {len(conditions)}")
    ids = [VOCAB["[C]"]]
    for a, b, result in conditions:
        if not 0 <= result < N_ANSWERS:
            raise ValueError(f"result {result} out of range [0, {N_ANSWERS})")
        ids += encode_operand(a) + [VOCAB["+"]] + encode_operand(b)
        ids += [VOCAB["="]] + encode_operand(int(result)) + [VOCAB["."]]
    qa, qb = query
    ids += [VOCAB["[Q]"]] + encode_operand(qa) + [VOCAB["+"]] + encode_operand(qb)
    ids += [VOCAB["[A]"]]
    assert len(ids) == SEQ_LEN
    return np.asarray(ids, dtype=np.int64)


def _question_block_mask(dtype):
    """Additive mask hiding condition columns from question/answer rows."""
    mask = np.zeros((SEQ_LEN, SEQ_LEN), dtype=dtype)
    mask[QUESTION_POS:, :QUESTION_POS] = MASK_NEG
    return mask


class ArithmeticLM:
    """Transformer over arithmetic episodes with a 199-way answer head.

    masked=False: plain causal attention, answer logits read at the
    answer slot against a static class table.  masked=True: question
    rows cannot see the conditions, the query representation is read at
    the last question token, and condition-result classes answer through
    dynamically pooled condition representations instead of their static
    vectors.
    """

    def __init__(self, embed_dim=64, n_layers=4, n_heads=8, seed=0,
                 masked=False, dtype=np.float32):
        self.embed_dim = int(embed_dim)
        self.masked = bool(masked)
        self.dtype = np.dtype(dtype)
        self.backbone = TransformerBackbone(
            embed_dim, n_layers, n_heads, SEQ_LEN, seed, "body", dtype=dtype,
        )
        self.table = ClassVectorTable(
            N_ANSWERS, embed_dim, seed, label="cls", dtype=dtype,
        )
        self.params = {}
        self.params.update(self.backbone.params)
        self.params["tok"] = gaussian_param(
            (N_VOCAB, embed_dim), seed, "tok", std=INIT_STD, dtype=dtype,
        )
        self.params["cls"] = self.table.vectors
        if self.masked:
            self.params["omega.w"] = zeros_param(
                (embed_dim, embed_dim), dtype=dtype,
            )
            self.params["omega.b"] = zeros_param((embed_dim,), dtype=dtype)
            self._extra_mask = _question_block_mask(self.dtype)
        else:
            self._extra_mask = None

    def forward(self, tokens, results=None, trace=None):
        """Answer logits (B, N_ANSWERS).

        results: (B, 3) condition-result values; required when masked.
        """
        tokens = np.asarray(tokens, dtype=np.int64)
        if tokens.ndim != 2 or tokens.shape[1] != SEQ_LEN:
            raise ShapeError(f"expected (B, {SEQ_LEN}) tokens, got {tokens.shape}")
        if tokens.min() < 0 or tokens.max() >= N_VOCAB:
            raise ValueError("token id out of vocabulary range")
        b = tokens.shape[0]
        emb = self.params["tok"].take(tokens.reshape(-1))
        emb = emb.reshape(b, SEQ_LEN, self.embed_dim)
        h = self.backbone(emb, extra_mask=self._extra_mask, trace=trace)
        if not self.masked:
            logits = h[:, READOUT_POS] @ self.params["cls"].transpose()
            if trace is not None:
                trace["query_logits"] = logits.data
            return logits
        if results is None:
            raise ValueError("masked model needs per-episode condition results")
        results = np.asarray(results, dtype=np.int64)
        if results.shape != (b, N_CONDITIONS):
            raise ShapeError(
                f"expected ({b}, {N_CONDITIONS}) results, got {results.shape}"
            )
        q_rep = h[:, QUERY_LAST_POS]
        cond = h[:, list(COND_RESULT_POS)]                    # (B, 3, E)
        proj = linear(cond, self.params["omega.w"], self.params["omega.b"])
        pool, mask = self.table.pooling(results)
        pooled = Tensor(pool) @ proj
        logits = self.table.modified_logits(q_rep, pooled, mask)
        if trace is not None:
            trace["query_logits"] = logits.data
            trace["context_mask"] = mask
        return logits

    def loss(self, tokens, answers, results=None):
        logits = self.forward(tokens, results=results)
        return cross_entropy(logits, np.asarray(answers, dtype=np.int64))

    def predict(self, tokens, results=None):
        logits = self.forward(tokens, results=results)
        return np.argmax(logits.data, axis=1)
