"""Pseudo-arithmetic episode generator.

Train split: three distinct numeric conditions "a + b = c ." with true
sums, and the question repeats one of them, so the answer is available
both by computing and by copying.  The icl-eval split swaps one
condition for a made-up letter fact ("_ _ g + _ _ r = 042 .") whose
result is drawn at random and never equals a numeric condition's sum;
the question asks about the letter pair, so only copying works.
"""

import string

import numpy as np

from .. import rng
from ..models.arithmetic import N_ANSWERS, N_CONDITIONS, build_tokens

MAX_OPERAND = 99
SPLITS = ("train", "icl-eval")


def _distinct_pairs(g, count, high):
    """count distinct ordered operand pairs drawn uniformly."""
    pairs = []
    seen = set()
    while len(pairs) < count:
        a, b = int(g.integers(0, high + 1)), int(g.integers(0, high + 1))
        if (a, b) not in seen:
            seen.add((a, b))
            pairs.append((a, b))
    return pairs


def _letter_pair(g):
    i, j = g.permutation(len(string.ascii_lowercase))[:2]
    return string.ascii_lowercase[i], string.ascii_lowercase[j]


def gen_arithmetic(split, count, seed, step=0):
    """Episode batch: tokens (count, 46), answers, condition results."""
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    g = rng.stream(seed, f"arithmetic/{split}", step)
    tokens = np.empty((count, 46), dtype=np.int64)
    answers = np.empty(count, dtype=np.int64)
    results = np.empty((count, N_CONDITIONS), dtype=np.int64)
    for i in range(count):
        if split == "train":
            pairs = _distinct_pairs(g, N_CONDITIONS, MAX_OPERAND)
            conditions = [(a, b, a + b) for a, b in pairs]
            query_at = int(g.integers(0, N_CONDITIONS))
            a, b, c = conditions[query_at]
            query = (a, b)
            answer = c
        else:
            pairs = _distinct_pairs(g, N_CONDITIONS - 1, MAX_OPERAND)
            numeric = [(a, b, a + b) for a, b in pairs]
            numeric_sums = {c for _, _, c in numeric}
            made_up = int(g.integers(0, N_ANSWERS))
            while made_up in numeric_sums:
                made_up = int(g.integers(0, N_ANSWERS))
            la, lb = _letter_pair(g)
            conditions = numeric + [(la, lb, made_up)]
            order = g.permutation(N_CONDITIONS)
            conditions = [conditions[j] for j in order]
            query = (la, lb)
            answer = made_up
        tokens[i] = build_tokens(conditions, query)
        answers[i] = answer
        results[i] = [c for _, _, c in conditions]
    return {
        "split": split,
        "tokens": tokens,
        "answers": answers,
        "results": results,
        "seed": int(seed),
        "step": int(step),
    }
