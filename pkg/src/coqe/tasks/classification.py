"""Bursty/Zipfian few-shot classification episodes over vector classes.

The dataset is a fixed table of N classes x m exemplar vectors standing
in for an image corpus.  Class ids double as Zipf frequency ranks (id 0
is the most common); the training label of a class is a fixed seeded
permutation of the ids, so labels carry no rank information.
"""

import numpy as np

from .. import rng

N_CONTEXT = 8
BURSTY_QUERY_COUNT = 3
BURSTY_DISTRACTOR_COUNT = 3


class VectorClassDataset:
    """N classes x m exemplars of dim d_x around Gaussian prototypes."""

    def __init__(self, n_classes, n_exemplars, dim, noise_scale, seed):
        if min(n_classes, n_exemplars, dim) < 1:
            raise ValueError("n_classes, n_exemplars, dim must all be >= 1")
        self.n_classes = int(n_classes)
        self.n_exemplars = int(n_exemplars)
        self.dim = int(dim)
        self.noise_scale = float(noise_scale)
        self.seed = int(seed)
        self.prototypes = rng.stream(seed, "classes/prototypes").normal(
            size=(self.n_classes, self.dim)
        )
        noise = rng.stream(seed, "classes/exemplars").normal(
            size=(self.n_classes, self.n_exemplars, self.dim)
        )
        self.exemplars = self.prototypes[:, None, :] + self.noise_scale * noise
        self.labels = rng.stream(seed, "classes/labels").permutation(
            self.n_classes
        )

    def sample_vectors(self, classes, exemplar_idx):
        return self.exemplars[classes, exemplar_idx]


def make_vector_classes(n_classes, n_exemplars, dim, noise_scale, seed):
    return VectorClassDataset(n_classes, n_exemplars, dim, noise_scale, seed)


def zipf_probs(n, alpha):
    """p(rank r) proportional to 1/r^alpha for ranks 1..n, normalized."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if alpha < 0:
        raise ValueError(f"need alpha >= 0, got {alpha}")
    weights = np.arange(1, n + 1, dtype=np.float64) ** -float(alpha)
    return weights / weights.sum()


def zipf_sample(n, alpha, seed, size=1, step=0, label="zipf"):
    g = rng.stream(seed, label, step)
    return g.choice(n, size=size, p=zipf_probs(n, alpha))


def _zipf_draw(g, probs, size):
    return g.choice(len(probs), size=size, p=probs)


def _redraw_excluded(g, probs, draws, *excluded):
    """Resample entries colliding with any excluded array until none do."""
    draws = draws.copy()
    bad = np.zeros(draws.shape, dtype=bool)
    for other in excluded:
        bad |= draws == other
    while bad.any():
        draws[bad] = _zipf_draw(g, probs, int(bad.sum()))
        bad = np.zeros(draws.shape, dtype=bool)
        for other in excluded:
            bad |= draws == other
    return draws


def build_class_episodes(dataset, kind, batch, seed, step=0, p_bursty=0.9,
                         alpha=0.0, relabel=False):
    """Episode batch of one kind: train | icl-eval | iwl-eval.

    train: bursty with probability p_bursty (3 query-class + 3
    distractor-class + 2 filler pairs, shuffled), else 8 i.i.d. Zipfian
    pairs; labels are the fixed training labels.  With relabel=True each
    train episode instead draws a fresh class -> label-slot permutation,
    so labels carry no class identity across episodes and only reading
    the context can resolve the query; eval kinds ignore the flag.
    icl-eval: two classes with four exemplars each, relabelled 0/1 at
    random; chance is 50%.  iwl-eval: the query's class never appears in
    context and every label is the training label.

    Returns xs (B, 8, d), labels (B, 8), xq (B, d), yq (B,) plus the
    class bookkeeping used by the representation probes.
    """
    if kind not in ("train", "icl-eval", "iwl-eval"):
        raise ValueError(f"unknown episode kind {kind!r}")
    n = dataset.n_classes
    if n < 3:
        raise ValueError(f"need at least 3 classes, got {n}")
    g = rng.stream(seed, f"episodes/{kind}", step)
    probs = zipf_probs(n, alpha)
    if kind == "train":
        bursty = g.random(size=batch) < p_bursty
        q = _zipf_draw(g, probs, batch)
        distractor = _redraw_excluded(g, probs, _zipf_draw(g, probs, batch), q)
        fillers = _redraw_excluded(
            g, probs, _zipf_draw(g, probs, (batch, 2)),
            q[:, None], distractor[:, None],
        )
        bursty_ctx = np.concatenate(
            [
                np.repeat(q[:, None], BURSTY_QUERY_COUNT, axis=1),
                np.repeat(distractor[:, None], BURSTY_DISTRACTOR_COUNT, axis=1),
                fillers,
            ],
            axis=1,
        )
        bursty_ctx = g.permuted(bursty_ctx, axis=1)
        iid_ctx = _zipf_draw(g, probs, (batch, N_CONTEXT))
        iid_q = _zipf_draw(g, probs, batch)
        ctx_classes = np.where(bursty[:, None], bursty_ctx, iid_ctx)
        query_class = np.where(bursty, q, iid_q)
        if relabel:
            # separate stream so the class/exemplar draws stay identical
            # to the fixed-label protocol
            gr = rng.stream(seed, "episodes/train/relabel", step)
            perms = np.argsort(gr.random(size=(batch, n)), axis=1)
            ctx_labels = np.take_along_axis(perms, ctx_classes, axis=1)
            yq = perms[np.arange(batch), query_class]
        else:
            ctx_labels = dataset.labels[ctx_classes]
            yq = dataset.labels[query_class]
    elif kind == "icl-eval":
        pair = np.stack(
            [g.permutation(n)[:2] for _ in range(batch)], axis=0
        )
        flip = g.integers(0, 2, size=batch)
        ctx_classes = np.repeat(pair, N_CONTEXT // 2, axis=1)  # c0 x4, c1 x4
        ctx_labels = np.repeat(
            np.stack([flip, 1 - flip], axis=1), N_CONTEXT // 2, axis=1
        )
        order = np.argsort(g.random(size=(batch, N_CONTEXT)), axis=1)
        ctx_classes = np.take_along_axis(ctx_classes, order, axis=1)
        ctx_labels = np.take_along_axis(ctx_labels, order, axis=1)
        side = g.integers(0, 2, size=batch)
        query_class = pair[np.arange(batch), side]
        yq = np.where(side == 0, flip, 1 - flip)
    else:
        query_class = _zipf_draw(g, probs, batch)
        ctx_classes = _redraw_excluded(
            g, probs, _zipf_draw(g, probs, (batch, N_CONTEXT)),
            query_class[:, None],
        )
        ctx_labels = dataset.labels[ctx_classes]
        yq = dataset.labels[query_class]
    ctx_idx = g.integers(0, dataset.n_exemplars, size=(batch, N_CONTEXT))
    q_idx = g.integers(0, dataset.n_exemplars, size=batch)
    return {
        "kind": kind,
        "xs": dataset.sample_vectors(ctx_classes, ctx_idx),
        "labels": ctx_labels.astype(np.int64),
        "xq": dataset.sample_vectors(query_class, q_idx),
        "yq": yq.astype(np.int64),
        "ctx_classes": ctx_classes,
        "query_class": query_class,
        "seed": int(seed),
        "step": int(step),
    }


def build_probe_episodes(dataset, query_class, condition, batch, seed, step=0):
    """Representation-probe episodes for one query class and condition.

    condition "label-0"/"label-1": four query-class exemplars sit in the
    context carrying that label, four exemplars of one other class carry
    the opposite label.  condition "absent": the two context classes are
    both different from the query class, labelled 0/1 at random.
    """
    if condition not in ("label-0", "label-1", "absent"):
        raise ValueError(f"unknown probe condition {condition!r}")
    n = dataset.n_classes
    if n < 3:
        raise ValueError(f"need at least 3 classes, got {n}")
    g = rng.stream(seed, f"probe/{condition}/{query_class}", step)
    query_class = int(query_class)
    others = np.asarray([c for c in range(n) if c != query_class])
    if condition == "absent":
        pick = np.stack(
            [g.permutation(len(others))[:2] for _ in range(batch)], axis=0
        )
        pair = others[pick]
        flip = g.integers(0, 2, size=batch)
        labels01 = np.stack([flip, 1 - flip], axis=1)
    else:
        own_label = 0 if condition == "label-0" else 1
        other = others[g.integers(0, len(others), size=batch)]
        pair = np.stack(
            [np.full(batch, query_class), other], axis=1
        )
        labels01 = np.stack(
            [np.full(batch, own_label), np.full(batch, 1 - own_label)], axis=1
        )
    ctx_classes = np.repeat(pair, N_CONTEXT // 2, axis=1)
    ctx_labels = np.repeat(labels01, N_CONTEXT // 2, axis=1)
    order = np.argsort(g.random(size=(batch, N_CONTEXT)), axis=1)
    ctx_classes = np.take_along_axis(ctx_classes, order, axis=1)
    ctx_labels = np.take_along_axis(ctx_labels, order, axis=1)
    ctx_idx = g.integers(0, dataset.n_exemplars, size=(batch, N_CONTEXT))
    q_idx = g.integers(0, dataset.n_exemplars, size=batch)
    qc = np.full(batch, query_class)
    return {
        "kind": "probe",
        "condition": condition,
        "xs": dataset.sample_vectors(ctx_classes, ctx_idx),
        "labels": ctx_labels.astype(np.int64),
        "xq": dataset.sample_vectors(qc, q_idx),
        "yq": dataset.labels[qc].astype(np.int64),
        "ctx_classes": ctx_classes,
        "query_class": qc,
        "seed": int(seed),
        "step": int(step),
    }
