"""Evaluation metrics, representation probes, and the two theory checks.

Silhouettes quantify how well query representations cluster by context
label (CSC) versus by object class (SSC).  span_rank checks that a
trained sample encoder spans its feature space; entanglement_demo shows
the logistic family defeats any fixed finite-rank bilinear split.
"""

import numpy as np

from .tensor import no_grad

CONDITIONS = ("label-0", "label-1", "absent")


def _pairwise_dist(points):
    sq = np.sum(points ** 2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * points @ points.T
    return np.sqrt(np.maximum(d2, 0.0))


def silhouette(points, assignment):
    """Per-point silhouette s = (b - a)/max(a, b) and its mean.

    a is the mean distance to the point's own cluster (excluding
    itself), b the smallest mean distance to another cluster.  Points in
    singleton clusters score 0, as does the 0/0 case.
    """
    points = np.asarray(points, dtype=np.float64)
    assignment = np.asarray(assignment)
    if points.ndim != 2 or assignment.shape != (points.shape[0],):
        raise ValueError(
            f"expected points (M, D) with (M,) assignment, got "
            f"{points.shape} / {assignment.shape}"
        )
    clusters = np.unique(assignment)
    if len(clusters) < 2:
        raise ValueError("silhouette needs at least 2 clusters")
    dist = _pairwise_dist(points)
    m = points.shape[0]
    scores = np.zeros(m)
    members = {c: np.flatnonzero(assignment == c) for c in clusters}
    for i in range(m):
        own = members[assignment[i]]
        if len(own) < 2:
            continue                          # singleton convention: 0
        a = dist[i, own].sum() / (len(own) - 1)
        b = min(
            dist[i, members[c]].mean() for c in clusters if c != assignment[i]
        )
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return scores, float(scores.mean())


class LabeledEmbeddingSet:
    """Query representations with object classes and context conditions."""

    def __init__(self, vectors, classes, conditions, source=None):
        self.vectors = np.asarray(vectors, dtype=np.float64)
        self.classes = np.asarray(classes)
        self.conditions = np.asarray(conditions)
        self.source = dict(source or {})
        if self.vectors.ndim != 2:
            raise ValueError(f"expected (M, D) vectors, got {self.vectors.shape}")
        m = self.vectors.shape[0]
        if self.classes.shape != (m,) or self.conditions.shape != (m,):
            raise ValueError("classes/conditions must have one entry per vector")
        bad = set(self.conditions.tolist()) - set(CONDITIONS)
        if bad:
            raise ValueError(f"unknown context conditions: {sorted(bad)}")


def csc(embset):
    """Context silhouette: per class, two clusters by context label.

    Only the label-0/label-1 points participate; every class must have
    both.  Scores are averaged within each class, then across classes.
    """
    per_class = []
    for c in np.unique(embset.classes):
        sel0 = (embset.classes == c) & (embset.conditions == "label-0")
        sel1 = (embset.classes == c) & (embset.conditions == "label-1")
        if not sel0.any() or not sel1.any():
            raise ValueError(
                f"class {c} is missing a context-label condition"
            )
        sel = sel0 | sel1
        scores, _ = silhouette(
            embset.vectors[sel], np.where(sel0[sel], 0, 1)
        )
        per_class.append(scores.mean())
    return float(np.mean(per_class))


def ssc(embset):
    """Sample silhouette: clusters are the object classes, all points."""
    _, mean = silhouette(embset.vectors, embset.classes)
    return mean


def extract_representations(model, episode_batches, layer_tag="final"):
    """Query representations for probe episodes, as a LabeledEmbeddingSet.

    Models with a separate query path expose tag "sample-encoder"
    (default "final" maps there too, since phi(x_q) is their final query
    encoding).  Sequence models expose "final" and "hidden:<i>", read at
    the query position.
    """
    vectors, classes, conditions = [], [], []
    separate = hasattr(model, "encode_query")
    with no_grad():
        for batch in episode_batches:
            if separate:
                if layer_tag not in ("sample-encoder", "final"):
                    raise ValueError(f"invalid layer tag {layer_tag!r}")
                reps = model.encode_query(batch["xq"]).data
            else:
                trace = {}
                model.forward(batch["xs"], batch["labels"], batch["xq"],
                              trace=trace)
                if layer_tag == "final":
                    reps = trace["final"][:, -1]
                elif layer_tag.startswith("hidden:"):
                    idx = int(layer_tag.split(":", 1)[1])
                    if not 0 <= idx < len(trace["hidden"]):
                        raise ValueError(f"invalid layer tag {layer_tag!r}")
                    reps = trace["hidden"][idx][:, -1]
                else:
                    raise ValueError(f"invalid layer tag {layer_tag!r}")
            vectors.append(np.asarray(reps, dtype=np.float64))
            classes.append(batch["query_class"])
            conditions.extend([batch["condition"]] * len(batch["query_class"]))
    return LabeledEmbeddingSet(
        np.concatenate(vectors, axis=0),
        np.concatenate(classes, axis=0),
        np.asarray(conditions),
        source={"layer": layer_tag},
    )


class RankReport:
    """Singular values (descending) and the numerical rank they imply."""

    def __init__(self, singular_values, threshold):
        self.singular_values = np.asarray(singular_values, dtype=np.float64)
        self.threshold = float(threshold)
        top = self.singular_values[0] if len(self.singular_values) else 0.0
        if top == 0.0:
            self.rank = 0
        else:
            self.rank = int(
                (self.singular_values / top > self.threshold).sum()
            )

    def __repr__(self):
        return f"RankReport(rank={self.rank}, threshold={self.threshold})"


def span_rank(vectors, rel_threshold=1e-3):
    """Numerical rank of the stacked vectors: #{sigma_i/sigma_1 > thr}."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] < 1:
        raise ValueError(f"expected a (n, d) stack, got {vectors.shape}")
    sv = np.linalg.svd(vectors, compute_uv=False)
    return RankReport(sv, rel_threshold)


def chebyshev_points(n, lo, hi):
    k = np.arange(1, n + 1, dtype=np.float64)
    mid, half = (hi + lo) / 2.0, (hi - lo) / 2.0
    return mid + half * np.cos((2 * k - 1) * np.pi / (2 * n))


def default_entanglement_inputs(m, a=1.0):
    """Well-conditioned defaults: geometric t's and wide Chebyshev x's.

    t_i = e^{2(i-1)} spreads the logistic transition points x = ln(t)/a
    evenly, keeping sigma_min/sigma_1 around 1e-3 even at m = 20 where
    naive integer t's collapse below 1e-16.
    """
    t_values = np.exp(2.0 * np.arange(m, dtype=np.float64))
    x_samples = chebyshev_points(8 * m, -6.0, 2.0 * m + 5.0)
    return t_values, x_samples


def entanglement_demo(a, t_values, x_samples, rel_threshold=1e-8):
    """Rank of F[i, j] = 1/(1 + t_i e^{-a x_j}) with unit-norm columns.

    Distinct t's give linearly independent rows, so the numerical rank
    is m whenever the sampling resolves the family; no finite bilinear
    decomposition can reproduce all of them.
    """
    if a == 0:
        raise ValueError("a must be nonzero")
    t_values = np.asarray(t_values, dtype=np.float64)
    x_samples = np.asarray(x_samples, dtype=np.float64)
    if len(np.unique(x_samples)) != len(x_samples):
        raise ValueError("x-samples must be distinct")
    if len(x_samples) < len(t_values):
        raise ValueError("need at least as many x-samples as t-values")
    f = 1.0 / (1.0 + t_values[:, None] * np.exp(-a * x_samples[None, :]))
    f = f / np.linalg.norm(f, axis=0, keepdims=True)
    sv = np.linalg.svd(f, compute_uv=False)
    return RankReport(sv, rel_threshold)


def _query_logits(model, episode):
    if "tokens" in episode:
        out = model.forward(episode["tokens"], results=episode.get("results"))
    else:
        out = model.forward(episode["xs"], episode["labels"], episode["xq"])
    if isinstance(out, tuple):
        out = out[0]
    return out.data


def accuracy_eval(model, episode, restrict_labels=None):
    """Mean 0/1 correctness of the argmax prediction.

    restrict_labels narrows the argmax to the given label ids (the ICL
    evaluator restricts to {0, 1}, making chance exactly 50%); None uses
    all classes (the IWL evaluator).
    """
    targets = episode["answers"] if "tokens" in episode else episode["yq"]
    with no_grad():
        logits = _query_logits(model, episode)
    if restrict_labels is not None:
        restrict_labels = np.asarray(restrict_labels)
        picked = restrict_labels[np.argmax(logits[:, restrict_labels], axis=1)]
    else:
        picked = np.argmax(logits, axis=1)
    return float((picked == np.asarray(targets)).mean())


def mse_curve(model, episode, normalized=True):
    """Mean squared query error per context length, j = 0..k.

    Position j scores the model's prediction for the (j+1)-th input
    given the first j pairs (teacher-forced); position k is the held-out
    query.  The normalized variant divides by the input dim d, the
    zero-predictor error on linear tasks.
    """
    with no_grad():
        preds = model.forward(episode["xs"], episode["ys"], episode["xq"]).data
    targets = np.concatenate(
        [episode["ys"], episode["yq"][:, None]], axis=1
    )
    errs = (preds.astype(np.float64) - targets) ** 2
    curve = errs.mean(axis=0)
    if normalized:
        curve = curve / episode["xs"].shape[-1]
    return curve
