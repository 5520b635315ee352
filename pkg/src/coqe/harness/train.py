"""Config-driven training loops for the three experiment kinds.

A run is a pure function of (config, seed) at fixed precision: batches,
eval sets, and noise are all drawn from counter-based streams keyed by
(seed, purpose, step).  Eval sets use a step offset far above any
training step so their draws never overlap training batches.
"""

import json
import os

import numpy as np

from .. import metrics, rng, tasks
from ..models import (
    ArithmeticLM,
    CoqeClassifier,
    CoqeRegressor,
    RestrictedLsa,
    TransformerClassifier,
    TransformerRegressor,
)
from ..models.classification import noise_schedule
from ..optim import Adam
from ..tensor import (
    NonFiniteError,
    Tensor,
    backward,
    cross_entropy,
    mse_loss,
    no_grad,
)
from .checkpoint import save_checkpoint
from .config import config_hash, out_root
from .runlog import MetricWriter

EVAL_STEP_BASE = 2 ** 32          # keeps eval draws disjoint from training
REP_DUMP_POINTS = (3000, 10_000, 50_000, 100_000)   # at 1e5-step scale
PROBE_CLASSES = 10
PROBE_EPISODES_PER_CELL = 20
OOD_SWEEP = (
    ("ctx-scale", 0.8),
    ("ctx-scale", 1.2),
    ("query-3std", None),
    ("sign-fixed", None),
    ("task-scale", 0.8),
    ("task-scale", 1.2),
)


class TrainingDiverged(RuntimeError):
    pass


def _dtype(cfg):
    return np.float64 if cfg["precision"] == "f64" else np.float32


def _regression_dim(cfg):
    t = cfg["task"]
    if t["dim"] is not None:
        return t["dim"]
    return tasks.default_dim(t["function"], t["full_dims"])


def build_model(cfg):
    m = cfg["model"]
    dt = _dtype(cfg)
    seed = cfg["seed"]
    if cfg["kind"] == "regression":
        dim = _regression_dim(cfg)
        n_ctx = cfg["task"]["n_ctx"]
        if m["kind"] == "transformer":
            return TransformerRegressor(
                dim, embed_dim=m["embed_dim"], n_layers=m["n_layers"],
                n_heads=m["n_heads"], enc_hidden=m["enc_hidden"],
                max_pairs=n_ctx, seed=seed, dtype=dt,
            )
        if m["kind"] == "coqe":
            sample_dim = m["sample_dim"] or m["embed_dim"]
            return CoqeRegressor(
                dim, sample_dim=sample_dim, enc_hidden=m["enc_hidden"],
                task_embed=m["embed_dim"], task_layers=m["n_layers"],
                task_heads=m["n_heads"], max_pairs=n_ctx, seed=seed, dtype=dt,
            )
        return RestrictedLsa(dim, seed=seed, dtype=np.float64)
    if cfg["kind"] == "classification":
        t = cfg["task"]
        cls = CoqeClassifier if m["kind"] == "coqe" else TransformerClassifier
        return cls(
            t["dim"], t["n_classes"], embed_dim=m["embed_dim"],
            n_layers=m["n_layers"], n_heads=m["n_heads"],
            enc_hidden=m["enc_hidden"], max_pairs=tasks.N_CONTEXT,
            seed=seed, dtype=dt,
        )
    return ArithmeticLM(
        embed_dim=m["embed_dim"], n_layers=m["n_layers"],
        n_heads=m["n_heads"], seed=seed, masked=(m["kind"] == "coqe"),
        dtype=dt,
    )


def _run_dir(cfg):
    path = os.path.join(
        out_root(cfg),
        f"{cfg['kind']}-{config_hash(cfg)}"
        f"-n{cfg['training']['steps']}-s{cfg['seed']}",
    )
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(cfg, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def _eval_steps(steps, cadence):
    points = list(range(0, steps + 1, cadence))
    if points[-1] != steps:
        points.append(steps)
    return points


def _finite_or_diverged(value, step):
    if not np.isfinite(value):
        raise TrainingDiverged(
            f"non-finite training loss at step {step}; last checkpoint kept"
        )


def _rep_dump_steps(steps):
    scaled = sorted({
        min(int(round(p * steps / 100_000)), steps) for p in REP_DUMP_POINTS
    })
    return [s for s in scaled if s > 0]


def run_regression(cfg):
    """Prefix-loss training with periodic in-distribution MSE curves and a
    final OOD sweep; returns a summary dict."""
    run_dir = _run_dir(cfg)
    cfg_hash = config_hash(cfg)
    model = build_model(cfg)
    t, tr = cfg["task"], cfg["training"]
    dim = _regression_dim(cfg)
    is_lsa = cfg["model"]["kind"] == "lsa"
    opt = Adam(model.params, lr=tr["lr"], weight_decay=tr["weight_decay"])
    prompt_kw = dict(
        dim=dim, full_dims=t["full_dims"], sparsity=t["sparsity"],
        hidden=t["hidden"],
    )
    eval_episode = tasks.make_prompt(
        t["function"], cfg["eval"]["episodes"], t["n_ctx"], cfg["seed"],
        step=EVAL_STEP_BASE, **prompt_kw,
    )

    def emit_curve(writer, step, split, episode):
        if is_lsa:
            with no_grad():
                preds = model.forward(episode["xs"], episode["ys"],
                                      episode["xq"]).data
            err = float(np.mean((preds - episode["yq"]) ** 2)) / dim
            writer.emit(step, split, f"nmse_k{t['n_ctx']}", err)
            return err
        curve = metrics.mse_curve(model, episode, normalized=True)
        for j, value in enumerate(curve):
            writer.emit(step, split, f"nmse_k{j}", value)
        return float(curve[-1])

    last_loss = None
    final_query_nmse = None
    with MetricWriter(os.path.join(run_dir, "metrics.csv"), cfg["seed"],
                      cfg_hash) as writer:
        for step in _eval_steps(tr["steps"], cfg["eval"]["cadence"]):
            start = 0 if last_loss is None else last_loss[0]
            for s in range(start, step):
                episode = tasks.make_prompt(
                    t["function"], tr["batch"], t["n_ctx"], cfg["seed"],
                    step=s, **prompt_kw,
                )
                try:
                    if is_lsa:
                        preds = model.forward(episode["xs"], episode["ys"],
                                              episode["xq"])
                        loss = mse_loss(preds, Tensor(np.asarray(
                            episode["yq"], dtype=preds.data.dtype)))
                    else:
                        loss = model.loss(episode["xs"], episode["ys"])
                except NonFiniteError as exc:
                    raise TrainingDiverged(
                        f"non-finite value at step {s}: {exc}"
                    ) from exc
                _finite_or_diverged(float(loss.data), s)
                opt.zero_grad()
                backward(loss)
                opt.step()
                last_loss = (s + 1, float(loss.data))
            if last_loss is not None:
                writer.emit(step, "train", "loss", last_loss[1])
            final_query_nmse = emit_curve(writer, step, "id", eval_episode)
            save_checkpoint(model.params, cfg_hash, step,
                            os.path.join(run_dir, "last.ckpt"))
            writer.flush()
        for kind, factor in OOD_SWEEP:
            shifted = tasks.apply_ood_shift(eval_episode, kind, factor)
            emit_curve(writer, tr["steps"], f"ood/{shifted['shift']}", shifted)
        writer.flush()
    save_checkpoint(model.params, cfg_hash, tr["steps"],
                    os.path.join(run_dir, "final.ckpt"))
    return {
        "run_dir": run_dir,
        "config_hash": cfg_hash,
        "final_nmse": final_query_nmse,
        "model": model,
    }


def _probe_batches(dataset, seed):
    batches = []
    for cls in range(min(PROBE_CLASSES, dataset.n_classes)):
        for cond in metrics.CONDITIONS:
            batches.append(tasks.build_probe_episodes(
                dataset, cls, cond, PROBE_EPISODES_PER_CELL, seed,
            ))
    return batches


def _dump_representations(model, dataset, cfg, run_dir, writer, step):
    layer = "sample-encoder" if hasattr(model, "encode_query") else "final"
    embset = metrics.extract_representations(
        model, _probe_batches(dataset, cfg["seed"]), layer,
    )
    writer.emit(step, "probe", "csc", metrics.csc(embset))
    writer.emit(step, "probe", "ssc", metrics.ssc(embset))
    records = []
    for i in range(embset.vectors.shape[0]):
        records.append({
            "index": i,
            "vector": embset.vectors[i].tolist(),
            "query_class": int(embset.classes[i]),
            "condition": str(embset.conditions[i]),
            "layer": layer,
            "step": int(step),
            "seed": cfg["seed"],
            "config_hash": config_hash(cfg),
        })
    tasks.write_records(
        os.path.join(run_dir, f"reps-step{step}.ndjson"), records
    )


def run_classification(cfg):
    """Bursty-episode training with ICL/IWL accuracy at every cadence and
    optional representation dumps at scaled checkpoints."""
    run_dir = _run_dir(cfg)
    cfg_hash = config_hash(cfg)
    model = build_model(cfg)
    t, tr = cfg["task"], cfg["training"]
    is_coqe = cfg["model"]["kind"] == "coqe"
    opt = Adam(model.params, lr=tr["lr"], weight_decay=tr["weight_decay"])
    dataset = tasks.make_vector_classes(
        t["n_classes"], t["n_exemplars"], t["dim"], t["noise_scale"],
        cfg["seed"],
    )
    episode_kw = dict(p_bursty=t["p_bursty"], alpha=t["alpha"])
    icl_set = tasks.build_class_episodes(
        dataset, "icl-eval", cfg["eval"]["episodes"], cfg["seed"],
        step=EVAL_STEP_BASE, **episode_kw,
    )
    iwl_set = tasks.build_class_episodes(
        dataset, "iwl-eval", cfg["eval"]["episodes"], cfg["seed"],
        step=EVAL_STEP_BASE, **episode_kw,
    )
    dump_steps = set(_rep_dump_steps(tr["steps"])) if cfg["eval"]["rep_dump"] \
        else set()

    def train_step(s):
        episode = tasks.build_class_episodes(
            dataset, "train", tr["batch"], cfg["seed"], step=s, **episode_kw,
        )
        if is_coqe:
            noise = None
            if t["noise_mu0"] is not None and t["replacement"]:
                mu, sigma = noise_schedule(s, t["noise_mu0"],
                                           t["noise_period"])
                noise = rng.stream(cfg["seed"], "noise", s).normal(
                    mu, sigma, size=(tr["batch"], t["n_classes"]),
                )
            logits_mod, logits_orig = model.forward(
                episode["xs"], episode["labels"], episode["xq"], noise=noise,
            )
            yq = episode["yq"]
            loss_mod = cross_entropy(logits_mod, yq)
            loss_orig = cross_entropy(logits_orig, yq)
            return loss_mod + loss_orig, {
                "loss_mod": float(loss_mod.data),
                "loss_orig": float(loss_orig.data),
            }
        loss = model.loss(episode["xs"], episode["labels"], episode["xq"],
                          episode["yq"])
        return loss, {}

    if is_coqe and not t["replacement"]:
        model.replacement = False
    last = None
    final = {}
    with MetricWriter(os.path.join(run_dir, "metrics.csv"), cfg["seed"],
                      cfg_hash) as writer:
        eval_points = _eval_steps(tr["steps"], cfg["eval"]["cadence"])
        done = 0
        for step in sorted(set(eval_points) | dump_steps):
            for s in range(done, step):
                try:
                    loss, extra = train_step(s)
                except NonFiniteError as exc:
                    raise TrainingDiverged(
                        f"non-finite value at step {s}: {exc}"
                    ) from exc
                _finite_or_diverged(float(loss.data), s)
                opt.zero_grad()
                backward(loss)
                opt.step()
                last = (float(loss.data), extra)
            done = step
            if step in dump_steps:
                _dump_representations(model, dataset, cfg, run_dir, writer,
                                      step)
                save_checkpoint(model.params, cfg_hash, step,
                                os.path.join(run_dir, f"step-{step}.ckpt"))
            if step in eval_points:
                if last is not None:
                    writer.emit(step, "train", "loss", last[0])
                    for name, value in last[1].items():
                        writer.emit(step, "train", name, value)
                final = {
                    "icl": metrics.accuracy_eval(model, icl_set,
                                                 restrict_labels=[0, 1]),
                    "iwl": metrics.accuracy_eval(model, iwl_set),
                }
                writer.emit(step, "icl", "acc", final["icl"])
                writer.emit(step, "iwl", "acc", final["iwl"])
                save_checkpoint(model.params, cfg_hash, step,
                                os.path.join(run_dir, "last.ckpt"))
            writer.flush()
    save_checkpoint(model.params, cfg_hash, tr["steps"],
                    os.path.join(run_dir, "final.ckpt"))
    return {
        "run_dir": run_dir,
        "config_hash": cfg_hash,
        "final_icl": final.get("icl"),
        "final_iwl": final.get("iwl"),
        "model": model,
        "dataset": dataset,
    }


def run_arithmetic(cfg):
    """Trains one arithmetic model; reports train-distribution (IWL) and
    pseudo-letter (ICL) accuracy at every cadence."""
    run_dir = _run_dir(cfg)
    cfg_hash = config_hash(cfg)
    model = build_model(cfg)
    t, tr = cfg["task"], cfg["training"]
    masked = cfg["model"]["kind"] == "coqe"
    opt = Adam(model.params, lr=tr["lr"], weight_decay=tr["weight_decay"])
    iwl_set = tasks.gen_arithmetic("train", cfg["eval"]["episodes"],
                                   cfg["seed"], step=EVAL_STEP_BASE)
    icl_set = tasks.gen_arithmetic("icl-eval", cfg["eval"]["episodes"],
                                   cfg["seed"], step=EVAL_STEP_BASE)
    fixed = None
    if t["train_examples"]:
        fixed = tasks.gen_arithmetic("train", t["train_examples"],
                                     cfg["seed"], step=0)

    def train_batch(s):
        if fixed is None:
            return tasks.gen_arithmetic("train", tr["batch"], cfg["seed"],
                                        step=s)
        idx = rng.stream(cfg["seed"], "train-idx", s).integers(
            0, t["train_examples"], size=tr["batch"],
        )
        return {k: v[idx] if isinstance(v, np.ndarray) else v
                for k, v in fixed.items()}

    last = None
    final = {}
    with MetricWriter(os.path.join(run_dir, "metrics.csv"), cfg["seed"],
                      cfg_hash) as writer:
        for step in _eval_steps(tr["steps"], cfg["eval"]["cadence"]):
            start = 0 if last is None else last[0]
            for s in range(start, step):
                episode = train_batch(s)
                results = episode["results"] if masked else None
                try:
                    loss = model.loss(episode["tokens"], episode["answers"],
                                      results=results)
                except NonFiniteError as exc:
                    raise TrainingDiverged(
                        f"non-finite value at step {s}: {exc}"
                    ) from exc
                _finite_or_diverged(float(loss.data), s)
                opt.zero_grad()
                backward(loss)
                opt.step()
                last = (s + 1, float(loss.data))
            if last is not None:
                writer.emit(step, "train", "loss", last[1])
            final = {
                "iwl": metrics.accuracy_eval(model, iwl_set),
                "icl": metrics.accuracy_eval(model, icl_set),
            }
            writer.emit(step, "iwl", "acc", final["iwl"])
            writer.emit(step, "icl", "acc", final["icl"])
            save_checkpoint(model.params, cfg_hash, step,
                            os.path.join(run_dir, "last.ckpt"))
            writer.flush()
    save_checkpoint(model.params, cfg_hash, tr["steps"],
                    os.path.join(run_dir, "final.ckpt"))
    return {
        "run_dir": run_dir,
        "config_hash": cfg_hash,
        "final_icl": final.get("icl"),
        "final_iwl": final.get("iwl"),
        "model": model,
    }


RUNNERS = {
    "regression": run_regression,
    "classification": run_classification,
    "arithmetic": run_arithmetic,
}
