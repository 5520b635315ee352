"""Command-line entry point.

Exit codes: 0 success, 1 for validation/usage errors and failed checks,
2 for runtime failures.
"""

import argparse
import json
import os
import sys

import numpy as np

from .. import metrics, tasks
from ..gradcheck import grad_check
from ..models import CoqeRegressor, RestrictedLsa, TransformerRegressor
from ..models.lsa import duality_gap
from ..tensor import no_grad
from .checkpoint import CheckpointError, load_checkpoint, restore_model
from .config import ConfigError, config_hash, load_config
from .train import (
    EVAL_STEP_BASE,
    RUNNERS,
    TrainingDiverged,
    build_model,
    run_arithmetic,
    run_classification,
    run_regression,
)

TRAIN_COMMANDS = {
    "train-regression": ("regression", run_regression),
    "train-classification": ("classification", run_classification),
    "train-arithmetic": ("arithmetic", run_arithmetic),
}
CHECK_COMMANDS = (
    "eval", "probe-representations", "grad-check", "duality-check",
    "entanglement-demo", "zipf-check", "dump-episodes",
)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="coqe",
        description="Training, evaluation, and self-check commands for the "
        "context-query experiments.",
    )
    sub = parser.add_subparsers(dest="command")
    for name in list(TRAIN_COMMANDS) + list(CHECK_COMMANDS):
        p = sub.add_parser(name)
        p.add_argument("--config", help="config file path, packaged preset "
                       "name, or inline key=value pairs for the check "
                       "commands")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--steps", type=int)
        p.add_argument("--precision", choices=("f32", "f64"))
        if name in ("eval", "probe-representations"):
            p.add_argument("--ckpt", help="checkpoint file to evaluate")
    return parser


def _load_overridden(args, require=True):
    if args.config is None:
        if require:
            raise ConfigError("--config is required for this command")
        return None
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out_dir"] = args.out
    if args.steps is not None:
        cfg["training"]["steps"] = args.steps
    if args.precision is not None:
        cfg["precision"] = args.precision
    return cfg


def _parse_inline(text, fields):
    """Parse 'a=1,b=2.5' against {name: converter}; unknown names fail."""
    out = {}
    if not text:
        return out
    for part in text.split(","):
        if "=" not in part:
            raise ConfigError(f"expected key=value, got {part!r}")
        key, _, value = part.partition("=")
        key = key.strip()
        if key not in fields:
            raise ConfigError(f"unknown key {key!r}; expected one of "
                              f"{sorted(fields)}")
        try:
            out[key] = fields[key](value.strip())
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r}") from exc
    return out


def _cmd_train(name, args):
    kind, runner = TRAIN_COMMANDS[name]
    cfg = _load_overridden(args)
    if cfg["kind"] != kind:
        raise ConfigError(
            f"{name} needs a {kind} config, got kind={cfg['kind']!r}"
        )
    out = runner(cfg)
    line = f"done run_dir={out['run_dir']} config_hash={out['config_hash']}"
    for key in ("final_nmse", "final_icl", "final_iwl"):
        if out.get(key) is not None:
            line += f" {key.removeprefix('final_')}={out[key]:.6g}"
    print(line)
    return 0


def _restored_model(cfg, args):
    if not args.ckpt:
        raise ConfigError("--ckpt is required for this command")
    model = build_model(cfg)
    _, params = load_checkpoint(args.ckpt, expect_hash=config_hash(cfg))
    restore_model(model, params)
    return model


def _cmd_eval(args):
    cfg = _load_overridden(args)
    model = _restored_model(cfg, args)
    t = cfg["task"]
    n = cfg["eval"]["episodes"]
    if cfg["kind"] == "regression":
        dim = t["dim"] or tasks.default_dim(t["function"], t["full_dims"])
        episode = tasks.make_prompt(
            t["function"], n, t["n_ctx"], cfg["seed"], step=EVAL_STEP_BASE,
            dim=dim, full_dims=t["full_dims"], sparsity=t["sparsity"],
            hidden=t["hidden"],
        )
        if isinstance(model, RestrictedLsa):
            with no_grad():
                preds = model.forward(episode["xs"], episode["ys"],
                                      episode["xq"]).data
            err = float(np.mean((preds - episode["yq"]) ** 2)) / dim
            print(f"id nmse_k{t['n_ctx']} {err:.17g}")
        else:
            curve = metrics.mse_curve(model, episode)
            for j, v in enumerate(curve):
                print(f"id nmse_k{j} {v:.17g}")
    elif cfg["kind"] == "classification":
        dataset = tasks.make_vector_classes(
            t["n_classes"], t["n_exemplars"], t["dim"], t["noise_scale"],
            cfg["seed"],
        )
        kw = dict(p_bursty=t["p_bursty"], alpha=t["alpha"])
        icl = tasks.build_class_episodes(dataset, "icl-eval", n, cfg["seed"],
                                         step=EVAL_STEP_BASE, **kw)
        iwl = tasks.build_class_episodes(dataset, "iwl-eval", n, cfg["seed"],
                                         step=EVAL_STEP_BASE, **kw)
        print(f"icl acc {metrics.accuracy_eval(model, icl, restrict_labels=[0, 1]):.17g}")
        print(f"iwl acc {metrics.accuracy_eval(model, iwl):.17g}")
    else:
        iwl = tasks.gen_arithmetic("train", n, cfg["seed"],
                                   step=EVAL_STEP_BASE)
        icl = tasks.gen_arithmetic("icl-eval", n, cfg["seed"],
                                   step=EVAL_STEP_BASE)
        print(f"iwl acc {metrics.accuracy_eval(model, iwl):.17g}")
        print(f"icl acc {metrics.accuracy_eval(model, icl):.17g}")
    return 0


def _cmd_probe(args):
    from .train import PROBE_CLASSES, PROBE_EPISODES_PER_CELL

    cfg = _load_overridden(args)
    if cfg["kind"] != "classification":
        raise ConfigError("probe-representations needs a classification "
                          "config")
    model = _restored_model(cfg, args)
    t = cfg["task"]
    dataset = tasks.make_vector_classes(
        t["n_classes"], t["n_exemplars"], t["dim"], t["noise_scale"],
        cfg["seed"],
    )
    batches = []
    for cls in range(min(PROBE_CLASSES, dataset.n_classes)):
        for cond in metrics.CONDITIONS:
            batches.append(tasks.build_probe_episodes(
                dataset, cls, cond, PROBE_EPISODES_PER_CELL, cfg["seed"],
            ))
    layer = "sample-encoder" if hasattr(model, "encode_query") else "final"
    embset = metrics.extract_representations(model, batches, layer)
    print(f"probe csc {metrics.csc(embset):.17g}")
    print(f"probe ssc {metrics.ssc(embset):.17g}")
    if args.out:
        records = [{
            "index": i,
            "vector": embset.vectors[i].tolist(),
            "query_class": int(embset.classes[i]),
            "condition": str(embset.conditions[i]),
            "layer": layer,
        } for i in range(embset.vectors.shape[0])]
        tasks.write_records(args.out, records)
        print(f"wrote {len(records)} records to {args.out}")
    return 0


def _cmd_grad_check(args):
    from ..tensor import Tensor

    seed = args.seed if args.seed is not None else 0
    tol = 1e-4
    worst = 0.0
    cases = {
        "transformer": TransformerRegressor(3, embed_dim=8, n_layers=1,
                                            n_heads=2, enc_hidden=8,
                                            max_pairs=4, seed=seed,
                                            dtype=np.float64),
        "coqe": CoqeRegressor(3, sample_dim=6, enc_hidden=8, task_embed=8,
                              task_layers=1, task_heads=2, max_pairs=4,
                              seed=seed, dtype=np.float64),
    }
    from .. import rng
    g = rng.stream(seed, "grad-check")
    xs = g.normal(size=(2, 4, 3))
    ys = g.normal(size=(2, 4))
    for name, model in cases.items():
        err = grad_check(lambda m=model: m.loss(xs, ys), model.params,
                         seed=seed)
        print(f"{name} max rel err {err:.3e}")
        worst = max(worst, err)
    lsa = RestrictedLsa(3, seed=seed)
    xq = g.normal(size=(2, 3))
    yq = g.normal(size=(2,))

    def lsa_loss():
        from ..tensor import mse_loss
        pred = lsa.forward(xs, ys, xq)
        return mse_loss(pred, Tensor(yq))

    err = grad_check(lsa_loss, lsa.params, seed=seed)
    print(f"lsa max rel err {err:.3e}")
    worst = max(worst, err)
    ok = worst < tol
    print(f"grad-check {'ok' if ok else 'FAILED'}: max {worst:.3e} "
          f"tol {tol:g}")
    return 0 if ok else 1


def _cmd_duality_check(args):
    from .. import rng

    seed = args.seed if args.seed is not None else 0
    instances = 1000
    g = rng.stream(seed, "duality-check")
    gap = 0.0
    for i in range(instances):
        dim = int(g.integers(2, 9))
        n = int(g.integers(1, 13))
        model = RestrictedLsa(dim, seed=seed + i,
                              y_scalar=float(g.normal()))
        xs = g.normal(size=(1, n, dim))
        ys = g.normal(size=(1, n))
        xq = g.normal(size=(1, dim))
        gap = max(gap, duality_gap(model, xs, ys, xq))
    ok = gap < 1e-10
    print(f"duality-check {'ok' if ok else 'FAILED'}: max gap {gap:.3e} "
          f"over {instances} instances, tol 1e-10")
    return 0 if ok else 1


def _cmd_entanglement(args):
    opts = _parse_inline(args.config, {"m": int, "a": float})
    m = opts.get("m", 20)
    a = opts.get("a", 1.0)
    if m <= 0:
        raise ConfigError(f"m must be positive, got {m}")
    t_values, x_samples = metrics.default_entanglement_inputs(m, a)
    report = metrics.entanglement_demo(a, t_values, x_samples)
    sv = report.singular_values
    ratio = sv[-1] / sv[0]
    ok = report.rank == m
    print(f"entanglement-demo {'ok' if ok else 'FAILED'}: m={m} "
          f"rank={report.rank} sigma_min/sigma_1={ratio:.3e} tol 1e-8")
    return 0 if ok else 1


def _cmd_zipf_check(args):
    opts = _parse_inline(args.config, {"N": int, "alpha": float})
    n = opts.get("N", 64)
    alpha = opts.get("alpha", 0.0)
    seed = args.seed if args.seed is not None else 0
    draws = 1_000_000
    probs = tasks.zipf_probs(n, alpha)
    sample = tasks.zipf_sample(n, alpha, seed, size=draws)
    counts = np.bincount(sample, minlength=n).astype(np.float64)
    emp = counts / draws
    # KL(empirical || exact); zero empirical cells contribute zero
    nz = emp > 0
    kl = float(np.sum(emp[nz] * np.log(emp[nz] / probs[nz])))
    ok = kl < 1e-3
    print(f"zipf-check {'ok' if ok else 'FAILED'}: N={n} alpha={alpha:g} "
          f"KL={kl:.3e} over {draws} draws, tol 1e-3")
    return 0 if ok else 1


def _cmd_dump_episodes(args):
    cfg = _load_overridden(args)
    t = cfg["task"]
    n = cfg["eval"]["episodes"]
    if cfg["kind"] == "regression":
        dim = t["dim"] or tasks.default_dim(t["function"], t["full_dims"])
        batch = tasks.make_prompt(
            t["function"], n, t["n_ctx"], cfg["seed"], step=EVAL_STEP_BASE,
            dim=dim, full_dims=t["full_dims"], sparsity=t["sparsity"],
            hidden=t["hidden"],
        )
    elif cfg["kind"] == "classification":
        dataset = tasks.make_vector_classes(
            t["n_classes"], t["n_exemplars"], t["dim"], t["noise_scale"],
            cfg["seed"],
        )
        batch = tasks.build_class_episodes(
            dataset, "icl-eval", n, cfg["seed"], step=EVAL_STEP_BASE,
            p_bursty=t["p_bursty"], alpha=t["alpha"],
        )
    else:
        batch = tasks.gen_arithmetic("icl-eval", n, cfg["seed"],
                                     step=EVAL_STEP_BASE)
    path = args.out or "episodes.ndjson"
    count = tasks.write_records(path, tasks.episode_records(batch))
    print(f"wrote {count} episode records to {path}")
    return 0


def cli(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    parser = _build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 1
        return 1 if code == 2 else code
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        if args.command in TRAIN_COMMANDS:
            return _cmd_train(args.command, args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "probe-representations":
            return _cmd_probe(args)
        if args.command == "grad-check":
            return _cmd_grad_check(args)
        if args.command == "duality-check":
            return _cmd_duality_check(args)
        if args.command == "entanglement-demo":
            return _cmd_entanglement(args)
        if args.command == "zipf-check":
            return _cmd_zipf_check(args)
        return _cmd_dump_episodes(args)
    except (ConfigError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TrainingDiverged, FloatingPointError, RuntimeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli())


if __name__ == "__main__":
    main()
