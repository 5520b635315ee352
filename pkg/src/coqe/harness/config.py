"""Experiment configs: JSON documents validated against a strict schema.

A config has sections model/task/training/eval plus the experiment kind
and run-level fields.  Unknown keys are rejected by name, ranges are
checked before any compute, and the config hash is stable under key
reordering.  seed and out_dir do not enter the hash, so one hash names
one experiment across seeds.
"""

import hashlib
import importlib.resources
import json
import os

from ..tasks.regression import FUNCTION_KINDS


class ConfigError(ValueError):
    pass


def _field(default, check=None, desc=""):
    return {"default": default, "check": check, "desc": desc}


def _positive(x):
    return x > 0


def _non_negative(x):
    return x >= 0


_MODEL_FIELDS = {
    "kind": _field("transformer", lambda v: v in ("transformer", "coqe", "lsa")),
    "embed_dim": _field(64, _positive),
    "n_layers": _field(4, _positive),
    "n_heads": _field(8, _positive),
    "enc_hidden": _field(64, _positive),
    # context-query models only: sample-representation width when it
    # should differ from embed_dim
    "sample_dim": _field(None, lambda v: v is None or v > 0),
}

_TASK_FIELDS = {
    "regression": {
        "function": _field("linear", lambda v: v in FUNCTION_KINDS),
        "dim": _field(None, lambda v: v is None or v > 0),
        "n_ctx": _field(10, _positive),
        "sparsity": _field(None, lambda v: v is None or v > 0),
        "hidden": _field(10, _positive),
        "full_dims": _field(False, lambda v: isinstance(v, bool)),
    },
    "classification": {
        "n_classes": _field(64, lambda v: v >= 3),
        "n_exemplars": _field(20, _positive),
        "dim": _field(64, _positive),
        "noise_scale": _field(0.3, _non_negative),
        "p_bursty": _field(0.9, lambda v: 0.0 <= v <= 1.0),
        "alpha": _field(0.0, _non_negative),
        "noise_mu0": _field(None, lambda v: v is None or v >= 0),
        "noise_period": _field(10_000, _positive),
        "replacement": _field(True, lambda v: isinstance(v, bool)),
    },
    "arithmetic": {
        "train_examples": _field(None, lambda v: v is None or v > 0),
    },
}

_TRAINING_FIELDS = {
    "lr": _field(1e-4, _positive),
    "batch": _field(24, _positive),
    "steps": _field(10_000, _non_negative),
    "weight_decay": _field(0.0, _non_negative),
}

_EVAL_FIELDS = {
    "cadence": _field(500, _positive),
    "episodes": _field(2000, _positive),
    "rep_dump": _field(False, lambda v: isinstance(v, bool)),
}

_TOP_FIELDS = {
    "seed": _field(0, _non_negative),
    "precision": _field("f32", lambda v: v in ("f32", "f64")),
    "out_dir": _field(None, lambda v: v is None or isinstance(v, str)),
}

KINDS = ("regression", "classification", "arithmetic")


def _apply_schema(section, data, schema):
    out = {}
    for key, value in data.items():
        if key not in schema:
            raise ConfigError(f"unknown key {section}.{key}")
        out[key] = value
    for key, spec in schema.items():
        if key not in out:
            out[key] = spec["default"]
        check = spec["check"]
        if check is not None:
            try:
                ok = check(out[key])
            except TypeError:
                ok = False
            if not ok:
                raise ConfigError(
                    f"invalid value for {section}.{key}: {out[key]!r}"
                )
    return out


def validate_config(raw):
    """Fill defaults and validate; returns a plain nested dict."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"invalid or missing experiment kind: {kind!r}")
    known = {"kind", "model", "task", "training", "eval"} | set(_TOP_FIELDS)
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown key {key}")
    cfg = {"kind": kind}
    cfg["model"] = _apply_schema("model", raw.get("model", {}), _MODEL_FIELDS)
    cfg["task"] = _apply_schema("task", raw.get("task", {}),
                                _TASK_FIELDS[kind])
    cfg["training"] = _apply_schema("training", raw.get("training", {}),
                                    _TRAINING_FIELDS)
    cfg["eval"] = _apply_schema("eval", raw.get("eval", {}), _EVAL_FIELDS)
    for key, spec in _TOP_FIELDS.items():
        cfg[key] = raw.get(key, spec["default"])
        if spec["check"] is not None and not spec["check"](cfg[key]):
            raise ConfigError(f"invalid value for {key}: {cfg[key]!r}")
    if cfg["model"]["kind"] == "lsa" and kind != "regression":
        raise ConfigError("model.kind 'lsa' is only valid for regression")
    if cfg["model"]["embed_dim"] % cfg["model"]["n_heads"] != 0:
        raise ConfigError(
            f"model.embed_dim {cfg['model']['embed_dim']} not divisible by "
            f"n_heads {cfg['model']['n_heads']}"
        )
    return cfg


def config_hash(cfg):
    """12 hex chars over the canonical config.

    seed, out_dir, and training.steps stay outside the hash: one hash
    names one experiment across seeds, and extending a run with a steps
    override must not rewrite rows already emitted.
    """
    hashed = {k: v for k, v in cfg.items() if k not in ("seed", "out_dir")}
    hashed["training"] = {
        k: v for k, v in cfg["training"].items() if k != "steps"
    }
    blob = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def preset_path(name):
    """Path of a packaged preset; accepts the name with or without .json."""
    if not name.endswith(".json"):
        name += ".json"
    root = importlib.resources.files("coqe") / "presets" / name
    return str(root)


def load_config(path):
    """Load and validate a config file; bare preset names also resolve."""
    if not os.path.exists(path):
        candidate = preset_path(os.path.basename(str(path)))
        if os.path.exists(candidate):
            path = candidate
        else:
            raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse failure in {path}: {exc}") from exc
    return validate_config(raw)


def out_root(cfg):
    """Output directory: config, else $COQE_OUT, else ./runs."""
    if cfg.get("out_dir"):
        return cfg["out_dir"]
    return os.environ.get("COQE_OUT", "runs")
