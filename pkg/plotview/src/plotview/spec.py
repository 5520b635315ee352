"""Plot specification: a JSON object naming inputs, kind, and styling.

Validation is strict (unknown keys rejected) so a typo in a selector
fails loudly instead of silently rendering an empty or mislabeled
figure.
"""

import json
import os
from dataclasses import dataclass

KINDS = ("curve", "msecurve", "scatter", "repmap")
AGGS = ("mean", "individual")
FORMATS = (".png", ".svg")

# keys accepted for every kind, then per-kind extras
_COMMON_KEYS = {"kind", "out", "labels", "title", "xlabel", "ylabel",
                "xlim", "ylim", "dpi"}
_KIND_KEYS = {
    "curve": {"csv", "metric", "splits", "agg"},
    "msecurve": {"csv", "split", "step", "agg"},
    "scatter": {"csv", "records", "color_by", "x_split", "y_split",
                "metric"},
    "repmap": {"records", "color_by"},
}


class SpecError(ValueError):
    """Spec fails validation or selects nothing."""


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    out: str
    sources: tuple
    source_kind: str  # "csv" or "records"
    labels: tuple = None
    metric: str = None
    splits: tuple = None
    split: str = "id"
    step: int = None
    agg: str = "mean"
    color_by: str = "query_class"
    x_split: str = "icl"
    y_split: str = "iwl"
    title: str = None
    xlabel: str = None
    ylabel: str = None
    xlim: tuple = None
    ylim: tuple = None
    dpi: int = 100


def _paths(raw, key):
    value = raw[key]
    if isinstance(value, str):
        value = [value]
    if (not isinstance(value, list) or not value
            or not all(isinstance(p, str) for p in value)):
        raise SpecError(f"'{key}' must be a path or non-empty list of paths")
    for p in value:
        if not os.path.isfile(p):
            raise SpecError(f"'{key}' input not found: {p}")
    return tuple(value)


def _limit(raw, key):
    if key not in raw:
        return None
    value = raw[key]
    if (not isinstance(value, list) or len(value) != 2
            or not all(isinstance(v, (int, float)) for v in value)):
        raise SpecError(f"'{key}' must be a [low, high] pair")
    return (float(value[0]), float(value[1]))


def _string(raw, key, default=None):
    value = raw.get(key, default)
    if value is not None and not isinstance(value, str):
        raise SpecError(f"'{key}' must be a string")
    return value


def validate_spec(raw):
    """Checks a raw dict against the schema and fills defaults."""
    if not isinstance(raw, dict):
        raise SpecError("spec must be a JSON object")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise SpecError(f"'kind' must be one of {', '.join(KINDS)}, "
                        f"got {kind!r}")
    allowed = _COMMON_KEYS | _KIND_KEYS[kind]
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise SpecError(f"unknown key(s) for kind {kind!r}: "
                        f"{', '.join(unknown)}")

    out = raw.get("out")
    if not isinstance(out, str) or not out:
        raise SpecError("'out' is required")
    if os.path.splitext(out)[1] not in FORMATS:
        raise SpecError(f"'out' must end in one of {', '.join(FORMATS)}")
    out_dir = os.path.dirname(os.path.abspath(out))
    if not os.path.isdir(out_dir):
        raise SpecError(f"output directory does not exist: {out_dir}")

    fields = {"kind": kind, "out": out}

    if kind in ("curve", "msecurve"):
        if "csv" not in raw:
            raise SpecError(f"{kind} requires 'csv'")
        fields["sources"] = _paths(raw, "csv")
        fields["source_kind"] = "csv"
    elif kind == "repmap":
        if "records" not in raw:
            raise SpecError("repmap requires 'records'")
        fields["sources"] = _paths(raw, "records")
        fields["source_kind"] = "records"
    else:  # scatter takes exactly one input family
        has_csv, has_rec = "csv" in raw, "records" in raw
        if has_csv == has_rec:
            raise SpecError("scatter requires exactly one of "
                            "'csv' or 'records'")
        key = "csv" if has_csv else "records"
        fields["sources"] = _paths(raw, key)
        fields["source_kind"] = key

    if kind == "curve":
        metric = _string(raw, "metric")
        if not metric:
            raise SpecError("curve requires 'metric'")
        fields["metric"] = metric
        if "splits" in raw:
            splits = raw["splits"]
            if (not isinstance(splits, list) or not splits
                    or not all(isinstance(s, str) for s in splits)):
                raise SpecError("'splits' must be a non-empty list of "
                                "strings")
            fields["splits"] = tuple(splits)
    if kind == "msecurve":
        fields["split"] = _string(raw, "split", "id")
        if "step" in raw:
            if not isinstance(raw["step"], int) or raw["step"] < 0:
                raise SpecError("'step' must be a non-negative integer")
            fields["step"] = raw["step"]
    if kind in ("curve", "msecurve"):
        agg = _string(raw, "agg", "mean")
        if agg not in AGGS:
            raise SpecError(f"'agg' must be one of {', '.join(AGGS)}")
        fields["agg"] = agg
    if kind == "scatter" and fields["source_kind"] == "csv":
        fields["x_split"] = _string(raw, "x_split", "icl")
        fields["y_split"] = _string(raw, "y_split", "iwl")
        fields["metric"] = _string(raw, "metric", "acc")
    if kind in ("scatter", "repmap"):
        fields["color_by"] = _string(raw, "color_by", "query_class")

    if "labels" in raw:
        labels = raw["labels"]
        if (not isinstance(labels, list)
                or not all(isinstance(s, str) for s in labels)):
            raise SpecError("'labels' must be a list of strings")
        if len(labels) != len(fields["sources"]):
            raise SpecError(f"'labels' has {len(labels)} entries for "
                            f"{len(fields['sources'])} input file(s)")
        fields["labels"] = tuple(labels)

    for key in ("title", "xlabel", "ylabel"):
        value = _string(raw, key)
        if value is not None:
            fields[key] = value
    for key in ("xlim", "ylim"):
        value = _limit(raw, key)
        if value is not None:
            fields[key] = value
    if "dpi" in raw:
        if not isinstance(raw["dpi"], int) or raw["dpi"] <= 0:
            raise SpecError("'dpi' must be a positive integer")
        fields["dpi"] = raw["dpi"]

    return PlotSpec(**fields)


def load_spec(path):
    """Reads and validates a spec JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise SpecError(f"cannot read spec: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON: {exc}") from exc
    return validate_spec(raw)
