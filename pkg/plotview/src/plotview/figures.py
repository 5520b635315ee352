"""Renderers for the four figure kinds.

Deterministic by construction: Agg backend, fixed SVG hash salt, no
wall-clock metadata, figures built directly (no pyplot state machine).
Rendering the same spec twice yields byte-identical files. Every
figure embeds the config hashes of its source runs, both as pixel
text in the footer and in the image metadata.
"""

import os
import re

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "plotview"

from matplotlib.backends.backend_agg import FigureCanvasAgg  # noqa: E402
from matplotlib.cm import ScalarMappable  # noqa: E402
from matplotlib.colors import Normalize  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402
from matplotlib.lines import Line2D  # noqa: E402

from .pca import pca_top2  # noqa: E402
from .spec import SpecError  # noqa: E402
from .tables import read_metrics_csv, read_records  # noqa: E402

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
MARKERS = ("o", "s", "^", "D", "v", "P", "X", "*")
FIGSIZE = (6.4, 4.8)
CMAP = "viridis"

# per-context-length error metrics written by the regression runs
_NMSE_RE = re.compile(r"^nmse_k(\d+)$")


def _color(i):
    return PALETTE[i % len(PALETTE)]


def _source_label(spec, i):
    if spec.labels:
        return spec.labels[i]
    return os.path.basename(os.path.dirname(os.path.abspath(
        spec.sources[i]))) or spec.sources[i]


def _mean_band(by_seed):
    """Per-step mean and std across seeds; std is 0 where one seed."""
    by_step = {}
    for points in by_seed.values():
        for step, value in points:
            by_step.setdefault(step, []).append(value)
    steps = sorted(by_step)
    mean = np.array([np.mean(by_step[s]) for s in steps])
    std = np.array([np.std(by_step[s]) for s in steps])
    return np.array(steps), mean, std


def _series_by_seed(rows, split, metric):
    out = {}
    for r in rows:
        if r.split == split and r.metric == metric:
            out.setdefault(r.seed, []).append((r.step, r.value))
    return {seed: sorted(points) for seed, points in out.items()}


def _plot_aggregated(ax, by_seed, color, label, agg):
    if agg == "individual":
        for j, seed in enumerate(sorted(by_seed)):
            xs, ys = zip(*by_seed[seed])
            ax.plot(xs, ys, color=color, linewidth=1.2,
                    label=label if j == 0 else None)
        return
    steps, mean, std = _mean_band(by_seed)
    ax.plot(steps, mean, color=color, linewidth=1.6, label=label)
    if np.any(std > 0):
        ax.fill_between(steps, mean - std, mean + std, color=color,
                        alpha=0.2, linewidth=0)


def _curve(spec, fig, ax):
    rows = [r for path in spec.sources for r in read_metrics_csv(path)]
    present = sorted({r.split for r in rows if r.metric == spec.metric})
    if not present:
        raise SpecError(f"no rows match metric={spec.metric!r}")
    splits = spec.splits or tuple(present)
    for i, split in enumerate(splits):
        by_seed = _series_by_seed(rows, split, spec.metric)
        if not by_seed:
            raise SpecError(
                f"no rows match split={split!r} metric={spec.metric!r} "
                f"(splits present: {', '.join(present)})"
            )
        _plot_aggregated(ax, by_seed, _color(i), split, spec.agg)
    ax.set_xlabel("step")
    ax.set_ylabel(spec.metric)
    ax.grid(True, alpha=0.25)
    ax.legend()
    return sorted({r.config_hash for r in rows})


def _msecurve_points(rows, spec, path):
    sel = [(int(_NMSE_RE.match(r.metric).group(1)), r)
           for r in rows if r.split == spec.split and _NMSE_RE.match(r.metric)]
    if not sel:
        raise SpecError(f"{path}: no nmse_k<j> rows for "
                        f"split={spec.split!r}")
    step = spec.step if spec.step is not None else max(r.step for _, r in sel)
    at_step = [(k, r) for k, r in sel if r.step == step]
    if not at_step:
        raise SpecError(f"{path}: no rows at step {step} for "
                        f"split={spec.split!r}")
    by_k = {}
    for k, r in at_step:
        by_k.setdefault(k, {}).setdefault(r.seed, []).append((r.step,
                                                              r.value))
    return by_k


def _msecurve(spec, fig, ax):
    hashes = set()
    for i, path in enumerate(spec.sources):
        rows = read_metrics_csv(path)
        hashes.update(r.config_hash for r in rows)
        by_k = _msecurve_points(rows, spec, path)
        ks = sorted(by_k)
        mean = np.array([np.mean([v for pts in by_k[k].values()
                                  for _, v in pts]) for k in ks])
        std = np.array([np.std([v for pts in by_k[k].values()
                                for _, v in pts]) for k in ks])
        color = _color(i)
        ax.plot(ks, mean, color=color, marker="o", markersize=3.5,
                linewidth=1.6, label=_source_label(spec, i))
        if np.any(std > 0):
            ax.fill_between(ks, mean - std, mean + std, color=color,
                            alpha=0.2, linewidth=0)
    # normalized error of always predicting zero
    ax.axhline(1.0, color="0.6", linestyle=":", linewidth=1,
               label="zero predictor")
    ax.set_xlabel("context length")
    ax.set_ylabel("normalized mse")
    ax.grid(True, alpha=0.25)
    ax.legend()
    return sorted(hashes)


def _color_field(records, field, path_hint):
    values = []
    for i, rec in enumerate(records):
        if field not in rec:
            raise SpecError(f"{path_hint}: record {i} has no field "
                            f"{field!r}")
        values.append(rec[field])
    numeric = all(isinstance(v, (int, float)) and not isinstance(v, bool)
                  for v in values)
    return values, numeric


def _numeric_scatter(fig, ax, xy, values, field, markers=None):
    values = np.asarray(values, dtype=np.float64)
    vmin, vmax = float(values.min()), float(values.max())
    if vmin == vmax:
        vmax = vmin + 1.0
    norm = Normalize(vmin=vmin, vmax=vmax)
    if markers is None:
        ax.scatter(xy[:, 0], xy[:, 1], c=values, cmap=CMAP, norm=norm,
                   s=16)
    else:
        for _, marker, mask in markers:
            ax.scatter(xy[mask, 0], xy[mask, 1], c=values[mask],
                       cmap=CMAP, norm=norm, s=18, marker=marker)
    fig.colorbar(ScalarMappable(norm=norm, cmap=CMAP), ax=ax, label=field)


def _categorical_scatter(ax, xy, values):
    for i, cat in enumerate(sorted(set(map(str, values)))):
        mask = np.array([str(v) == cat for v in values])
        ax.scatter(xy[mask, 0], xy[mask, 1], color=_color(i), s=16,
                   label=cat)
    ax.legend()


def _scatter_records(spec, fig, ax):
    records = [r for path in spec.sources for r in read_records(path)]
    vectors = np.array([r["vector"] for r in records], dtype=np.float64)
    projected, _ = pca_top2(vectors)
    values, numeric = _color_field(records, spec.color_by, spec.sources[0])
    if numeric:
        _numeric_scatter(fig, ax, projected, values, spec.color_by)
    else:
        _categorical_scatter(ax, projected, values)
    ax.set_xlabel("pc1")
    ax.set_ylabel("pc2")
    return sorted({r["config_hash"] for r in records})


def _final_value(rows, split, metric, seed, path):
    points = [(r.step, r.value) for r in rows
              if r.split == split and r.metric == metric and r.seed == seed]
    if not points:
        raise SpecError(f"{path}: no rows match split={split!r} "
                        f"metric={metric!r} seed={seed}")
    return max(points)[1]


def _scatter_csv(spec, fig, ax):
    hashes = set()
    for i, path in enumerate(spec.sources):
        rows = read_metrics_csv(path)
        hashes.update(r.config_hash for r in rows)
        xs, ys = [], []
        for seed in sorted({r.seed for r in rows}):
            xs.append(_final_value(rows, spec.x_split, spec.metric, seed,
                                   path))
            ys.append(_final_value(rows, spec.y_split, spec.metric, seed,
                                   path))
        ax.scatter(xs, ys, color=_color(i), s=30,
                   label=_source_label(spec, i))
    ax.set_xlabel(f"{spec.x_split} {spec.metric}")
    ax.set_ylabel(f"{spec.y_split} {spec.metric}")
    ax.grid(True, alpha=0.25)
    ax.legend()
    return sorted(hashes)


def _scatter(spec, fig, ax):
    if spec.source_kind == "records":
        return _scatter_records(spec, fig, ax)
    return _scatter_csv(spec, fig, ax)


def _repmap(spec, fig, ax):
    records = [r for path in spec.sources for r in read_records(path)]
    vectors = np.array([r["vector"] for r in records], dtype=np.float64)
    projected, _ = pca_top2(vectors)
    values, numeric = _color_field(records, spec.color_by, spec.sources[0])
    conditions = sorted({str(r["condition"]) for r in records})
    marker_masks = []
    for i, cond in enumerate(conditions):
        mask = np.array([str(r["condition"]) == cond for r in records])
        marker_masks.append((cond, MARKERS[i % len(MARKERS)], mask))
    handles = [Line2D([], [], linestyle="", marker=marker, color="0.3",
                      label=cond) for cond, marker, _ in marker_masks]
    if numeric:
        _numeric_scatter(fig, ax, projected, values, spec.color_by,
                         markers=marker_masks)
    else:
        cats = sorted(set(map(str, values)))
        cat_color = {c: _color(i) for i, c in enumerate(cats)}
        for _, marker, mask in marker_masks:
            colors = [cat_color[str(v)]
                      for v, keep in zip(values, mask) if keep]
            ax.scatter(projected[mask, 0], projected[mask, 1], c=colors,
                       s=18, marker=marker)
        handles += [Line2D([], [], linestyle="", marker="o",
                           color=cat_color[c], label=c) for c in cats]
    ax.legend(handles=handles, loc="best", fontsize=8)
    ax.set_xlabel("pc1")
    ax.set_ylabel("pc2")
    return sorted({r["config_hash"] for r in records})


_RENDERERS = {
    "curve": _curve,
    "msecurve": _msecurve,
    "scatter": _scatter,
    "repmap": _repmap,
}


def render(spec):
    """Renders one validated spec to spec.out; returns the output path."""
    fig = Figure(figsize=FIGSIZE)
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)
    hashes = _RENDERERS[spec.kind](spec, fig, ax)
    if spec.title is not None:
        ax.set_title(spec.title)
    if spec.xlabel is not None:
        ax.set_xlabel(spec.xlabel)
    if spec.ylabel is not None:
        ax.set_ylabel(spec.ylabel)
    if spec.xlim is not None:
        ax.set_xlim(*spec.xlim)
    if spec.ylim is not None:
        ax.set_ylim(*spec.ylim)
    fig.text(0.01, 0.005, "runs: " + ", ".join(hashes), fontsize=6,
             color="0.45", family="monospace")
    metadata = {"Description": "source config hashes: " + ", ".join(hashes)}
    if spec.out.endswith(".svg"):
        metadata["Date"] = None  # no wall clock in the output
    fig.savefig(spec.out, dpi=spec.dpi, metadata=metadata)
    return spec.out
