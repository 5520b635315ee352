"""Fixtures that synthesize run artifacts in the harness file formats."""

import json

import numpy as np
import pytest

HEADER = "step,split,metric,value,seed,config_hash"
HASH_A = "aabbccddeeff"
HASH_B = "112233445566"


def write_csv(path, rows):
    lines = [HEADER] + [",".join(str(c) for c in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def csv_writer():
    return write_csv


def _classification_rows(seed, cfg_hash, bump=0.0):
    rows = []
    for i, step in enumerate((0, 100, 200, 300)):
        rows.append((step, "train", "loss", 2.0 / (i + 1), seed, cfg_hash))
        rows.append((step, "icl", "acc", 0.5 + 0.1 * i + bump, seed,
                     cfg_hash))
        rows.append((step, "iwl", "acc", 0.4 + 0.15 * i + bump, seed,
                     cfg_hash))
    return rows


@pytest.fixture
def cls_csv(tmp_path):
    return write_csv(tmp_path / "metrics.csv",
                     _classification_rows(0, HASH_A))


@pytest.fixture
def cls_csv_pair(tmp_path):
    (tmp_path / "s0").mkdir()
    (tmp_path / "s1").mkdir()
    a = write_csv(tmp_path / "s0" / "metrics.csv",
                  _classification_rows(0, HASH_A))
    b = write_csv(tmp_path / "s1" / "metrics.csv",
                  _classification_rows(1, HASH_A, bump=0.02))
    return a, b


@pytest.fixture
def reg_csv(tmp_path):
    rows = []
    for step in (0, 50, 100):
        rows.append((step, "train", "loss", 1.0 / (step + 1), 0, HASH_B))
        for k in range(6):
            value = 1.0 / (1 + k) + 100.0 / (step + 100) - 0.5
            rows.append((step, "id", f"nmse_k{k}", value, 0, HASH_B))
    for k in range(6):
        rows.append((100, "ood/query-3std", f"nmse_k{k}", 1.5 / (1 + k),
                     0, HASH_B))
    return write_csv(tmp_path / "reg.csv", rows)


@pytest.fixture
def reps_path(tmp_path):
    rng = np.random.default_rng(7)
    records = []
    i = 0
    for cond in ("label-0", "label-1", "absent"):
        for cls in range(4):
            center = np.zeros(6)
            center[cls % 6] = 3.0 * (1 + cls)
            for _ in range(6):
                vec = center + rng.normal(size=6) * 0.1
                records.append({
                    "index": i,
                    "vector": [float(v) for v in vec],
                    "query_class": cls,
                    "condition": cond,
                    "layer": "sample-encoder",
                    "step": 300,
                    "seed": 0,
                    "config_hash": HASH_A,
                })
                i += 1
    path = tmp_path / "reps.ndjson"
    path.write_text(
        "".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path
