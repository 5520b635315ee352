"""Metric CSV stream: exact float round trips and crash-parseable prefixes."""

import numpy as np

from coqe.harness.runlog import HEADER, MetricWriter, read_metrics


def test_header_and_round_trip(tmp_path):
    path = tmp_path / "metrics.csv"
    values = [1.0 / 3.0, 1e-17, 123456.789012345678, 0.1 + 0.2]
    with MetricWriter(str(path), seed=3, cfg_hash="cafe01") as w:
        for i, v in enumerate(values):
            w.emit(i, "id", "nmse_k5", v)
        w.flush()
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(HEADER)
    rows = read_metrics(str(path))
    assert len(rows) == len(values)
    for row, want in zip(rows, values):
        assert row["value"] == want  # '%.17g' is repr-faithful for f64
        assert row["seed"] == 3
        assert row["config_hash"] == "cafe01"
        assert row["split"] == "id"


def test_append_does_not_duplicate_header(tmp_path):
    path = tmp_path / "metrics.csv"
    with MetricWriter(str(path), 0, "h") as w:
        w.emit(0, "id", "loss", 1.0)
    with MetricWriter(str(path), 0, "h") as w:
        w.emit(1, "id", "loss", 2.0)
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    assert lines[0].startswith("step,")
    assert not lines[1].startswith("step,")


def test_killed_run_leaves_parseable_prefix(tmp_path):
    path = tmp_path / "metrics.csv"
    with MetricWriter(str(path), 0, "h") as w:
        w.emit(0, "icl", "acc", 0.5)
        w.flush()
        w.emit(1, "icl", "acc", 0.75)
        w.flush()
    # simulate a torn final write
    blob = path.read_bytes()
    torn = tmp_path / "torn.csv"
    torn.write_bytes(blob[:-9])
    rows = read_metrics(str(torn))
    assert rows[0]["value"] == 0.5
    assert rows[0]["step"] == 0


def test_extreme_values_survive(tmp_path):
    path = tmp_path / "metrics.csv"
    values = [np.nextafter(0.0, 1.0), 1e308, -1e-308, 0.0]
    with MetricWriter(str(path), 1, "h") as w:
        for v in values:
            w.emit(9, "id", "m", v)
    got = [row["value"] for row in read_metrics(str(path))]
    assert got == values
