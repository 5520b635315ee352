import json

import pytest

pytest.importorskip("plotview")

from plotview import TableError, read_metrics_csv, read_records

HEADER = "step,split,metric,value,seed,config_hash"


def test_metrics_roundtrip(cls_csv):
    rows = read_metrics_csv(cls_csv)
    assert len(rows) == 12
    assert rows[0].step == 0 and isinstance(rows[0].step, int)
    assert rows[1].split == "icl" and rows[1].metric == "acc"
    assert isinstance(rows[1].value, float)
    assert rows[0].seed == 0
    assert rows[0].config_hash == "aabbccddeeff"


def test_header_mismatch_names_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(HEADER.replace("split", "spilt") + "\n0,a,b,1.0,0,x\n")
    with pytest.raises(TableError, match=r"column 2.*'spilt'.*'split'"):
        read_metrics_csv(path)


def test_bad_value_names_line(tmp_path, csv_writer):
    path = csv_writer(tmp_path / "bad.csv", [
        (0, "icl", "acc", 0.5, 0, "x"),
        (100, "icl", "acc", "oops", 0, "x"),
    ])
    with pytest.raises(TableError, match="line 3"):
        read_metrics_csv(path)


def test_wrong_field_count_names_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(HEADER + "\n0,icl,acc,0.5,0,x\n1,icl,acc\n")
    with pytest.raises(TableError, match="line 3.*got 3"):
        read_metrics_csv(path)


def test_header_only_rejected(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text(HEADER + "\n")
    with pytest.raises(TableError, match="no data rows"):
        read_metrics_csv(path)


def test_records_roundtrip(reps_path):
    records = read_records(reps_path)
    assert len(records) == 3 * 4 * 6
    assert all(len(r["vector"]) == 6 for r in records)
    assert {r["condition"] for r in records} == {
        "label-0", "label-1", "absent"}


def test_records_missing_key(tmp_path):
    path = tmp_path / "r.ndjson"
    good = {"vector": [1.0, 2.0], "query_class": 0,
            "condition": "absent", "config_hash": "x"}
    bad = {k: v for k, v in good.items() if k != "condition"}
    path.write_text(json.dumps(good) + "\n" + json.dumps(bad) + "\n")
    with pytest.raises(TableError, match="line 2.*'condition'"):
        read_records(path)


def test_records_bad_json_names_line(tmp_path):
    path = tmp_path / "r.ndjson"
    path.write_text('{"vector": [1.0, 2.0], "query_class": 0, '
                    '"condition": "absent", "config_hash": "x"}\n{oops\n')
    with pytest.raises(TableError, match="line 2"):
        read_records(path)


def test_records_ragged_vector(tmp_path):
    path = tmp_path / "r.ndjson"
    a = {"vector": [1.0, 2.0], "query_class": 0, "condition": "absent",
         "config_hash": "x"}
    b = dict(a, vector=[1.0, 2.0, 3.0])
    path.write_text(json.dumps(a) + "\n" + json.dumps(b) + "\n")
    with pytest.raises(TableError, match="line 2.*length 3"):
        read_records(path)


def test_records_empty_file(tmp_path):
    path = tmp_path / "r.ndjson"
    path.write_text("")
    with pytest.raises(TableError, match="no records"):
        read_records(path)
