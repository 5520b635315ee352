"""Readers for the two run-artifact formats.

Both readers are strict: any malformed content raises TableError with
the file path and 1-based line number, so a bad figure never renders
silently from damaged inputs.
"""

import csv
import json
from collections import namedtuple

CSV_HEADER = ("step", "split", "metric", "value", "seed", "config_hash")
RECORD_KEYS = ("vector", "query_class", "condition", "config_hash")

Row = namedtuple("Row", CSV_HEADER)


class TableError(ValueError):
    """Input file violates the metric-CSV or record-dump schema."""


def read_metrics_csv(path):
    """Parses one metric CSV into a list of typed Row tuples."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise TableError(f"{path}: empty file")
        for i, (got, want) in enumerate(zip(header, CSV_HEADER)):
            if got != want:
                raise TableError(
                    f"{path}: header column {i + 1} is {got!r}, "
                    f"expected {want!r}"
                )
        if len(header) != len(CSV_HEADER):
            raise TableError(
                f"{path}: expected {len(CSV_HEADER)} header columns, "
                f"got {len(header)}"
            )
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(CSV_HEADER):
                raise TableError(
                    f"{path} line {lineno}: expected {len(CSV_HEADER)} "
                    f"fields, got {len(rec)}"
                )
            try:
                rows.append(Row(int(rec[0]), rec[1], rec[2], float(rec[3]),
                                int(rec[4]), rec[5]))
            except ValueError as exc:
                raise TableError(f"{path} line {lineno}: {exc}") from exc
    if not rows:
        raise TableError(f"{path}: no data rows")
    return rows


def read_records(path):
    """Parses one newline-delimited JSON embedding dump.

    Every record must carry a numeric vector of uniform length plus the
    query_class/condition/config_hash fields the figure kinds key on.
    """
    records = []
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TableError(
                    f"{path} line {lineno}: {exc.msg}"
                ) from exc
            if not isinstance(rec, dict):
                raise TableError(
                    f"{path} line {lineno}: expected an object"
                )
            for key in RECORD_KEYS:
                if key not in rec:
                    raise TableError(
                        f"{path} line {lineno}: missing key {key!r}"
                    )
            vec = rec["vector"]
            if (not isinstance(vec, list) or not vec
                    or not all(isinstance(v, (int, float)) for v in vec)):
                raise TableError(
                    f"{path} line {lineno}: 'vector' must be a non-empty "
                    f"list of numbers"
                )
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise TableError(
                    f"{path} line {lineno}: vector length {len(vec)} != "
                    f"{dim} seen earlier"
                )
            records.append(rec)
    if not records:
        raise TableError(f"{path}: no records")
    return records
