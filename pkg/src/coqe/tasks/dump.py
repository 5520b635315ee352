"""Newline-delimited JSON episode records for inspection and plotting."""

import json

import numpy as np


def _plain(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


def episode_records(batch):
    """Split a batched episode dict into one JSON-ready dict per episode.

    Array fields with a leading batch axis are sliced per episode; scalar
    metadata is copied onto every record.
    """
    arrays = {}
    meta = {}
    size = None
    for key, value in batch.items():
        if isinstance(value, np.ndarray) and value.ndim >= 1:
            arrays[key] = value
            if size is None:
                size = value.shape[0]
            elif value.shape[0] != size:
                raise ValueError(
                    f"field {key!r} has batch size {value.shape[0]}, "
                    f"expected {size}"
                )
        elif key != "task":
            meta[key] = _plain(value)
    if size is None:
        raise ValueError("episode batch holds no array fields")
    records = []
    for i in range(size):
        rec = dict(meta)
        rec["index"] = i
        for key, value in arrays.items():
            rec[key] = _plain(value[i])
        records.append(rec)
    return records


def write_records(path, records):
    """Write records as one compact, key-sorted JSON object per line."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")))
            fh.write("\n")
            count += 1
    return count
