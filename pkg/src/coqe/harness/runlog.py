"""Append-only CSV metric stream: step,split,metric,value,seed,config_hash.

Values print with repr-faithful '%.17g' and a '.' decimal point; the
file is flushed at every eval point so a killed run leaves a parseable
prefix.
"""

import csv
import os

HEADER = ("step", "split", "metric", "value", "seed", "config_hash")


class MetricWriter:
    def __init__(self, path, seed, cfg_hash):
        self.path = path
        self.seed = int(seed)
        self.cfg_hash = cfg_hash
        fresh = not os.path.exists(path) or os.path.getsize(path) == 0
        self._fh = open(path, "a", encoding="utf-8", newline="")
        if fresh:
            self._fh.write(",".join(HEADER) + "\n")

    def emit(self, step, split, metric, value):
        self._fh.write(
            f"{int(step)},{split},{metric},{format(float(value), '.17g')},"
            f"{self.seed},{self.cfg_hash}\n"
        )

    def flush(self):
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path):
    """Rows as dicts with step/value parsed back to numbers.

    A torn final row (kill mid-write) is dropped; damage anywhere else
    raises.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        raw = list(csv.DictReader(fh))
    rows = []
    for i, row in enumerate(raw):
        try:
            row["step"] = int(row["step"])
            row["value"] = float(row["value"])
            row["seed"] = int(row["seed"])
        except (TypeError, ValueError) as exc:
            if i == len(raw) - 1:
                break
            raise ValueError(f"{path}: corrupt row {i + 2}: {exc}") from exc
        rows.append(row)
    return rows
